//! Map nodes: the building blocks of the conjugating diffeomorphisms.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::twist::{step, SquareTwist};
use super::TorusPoint;
use crate::error::{AbcError, Result};
use crate::params::{parse_ratio, ratio_string, ratio_to_f64};

/// Rotation `(x, y) -> (x + alpha, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    #[serde(with = "ratio_serde")]
    pub alpha: BigRational,
    #[serde(skip, default)]
    alpha_f64: f64,
}

impl Rotation {
    pub fn new(alpha: BigRational) -> Self {
        let alpha_f64 = ratio_to_f64(&alpha).rem_euclid(1.0);
        Self { alpha, alpha_f64 }
    }

    fn refresh(&mut self) {
        self.alpha_f64 = ratio_to_f64(&self.alpha).rem_euclid(1.0);
    }
}

/// `phi_{q,eps}`: the square twist repeated on `q` vertical cells of width `1/q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiledTwist {
    pub q: u64,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UntwistedVariant {
    /// Each block is rescaled by its own width, so the map is a bijection.
    BlockWidth,
    /// The big block uses the cell scale `q` as written; not a bijection.
    Literal,
}

/// Untwisted conjugacy: per cell of width `1/q`, a twist on the big block
/// `[0, 1/q - 1/q^2)` and a twist on the small block `[1/q - 1/q^2, 1/q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UntwistedBlocks {
    pub q: u64,
    pub eps: f64,
    pub variant: UntwistedVariant,
}

/// `D_psi(x, y) = (x, y + psi(x))` with the staircase `psi` of the uniquely
/// ergodic construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalStepShear {
    pub q: u64,
    pub eps: f64,
    /// First plateau offset, in units of `1/q^2`.
    pub i1: u64,
    /// Number of staircase groups.
    pub s1: u64,
    /// Plateaus per unit staircase, `2 floor(1/(3 eps)) - 1`.
    pub a: u64,
}

/// `g(x, y) = (x + psi(y), y)` where `psi` climbs `b/a` on each of the
/// strips `j0 + 1 ..= a - j0` of height `1/a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalStepShear {
    pub q: u64,
    pub b: u64,
    pub a: u64,
    pub j0: u64,
    pub eps: f64,
}

/// Word-driven twist: cell `[0,1/q)` is cut into `2q^2` blocks; block `i`
/// carries symbol `word[i]`. Symbol 0 is the identity; symbol `j > 0` tiles
/// its block with `tiles[j]` copies of the square twist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordDrivenPhi {
    pub q: u64,
    pub eps: f64,
    #[serde(with = "base36_serde")]
    pub word: Vec<u8>,
    /// Tiles per block for each symbol (entry 0 unused).
    pub tiles: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapNode {
    Identity,
    Rotation(Rotation),
    QuasiRotTiled(TiledTwist),
    UntwistedH(UntwistedBlocks),
    VerticalStepShear(VerticalStepShear),
    HorizontalStepShear(HorizontalStepShear),
    WordDrivenPhi(WordDrivenPhi),
    /// `maps[0] ∘ maps[1] ∘ ... ∘ maps[last]`; the last entry acts first.
    Composite { maps: Vec<MapNode> },
    Inverse { map: Box<MapNode> },
}

#[inline]
fn cell_split(x: f64, q: u64) -> (f64, f64) {
    let qx = x * q as f64;
    let c = qx.floor().clamp(0.0, q as f64 - 1.0);
    (c, qx - c)
}

#[inline]
fn mix(h: u64, v: u64) -> u64 {
    (h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15)).wrapping_mul(0xbf58_476d_1ce4_e5b9).rotate_left(31)
}

impl TiledTwist {
    fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        let tw = SquareTwist::new(self.eps);
        let (c, z) = cell_split(p.x, self.q);
        let (z2, y2) = tw.apply(z, p.y, inverse);
        TorusPoint::new((c + z2) / self.q as f64, y2)
    }

    fn piece(&self, p: TorusPoint, inverse: bool) -> u64 {
        let tw = SquareTwist::new(self.eps);
        let (c, z) = cell_split(p.x, self.q);
        match tw.piece(z, p.y, inverse) {
            0 => 0,
            t => mix(c as u64, t),
        }
    }
}

impl UntwistedBlocks {
    fn split(&self) -> f64 {
        1.0 - 1.0 / self.q as f64
    }

    fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        let tw = SquareTwist::new(self.eps);
        let qf = self.q as f64;
        let (c, z) = cell_split(p.x, self.q);
        let split = self.split();
        let small = |z: f64, inv: bool| {
            let (x2, y2) = tw.apply((z - split) * qf, p.y, inv);
            (split + x2 / qf, y2)
        };
        let (z2, y2) = match self.variant {
            UntwistedVariant::BlockWidth => {
                if z < split {
                    let (x2, y2) = tw.apply(z / split, p.y, inverse);
                    (x2 * split, y2)
                } else {
                    small(z, inverse)
                }
            }
            UntwistedVariant::Literal => {
                if !inverse {
                    if z < split {
                        tw.apply(z, p.y, false)
                    } else {
                        small(z, false)
                    }
                } else {
                    let (x2, y2) = tw.apply(z, p.y, true);
                    if x2 < split {
                        (x2, y2)
                    } else {
                        small(z, true)
                    }
                }
            }
        };
        TorusPoint::new((c + z2) / qf, y2)
    }

    fn piece(&self, p: TorusPoint, inverse: bool) -> u64 {
        let tw = SquareTwist::new(self.eps);
        let (c, z) = cell_split(p.x, self.q);
        let split = self.split();
        let (big, local) = if z < split {
            let lx = if self.variant == UntwistedVariant::BlockWidth { z / split } else { z };
            (1, lx)
        } else {
            (2, (z - split) * self.q as f64)
        };
        match tw.piece(local, p.y, inverse) {
            0 => 0,
            t => mix(mix(c as u64, big), t),
        }
    }

    /// Block layout of one cell, as `(start, end, description)` in units of `1/q`.
    pub fn layout(&self) -> Vec<(f64, f64, String)> {
        let s = self.split();
        vec![
            (0.0, s, format!("big block, twist eps={}", self.eps)),
            (s, 1.0, format!("small block, twist eps={} rescaled by q^2", self.eps)),
        ]
    }
}

impl VerticalStepShear {
    /// Staircase plateau count `K = floor(1/(3 eps))`.
    pub fn big_k(&self) -> u64 {
        self.a.div_ceil(2)
    }

    /// `psi_bar_{s,eps}(v)` on `[0, a s]`.
    fn psi_bar(&self, s: u64, v: f64) -> f64 {
        let k = self.big_k();
        let sf = s as f64;
        let mut up = 0.0;
        let mut down = 0.0;
        for i in 1..=(2 * k - 2) {
            let r = step((v - i as f64 * sf) / self.eps);
            if i < k {
                up += r;
            } else {
                down += r;
            }
        }
        -3.0 * self.eps * (up - down)
    }

    /// `psi(x)`, periodic with period `1/q`.
    pub fn psi(&self, x: f64) -> f64 {
        let (_, z) = cell_split(x.rem_euclid(1.0), self.q);
        let w = z * self.q as f64;
        let i1 = self.i1 as f64;
        for s in 1..=self.s1 {
            let start = i1 + (self.a * s * (s - 1) / 2) as f64;
            let len = (self.a * s) as f64;
            if w >= start && w < start + len {
                return self.psi_bar(s, w - start);
            }
        }
        0.0
    }

    fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        let d = self.psi(p.x);
        TorusPoint::new(p.x, p.y + if inverse { -d } else { d })
    }
}

impl HorizontalStepShear {
    /// `psi(y)` before reduction mod 1.
    pub fn psi(&self, y: f64) -> f64 {
        let v = self.a as f64 * y.rem_euclid(1.0);
        let lo = self.j0;
        let hi = self.a - self.j0;
        let full = ((v - self.eps).floor().max(0.0) as u64).clamp(lo, hi) - lo;
        let near = v.round();
        let mut partial = 0.0;
        if near >= 0.0 {
            let i = near as u64;
            let d = v - near;
            if i > lo && i <= hi && d.abs() < self.eps {
                partial = step(d / self.eps);
            }
        }
        (full as f64 + partial) * self.b as f64 / self.a as f64
    }

    fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        let d = self.psi(p.y);
        TorusPoint::new(p.x + if inverse { -d } else { d }, p.y)
    }
}

impl WordDrivenPhi {
    pub fn blocks(&self) -> u64 {
        2 * self.q * self.q
    }

    fn locate(&self, x: f64) -> (f64, f64, usize, f64) {
        let (c, z) = cell_split(x, self.q);
        let nb = self.blocks() as f64;
        let bz = z * nb;
        let blk = bz.floor().clamp(0.0, nb - 1.0);
        (c, blk, blk as usize, bz - blk)
    }

    fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        let (c, blk, bi, w) = self.locate(p.x);
        let sym = self.word[bi] as usize;
        if sym == 0 {
            return p;
        }
        let m = self.tiles[sym] as f64;
        let tw = SquareTwist::new(self.eps);
        let mw = w * m;
        let tile = mw.floor().clamp(0.0, m - 1.0);
        let (x2, y2) = tw.apply(mw - tile, p.y, inverse);
        let w2 = (tile + x2) / m;
        TorusPoint::new((c + (blk + w2) / self.blocks() as f64) / self.q as f64, y2)
    }

    fn piece(&self, p: TorusPoint, inverse: bool) -> u64 {
        let (c, _, bi, w) = self.locate(p.x);
        let sym = self.word[bi] as usize;
        if sym == 0 {
            return 0;
        }
        let m = self.tiles[sym] as f64;
        let mw = w * m;
        let tile = mw.floor().clamp(0.0, m - 1.0);
        match SquareTwist::new(self.eps).piece(mw - tile, p.y, inverse) {
            0 => 0,
            t => mix(mix(mix(c as u64, bi as u64), tile as u64), t),
        }
    }
}

impl MapNode {
    pub fn rotation(alpha: BigRational) -> Self {
        MapNode::Rotation(Rotation::new(alpha))
    }

    pub fn compose(maps: Vec<MapNode>) -> Self {
        MapNode::Composite { maps }
    }

    pub fn inverse_of(map: MapNode) -> Self {
        MapNode::Inverse { map: Box::new(map) }
    }

    /// Conjugate `h ∘ inner ∘ h^{-1}`.
    pub fn conjugate(h: MapNode, inner: MapNode) -> Self {
        MapNode::compose(vec![h.clone(), inner, MapNode::inverse_of(h)])
    }

    #[inline]
    pub fn forward(&self, p: TorusPoint) -> TorusPoint {
        self.apply(p, false)
    }

    #[inline]
    pub fn inverse(&self, p: TorusPoint) -> TorusPoint {
        self.apply(p, true)
    }

    pub fn apply(&self, p: TorusPoint, inverse: bool) -> TorusPoint {
        match self {
            MapNode::Identity => p,
            MapNode::Rotation(r) => {
                TorusPoint::new(p.x + if inverse { -r.alpha_f64 } else { r.alpha_f64 }, p.y)
            }
            MapNode::QuasiRotTiled(t) => t.apply(p, inverse),
            MapNode::UntwistedH(u) => u.apply(p, inverse),
            MapNode::VerticalStepShear(v) => v.apply(p, inverse),
            MapNode::HorizontalStepShear(h) => h.apply(p, inverse),
            MapNode::WordDrivenPhi(w) => w.apply(p, inverse),
            MapNode::Composite { maps } => {
                if inverse {
                    maps.iter().fold(p, |acc, m| m.apply(acc, true))
                } else {
                    maps.iter().rev().fold(p, |acc, m| m.apply(acc, false))
                }
            }
            MapNode::Inverse { map } => map.apply(p, !inverse),
        }
    }

    /// Identifier of the smooth piece containing `p`; finite differences
    /// whose stencil stays inside one piece see a smooth map.
    pub fn piece(&self, p: TorusPoint, inverse: bool) -> u64 {
        match self {
            MapNode::QuasiRotTiled(t) => t.piece(p, inverse),
            MapNode::UntwistedH(u) => u.piece(p, inverse),
            MapNode::WordDrivenPhi(w) => w.piece(p, inverse),
            MapNode::Composite { maps } => {
                let mut h = 0u64;
                let mut cur = p;
                let mut visit = |m: &MapNode| {
                    h = mix(h, m.piece(cur, inverse));
                    cur = m.apply(cur, inverse);
                };
                if inverse {
                    maps.iter().for_each(&mut visit);
                } else {
                    maps.iter().rev().for_each(&mut visit);
                }
                h
            }
            MapNode::Inverse { map } => map.piece(p, !inverse),
            _ => 0,
        }
    }

    /// False for maps that are not bijections of the torus.
    pub fn is_bijective(&self) -> bool {
        match self {
            MapNode::UntwistedH(u) => u.variant == UntwistedVariant::BlockWidth,
            MapNode::Composite { maps } => maps.iter().all(|m| m.is_bijective()),
            MapNode::Inverse { map } => map.is_bijective(),
            _ => true,
        }
    }

    /// Ratio between a tile width and an ulp of `x`: the precision lost when
    /// local coordinates are formed.
    pub fn magnification(&self) -> f64 {
        match self {
            MapNode::QuasiRotTiled(t) => t.q as f64,
            MapNode::UntwistedH(u) => (u.q * u.q) as f64,
            MapNode::WordDrivenPhi(w) => {
                let m = w.tiles.iter().copied().max().unwrap_or(1).max(1);
                (2 * w.q * w.q * w.q) as f64 * m as f64
            }
            MapNode::HorizontalStepShear(h) => h.a as f64,
            MapNode::VerticalStepShear(v) => (v.q * v.q) as f64,
            MapNode::Composite { maps } => maps.iter().map(|m| m.magnification()).fold(1.0, f64::max),
            MapNode::Inverse { map } => map.magnification(),
            _ => 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(AbcError::Construction(m));
        match self {
            MapNode::QuasiRotTiled(TiledTwist { q, eps })
            | MapNode::UntwistedH(UntwistedBlocks { q, eps, .. }) => {
                if *q == 0 || !(*eps > 0.0 && *eps < 0.25) {
                    return fail(format!("need q > 0 and eps in (0, 1/4), got q={q}, eps={eps}"));
                }
            }
            MapNode::WordDrivenPhi(w) => {
                if w.word.len() as u64 != w.blocks() {
                    return fail(format!("word has length {}, expected {}", w.word.len(), w.blocks()));
                }
                if w.word.iter().any(|&s| s as usize >= w.tiles.len()) {
                    return fail("word uses a symbol without a tile count".into());
                }
            }
            MapNode::Composite { maps } => maps.iter().try_for_each(|m| m.check())?,
            MapNode::Inverse { map } => map.check()?,
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map node serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut node: MapNode = serde_json::from_str(text).map_err(|e| AbcError::Parse(e.to_string()))?;
        node.refresh();
        node.check()?;
        Ok(node)
    }

    fn refresh(&mut self) {
        match self {
            MapNode::Rotation(r) => r.refresh(),
            MapNode::Composite { maps } => maps.iter_mut().for_each(|m| m.refresh()),
            MapNode::Inverse { map } => map.refresh(),
            _ => {}
        }
    }

    /// Human-readable tree with block layouts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        self.describe_into(&mut out, 0);
        out
    }

    fn describe_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let _ = match self {
            MapNode::Identity => writeln!(out, "{pad}identity"),
            MapNode::Rotation(r) => writeln!(out, "{pad}rotation alpha={}", ratio_string(&r.alpha)),
            MapNode::QuasiRotTiled(t) => {
                writeln!(out, "{pad}quasi-rotation tiled on {} cells of width 1/{}, eps={}", t.q, t.q, t.eps)
            }
            MapNode::UntwistedH(u) => {
                let _ = writeln!(out, "{pad}untwisted h: q={}, eps={}, variant={:?}", u.q, u.eps, u.variant);
                for (a, b, d) in u.layout() {
                    let _ = writeln!(out, "{pad}  [{a:.6}, {b:.6})/q: {d}");
                }
                Ok(())
            }
            MapNode::VerticalStepShear(v) => {
                let _ = writeln!(
                    out,
                    "{pad}vertical step shear: q={}, eps={}, i1={}, s1={}, a={}",
                    v.q, v.eps, v.i1, v.s1, v.a
                );
                for s in 1..=v.s1 {
                    let start = v.i1 + v.a * s * (s - 1) / 2;
                    let _ = writeln!(
                        out,
                        "{pad}  [{start}, {})/q^2: staircase with step {s}",
                        start + v.a * s
                    );
                }
                Ok(())
            }
            MapNode::HorizontalStepShear(h) => writeln!(
                out,
                "{pad}horizontal step shear: q={}, b={}, a={} strips, active strips {}..={}, eps={}",
                h.q,
                h.b,
                h.a,
                h.j0 + 1,
                h.a - h.j0,
                h.eps
            ),
            MapNode::WordDrivenPhi(w) => {
                let _ = writeln!(out, "{pad}word-driven twist: q={}, {} blocks, eps={}", w.q, w.blocks(), w.eps);
                let _ = writeln!(out, "{pad}  tiles per block by symbol: {:?}", w.tiles);
                let _ = writeln!(out, "{pad}  word: {}", crate::words::Word(w.word.clone()));
                Ok(())
            }
            MapNode::Composite { maps } => {
                let _ = writeln!(out, "{pad}composite (last acts first):");
                for m in maps {
                    m.describe_into(out, depth + 1);
                }
                Ok(())
            }
            MapNode::Inverse { map } => {
                let _ = writeln!(out, "{pad}inverse of:");
                map.describe_into(out, depth + 1);
                Ok(())
            }
        };
    }
}

mod ratio_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&ratio_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

mod base36_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::words::Word(w.to_vec()).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        crate::words::Word::parse(&s).map(|w| w.0).map_err(serde::de::Error::custom)
    }
}
