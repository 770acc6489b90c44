//! Builders for the conjugating maps `h_n` and the systems `T_n`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::node::*;
use super::TorusPoint;
use crate::error::{AbcError, Result};
use crate::params::{ratio_to_f64, StageParams};
use crate::words::{assemble_w, sample_selection, Selection};

/// Smallest block width the f64 evaluation can resolve.
pub const MIN_BLOCK_WIDTH: f64 = 1e-12;

fn stage_q(stage: &StageParams) -> Result<u64> {
    stage
        .q
        .to_u64()
        .ok_or_else(|| AbcError::Construction(format!("stage {}: q is too large to evaluate", stage.n)))
}

fn stage_eps(stage: &StageParams) -> Result<f64> {
    let eps = stage.eps_f64();
    if !(eps > 0.0 && eps < 0.25) {
        return Err(AbcError::Construction(format!("stage {}: eps = {eps} outside (0, 1/4)", stage.n)));
    }
    Ok(eps)
}

fn check_width(width: f64, what: &str) -> Result<()> {
    if width < MIN_BLOCK_WIDTH {
        return Err(AbcError::Construction(format!("{what} width {width:e} is below numeric resolution")));
    }
    Ok(())
}

/// Untwisted `h_n`; needs `q_n >= 4`.
pub fn build_untwisted_h(stage: &StageParams, variant: UntwistedVariant) -> Result<MapNode> {
    let q = stage_q(stage)?;
    if q < 4 {
        return Err(AbcError::Construction(format!("stage {}: untwisted h needs q >= 4, got {q}", stage.n)));
    }
    let eps = stage_eps(stage)?;
    check_width(1.0 / (q as f64 * q as f64), "small block")?;
    Ok(MapNode::UntwistedH(UntwistedBlocks { q, eps, variant }))
}

/// Staircase layout of the uniquely ergodic construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub i1: Option<u64>,
    pub s1: Option<u64>,
}

/// `h_n = phi_{q,eps} ∘ D_psi` for the uniquely ergodic construction.
pub fn build_ue_h(stage: &StageParams, spec: StepSpec) -> Result<MapNode> {
    let q = stage_q(stage)?;
    let eps = stage_eps(stage)?;
    let eps_r = &stage.eps;
    let big_k = (BigRational::from_integer(BigInt::one()) / (eps_r * BigRational::from_integer(3.into())))
        .floor()
        .to_integer()
        .to_u64()
        .unwrap_or(0);
    if big_k < 2 {
        return Err(AbcError::Construction(format!("stage {}: eps too large for a staircase", stage.n)));
    }
    let a = 2 * big_k - 1;
    let margin = (eps_r * BigRational::from_integer(BigInt::from(2 * q))).ceil().to_integer().to_u64().unwrap();
    let i1 = spec.i1.unwrap_or(margin);
    if i1 < margin {
        return Err(AbcError::Construction(format!("i1 = {i1} below ceil(2 eps q) = {margin}")));
    }
    let room = q.checked_sub(margin).and_then(|r| r.checked_sub(i1)).unwrap_or(0);
    let fits = |s: u64| a * s * (s + 1) / 2 <= room;
    let s1 = match spec.s1 {
        Some(s) => s,
        None => {
            let mut s = 0;
            while fits(s + 1) {
                s += 1;
            }
            s
        }
    };
    if s1 == 0 || !fits(s1) {
        return Err(AbcError::Construction(format!(
            "stage {}: staircase with i1={i1}, s1={s1}, a={a} does not fit in q={q}",
            stage.n
        )));
    }
    check_width(eps / (q as f64 * q as f64), "staircase transition")?;
    let shear = MapNode::VerticalStepShear(VerticalStepShear { q, eps, i1, s1, a });
    let phi = MapNode::QuasiRotTiled(TiledTwist { q, eps });
    Ok(MapNode::compose(vec![phi, shear]))
}

/// Options of the weak-mixing construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmSpec {
    /// Exponent `sigma_n` in `b_n = floor(n q^sigma)`; defaults to `1/n`.
    pub sigma: Option<f64>,
    /// Maximum tiles per block; symbol `j` uses `min(q^(j-1), max_tiles)`.
    pub max_tiles: u64,
}

impl Default for WmSpec {
    fn default() -> Self {
        Self { sigma: None, max_tiles: 64 }
    }
}

/// `b_n = floor(n q^sigma)`.
pub fn shear_b(n: u32, q: u64, sigma: f64) -> u64 {
    (f64::from(n) * (q as f64).powf(sigma) + 1e-9).floor() as u64
}

/// `h_n = g_n ∘ phi_n` for the weak-mixing construction driven by `word`
/// (length `2 q^2`, symbols below `alphabet`).
pub fn build_wm_h(stage: &StageParams, word: &[u8], alphabet: u32, spec: &WmSpec) -> Result<MapNode> {
    let q = stage_q(stage)?;
    let eps = stage_eps(stage)?;
    let n = stage.n;
    if word.len() as u64 != 2 * q * q {
        return Err(AbcError::Construction(format!("word length {} != 2 q^2 = {}", word.len(), 2 * q * q)));
    }
    if let Some(&s) = word.iter().find(|&&s| u32::from(s) >= alphabet) {
        return Err(AbcError::Construction(format!("symbol {s} outside alphabet of size {alphabet}")));
    }
    if spec.max_tiles == 0 {
        return Err(AbcError::Construction("max_tiles must be positive".into()));
    }
    let tiles: Vec<u64> = (0..alphabet)
        .map(|j| match j {
            0 => 0,
            j => q.checked_pow(j - 1).unwrap_or(u64::MAX).min(spec.max_tiles),
        })
        .collect();
    let max_t = tiles.iter().copied().max().unwrap_or(1).max(1);
    check_width(1.0 / (2.0 * (q as f64).powi(3) * max_t as f64), "tile")?;
    let sigma = spec.sigma.unwrap_or(1.0 / f64::from(n));
    let b = shear_b(n, q, sigma);
    if b == 0 {
        return Err(AbcError::Construction("b_n = floor(n q^sigma) is zero".into()));
    }
    let unit = 2 * q * q * q;
    let a = b * unit;
    let b_eps = BigRational::from_integer(BigInt::from(b)) * &stage.eps;
    let j0 = unit * b_eps.ceil().to_integer().to_u64().unwrap();
    if 2 * j0 >= a {
        return Err(AbcError::Construction(format!("shear has no active strips (b = {b}, eps = {eps})")));
    }
    check_width(eps / a as f64, "shear transition")?;
    let phi = MapNode::WordDrivenPhi(WordDrivenPhi { q, eps, word: word.to_vec(), tiles });
    let g = MapNode::HorizontalStepShear(HorizontalStepShear { q, b, a, j0, eps });
    Ok(MapNode::compose(vec![g, phi]))
}

/// `argmin_{0 <= i < q_n} |i/q_n - sum_{m<n} 1/(2 q_m)|` (lowest index on ties).
pub fn central_index(chain: &[StageParams], n: u32) -> Result<BigUint> {
    let idx = n as usize;
    if idx == 0 || idx > chain.len() {
        return Err(AbcError::Invalid(format!("stage {n} not in chain")));
    }
    let two = BigInt::from(2);
    let c: BigRational = chain[..idx - 1]
        .iter()
        .map(|s| BigRational::new(BigInt::one(), &two * BigInt::from(s.q.clone())))
        .fold(BigRational::zero(), |a, b| a + b);
    let q = BigInt::from(chain[idx - 1].q.clone());
    let x = c * BigRational::from_integer(q.clone());
    let fl = x.floor().to_integer();
    let frac = &x - BigRational::from_integer(fl.clone());
    let half = BigRational::new(1.into(), 2.into());
    let mut i = if frac > half { fl + 1 } else { fl };
    let max = &q - 1;
    if i > max {
        i = max;
    }
    if i < BigInt::zero() {
        i = BigInt::zero();
    }
    Ok(i.to_biguint().unwrap())
}

/// Which conjugacy each stage `n >= 2` uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Untwisted { variant: UntwistedVariant },
    UniquelyErgodic { step: StepSpec },
    WeakMixing { spec: WmSpec, words: WordSpec },
}

/// Word selection for the weak-mixing construction: at stage `m` the
/// `q_m^2 / word_len` words of length `word_len` are drawn with seed
/// `seed + m` and assembled into `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordSpec {
    pub alphabet: u32,
    pub word_len: usize,
    /// Entry `i` replaces `word_len` at stage `i + 2`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage_word_len: Vec<usize>,
    pub eps: f64,
    pub seed: u64,
    pub retry_budget: u32,
}

impl Default for WordSpec {
    fn default() -> Self {
        Self { alphabet: 4, word_len: 32, stage_word_len: Vec::new(), eps: 0.125, seed: 1, retry_budget: 50 }
    }
}

impl WordSpec {
    pub fn len_at(&self, n: u32) -> usize {
        n.checked_sub(2)
            .and_then(|i| self.stage_word_len.get(i as usize))
            .copied()
            .unwrap_or(self.word_len)
    }
}

/// Selects words for stage `stage` and builds its weak-mixing `h`.
pub fn build_wm_stage(stage: &StageParams, spec: &WmSpec, words: &WordSpec) -> Result<(MapNode, Selection)> {
    let q = stage_q(stage)?;
    let total = q
        .checked_mul(q)
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| AbcError::Construction(format!("stage {}: q^2 too large", stage.n)))?;
    let len = words.len_at(stage.n);
    if len == 0 || total % len != 0 {
        return Err(AbcError::Construction(format!(
            "stage {}: word length {len} does not divide q^2 = {total}",
            stage.n
        )));
    }
    let sel = sample_selection(
        words.alphabet,
        len,
        total / len,
        words.eps,
        words.seed.wrapping_add(u64::from(stage.n)),
        words.retry_budget,
    )
    .map_err(|e| e.at_stage(stage.n))?;
    let w = assemble_w(&sel.words, words.alphabet);
    let h = build_wm_h(stage, &w.0, words.alphabet, spec)?;
    Ok((h, sel))
}

/// `T_n = H_n ∘ R_{alpha_{n+1}} ∘ H_n^{-1}` with `H_n = h_2 ∘ ... ∘ h_n`
/// (the seed stage contributes the identity).
#[derive(Clone, Debug)]
pub struct AbCSystem {
    pub h: MapNode,
    pub alpha: BigRational,
    pub stage: StageParams,
    /// `q_{n+1}`, the period of `T_n`.
    pub period: BigUint,
    alpha_f64: f64,
}

impl AbCSystem {
    /// From explicit maps `h_2, ..., h_n`.
    pub fn from_maps(chain: &[StageParams], maps: Vec<MapNode>) -> Result<Self> {
        let n = maps.len() + 1;
        let stage = chain
            .get(n - 1)
            .ok_or_else(|| AbcError::Invalid(format!("chain has no stage {n}")))?
            .clone();
        let alpha = stage.next_alpha();
        let period = stage.next_q();
        let h = MapNode::compose(maps);
        h.check()?;
        let alpha_f64 = ratio_to_f64(&alpha).rem_euclid(1.0);
        Ok(Self { h, alpha, stage, period, alpha_f64 })
    }

    /// Builds `T_n` with the given construction at every stage `2..=n`.
    pub fn build(chain: &[StageParams], n: u32, construction: &Construction) -> Result<Self> {
        Self::build_traced(chain, n, construction).map(|(sys, _)| sys)
    }

    /// As [`AbCSystem::build`], also returning the word selections of a
    /// weak-mixing build.
    pub fn build_traced(chain: &[StageParams], n: u32, construction: &Construction) -> Result<(Self, Vec<Selection>)> {
        let mut maps = Vec::new();
        let mut selections = Vec::new();
        for m in 2..=n {
            let st = chain
                .get(m as usize - 1)
                .ok_or_else(|| AbcError::Invalid(format!("chain has no stage {m}")))?;
            let h = match construction {
                Construction::Untwisted { variant } => build_untwisted_h(st, *variant)?,
                Construction::UniquelyErgodic { step } => build_ue_h(st, *step)?,
                Construction::WeakMixing { spec, words } => {
                    let (h, sel) = build_wm_stage(st, spec, words)?;
                    selections.push(sel);
                    h
                }
            };
            maps.push(h);
        }
        Ok((Self::from_maps(chain, maps)?, selections))
    }

    pub fn n(&self) -> u32 {
        self.stage.n
    }

    /// One application of `T_n` in floating point.
    pub fn step(&self, p: TorusPoint) -> TorusPoint {
        let u = self.h.inverse(p);
        self.h.forward(TorusPoint::new(u.x + self.alpha_f64, u.y))
    }

    /// `T_n` as a map node.
    pub fn as_node(&self) -> MapNode {
        MapNode::conjugate(self.h.clone(), MapNode::rotation(self.alpha.clone()))
    }
}
