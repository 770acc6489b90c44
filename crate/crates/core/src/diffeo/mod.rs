//! Conjugating diffeomorphisms of the torus and orbits of `T_n`.
//!
//! The torus is `[0,1)^2` with the sup metric. Map nodes are evaluated in
//! `f64`; the rotation coordinate of an orbit is advanced exactly.

mod build;
mod node;
pub mod twist;

pub use build::*;
pub use node::*;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AbcError, Result};
use crate::params::ratio_to_f64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    /// Reduces both coordinates into `[0, 1)`.
    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: wrap(x), y: wrap(y) }
    }

    /// Sup distance on the torus.
    #[inline]
    pub fn dist(&self, o: &TorusPoint) -> f64 {
        circle_dist(self.x, o.x).max(circle_dist(self.y, o.y))
    }
}

#[inline]
pub fn wrap(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Signed difference `a - b` reduced to `[-1/2, 1/2)`.
#[inline]
pub fn circle_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (d + 0.5).floor()
}

/// Times `0, stride, 2 stride, ...` below `min(horizon, period)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub horizon: BigUint,
    pub stride: BigUint,
    pub count: usize,
}

impl Sampling {
    /// Every time step below `horizon`.
    pub fn full(horizon: u64) -> Self {
        Self { horizon: horizon.into(), stride: BigUint::one(), count: horizon as usize }
    }

    /// At most `max_samples` evenly strided times below `min(horizon, period)`.
    /// Beyond the period the orbit repeats, so longer horizons add nothing.
    pub fn capped(horizon: &BigUint, period: &BigUint, max_samples: usize) -> Self {
        let eff = horizon.min(period).clone();
        let max = BigUint::from(max_samples.max(1));
        let stride = if eff <= max { BigUint::one() } else { Integer::div_ceil(&eff, &max) };
        let count = Integer::div_ceil(&eff, &stride).to_usize().unwrap_or(max_samples);
        Self { horizon: horizon.clone(), stride, count }
    }

    pub fn is_exact(&self) -> bool {
        self.stride.is_one()
    }
}

/// `frac(t alpha)` for the sampled times, computed exactly and rounded once.
pub fn rotation_offsets(alpha: &BigRational, sampling: &Sampling) -> Vec<f64> {
    let q = alpha.denom().clone();
    let p = alpha.numer().mod_floor(&q);
    let step = (BigInt::from(sampling.stride.clone()) * p).mod_floor(&q);
    if let (Some(qq), Some(st)) = (q.to_u128(), step.to_u128()) {
        let mut cur: u128 = 0;
        let qf = qq as f64;
        (0..sampling.count)
            .map(|_| {
                let v = cur as f64 / qf;
                cur += st;
                if cur >= qq {
                    cur -= qq;
                }
                if v >= 1.0 { 0.0 } else { v }
            })
            .collect()
    } else {
        let mut cur = BigInt::zero();
        (0..sampling.count)
            .map(|_| {
                let v = ratio_to_f64(&BigRational::new(cur.clone(), q.clone()));
                cur += &step;
                if cur >= q {
                    cur -= &q;
                }
                if v >= 1.0 { 0.0 } else { v }
            })
            .collect()
    }
}

/// Orbit evaluator for `T_n` at a fixed sampling.
pub struct OrbitEngine<'a> {
    pub system: &'a AbCSystem,
    pub offsets: Vec<f64>,
}

impl<'a> OrbitEngine<'a> {
    pub fn new(system: &'a AbCSystem, sampling: &Sampling) -> Self {
        Self { system, offsets: rotation_offsets(&system.alpha, sampling) }
    }

    /// Orbit of the point whose `H_n`-preimage is `base`.
    pub fn orbit_from_base(&self, base: TorusPoint) -> impl Iterator<Item = TorusPoint> + '_ {
        self.offsets
            .iter()
            .map(move |&o| self.system.h.forward(TorusPoint::new(base.x + o, base.y)))
    }

    pub fn orbit(&self, p: TorusPoint) -> impl Iterator<Item = TorusPoint> + '_ {
        self.orbit_from_base(self.system.h.inverse(p))
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `T^t(x)` for `t = 0, stride, ... < horizon`.
pub fn orbit(system: &AbCSystem, x: TorusPoint, horizon: u64, stride: u64) -> Vec<TorusPoint> {
    let stride = stride.max(1);
    let sampling = Sampling {
        horizon: horizon.into(),
        stride: stride.into(),
        count: horizon.div_ceil(stride) as usize,
    };
    OrbitEngine::new(system, &sampling).orbit(x).collect()
}

/// Orbit evaluations needed for `points` orbits at `sampling`.
pub fn estimated_evaluations(points: usize, sampling: &Sampling) -> u128 {
    points as u128 * sampling.count as u128
}

pub fn check_budget(estimated: u128, limit: u128) -> Result<()> {
    if estimated > limit {
        return Err(AbcError::Budget { estimated, limit });
    }
    Ok(())
}

/// Statistics of `|det DF - 1|` over random interior points.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianStats {
    pub mean: f64,
    pub max: f64,
    pub excluded_fraction: f64,
}

/// Jacobian of `node` at `p` by central differences, or `None` when the
/// stencil crosses a seam between smooth pieces. Composites use the chain
/// rule over their factors, so each difference only sees one factor.
pub fn jacobian_at(node: &MapNode, p: TorusPoint, h: f64, inverse: bool) -> Option<[[f64; 2]; 2]> {
    match node {
        MapNode::Composite { maps } => {
            let mut jac = [[1.0, 0.0], [0.0, 1.0]];
            let mut cur = p;
            let mut visit = |m: &MapNode| -> Option<()> {
                let j = jacobian_at(m, cur, h, inverse)?;
                jac = mat_mul(&j, &jac);
                cur = m.apply(cur, inverse);
                Some(())
            };
            if inverse {
                maps.iter().try_for_each(&mut visit)?;
            } else {
                maps.iter().rev().try_for_each(&mut visit)?;
            }
            Some(jac)
        }
        MapNode::Inverse { map } => jacobian_at(map, p, h, !inverse),
        _ => leaf_jacobian(node, p, h, inverse),
    }
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn leaf_jacobian(node: &MapNode, p: TorusPoint, h: f64, inverse: bool) -> Option<[[f64; 2]; 2]> {
    let id = node.piece(p, inverse);
    let mut jac = [[0.0; 2]; 2];
    for (j, (ex, ey)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
        let a = TorusPoint::new(p.x + ex, p.y + ey);
        let b = TorusPoint::new(p.x - ex, p.y - ey);
        if node.piece(a, inverse) != id || node.piece(b, inverse) != id {
            return None;
        }
        let fa = node.apply(a, inverse);
        let fb = node.apply(b, inverse);
        jac[0][j] = circle_diff(fa.x, fb.x) / (2.0 * h);
        jac[1][j] = circle_diff(fa.y, fb.y) / (2.0 * h);
    }
    Some(jac)
}

pub fn jacobian_mc(node: &MapNode, samples: usize, fd_step: f64, seed: u64) -> JacobianStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut used = 0usize;
    for _ in 0..samples {
        let p = TorusPoint::new(rng.random::<f64>(), rng.random::<f64>());
        if let Some(j) = jacobian_at(node, p, fd_step, false) {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let e = (det - 1.0).abs();
            sum += e;
            max = max.max(e);
            used += 1;
        }
    }
    JacobianStats {
        mean: if used > 0 { sum / used as f64 } else { f64::NAN },
        max,
        excluded_fraction: 1.0 - used as f64 / samples.max(1) as f64,
    }
}

/// Estimated area of `node(S)` for the horizontal strip `S = {y0 <= y < y1}`,
/// from a jittered grid of `side^2` points (one per cell).
pub fn strip_image_area(node: &MapNode, y0: f64, y1: f64, side: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let s = side as f64;
    for i in 0..side {
        for j in 0..side {
            let p = TorusPoint::new((i as f64 + rng.random::<f64>()) / s, (j as f64 + rng.random::<f64>()) / s);
            let pre = node.inverse(p);
            if pre.y >= y0 && pre.y < y1 {
                hits += 1;
            }
        }
    }
    hits as f64 / (s * s)
}
