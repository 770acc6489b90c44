//! Bowen-metric and Hamming-metric covering counts.
//!
//! Orbits are stored in 32-bit fixed point (resolution `2^-32`), so
//! dyadic coordinates compare exactly.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::diffeo::{central_index, AbCSystem, MapNode, OrbitEngine, Sampling, TorusPoint};
use crate::error::{AbcError, Result};
use crate::params::{ln_biguint, StageParams};
use crate::report::fmt_f64;
use crate::scaling::ScalingFamily;

const FIX: f64 = 4_294_967_296.0;

#[inline]
fn to_fix(v: f64) -> u32 {
    let s = (v * FIX).floor();
    if s >= FIX {
        0
    } else {
        s as u32
    }
}

#[inline]
fn fix_dist(a: u32, b: u32) -> u32 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}

/// `eps` in fixed-point units.
fn eps_fix(eps: f64) -> u64 {
    (eps * FIX).round() as u64
}

/// Finite partition of the torus, labelled `0..cells()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// `nx` columns by `ny` rows.
    Grid { nx: u32, ny: u32 },
    /// Image of a grid under `map`.
    Pushforward { nx: u32, ny: u32, map: MapNode },
}

impl Partition {
    pub fn grid(nx: u32, ny: u32) -> Self {
        Partition::Grid { nx, ny }
    }

    pub fn cells(&self) -> u32 {
        match self {
            Partition::Grid { nx, ny } | Partition::Pushforward { nx, ny, .. } => nx * ny,
        }
    }

    /// Sup-metric diameter of a grid cell (before any pushforward).
    pub fn grid_diameter(&self) -> f64 {
        match self {
            Partition::Grid { nx, ny } | Partition::Pushforward { nx, ny, .. } => {
                (1.0 / f64::from(*nx)).max(1.0 / f64::from(*ny))
            }
        }
    }

    #[inline]
    pub fn label(&self, p: TorusPoint) -> u16 {
        let (nx, ny, p) = match self {
            Partition::Grid { nx, ny } => (*nx, *ny, p),
            Partition::Pushforward { nx, ny, map } => (*nx, *ny, map.inverse(p)),
        };
        let i = ((p.x * f64::from(nx)) as u32).min(nx - 1);
        let j = ((p.y * f64::from(ny)) as u32).min(ny - 1);
        (j * nx + i) as u16
    }

    pub fn check(&self) -> Result<()> {
        let c = self.cells();
        if c == 0 || c > u32::from(u16::MAX) {
            return Err(AbcError::Invalid(format!("partition must have 1..=65535 cells, got {c}")));
        }
        Ok(())
    }
}

/// Candidate points and time sampling for Bowen-metric counts.
#[derive(Clone, Debug)]
pub struct BowenConfig {
    pub points: Vec<TorusPoint>,
    pub sampling: Sampling,
    /// Side of the grid the points came from, if any.
    pub grid: Option<usize>,
}

impl BowenConfig {
    /// Cell centres of a `g x g` grid, row by row.
    pub fn grid(g: usize, sampling: Sampling) -> Self {
        let points = (0..g)
            .flat_map(|j| (0..g).map(move |i| ((i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64)))
            .map(|(x, y)| TorusPoint::new(x, y))
            .collect();
        Self { points, sampling, grid: Some(g) }
    }

    pub fn with_points(points: Vec<TorusPoint>, sampling: Sampling) -> Self {
        Self { points, sampling, grid: None }
    }

    /// A grid must resolve the scale: `eps > 2/g`.
    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(AbcError::Invalid(format!("eps = {eps} must be positive")));
        }
        if let Some(g) = self.grid {
            if eps <= 2.0 / g as f64 {
                return Err(AbcError::Invalid(format!("grid {g} too coarse for eps = {eps} (need eps > 2/g)")));
            }
        }
        Ok(())
    }
}

/// Orbits of many points in fixed point, `samples` entries per point.
pub struct OrbitTable {
    samples: usize,
    data: Vec<(u32, u32)>,
}

impl OrbitTable {
    /// Orbits of points given on the torus.
    pub fn of_points(sys: &AbCSystem, points: &[TorusPoint], sampling: &Sampling) -> Self {
        let bases: Vec<TorusPoint> = points.iter().map(|&p| sys.h.inverse(p)).collect();
        Self::of_bases(sys, &bases, sampling)
    }

    /// Orbits of the points `H_n(base)`.
    pub fn of_bases(sys: &AbCSystem, bases: &[TorusPoint], sampling: &Sampling) -> Self {
        let eng = OrbitEngine::new(sys, sampling);
        let samples = eng.len();
        let data: Vec<(u32, u32)> = bases
            .par_iter()
            .flat_map_iter(|&b| eng.orbit_from_base(b).map(|p| (to_fix(p.x), to_fix(p.y))).collect::<Vec<_>>())
            .collect();
        Self { samples, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.samples).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.data[i * self.samples..(i + 1) * self.samples]
    }

    /// True iff the Bowen distance between orbits `i` and `j` is at least `eps`.
    pub fn separated(&self, i: usize, j: usize, eps: f64) -> bool {
        let e = eps_fix(eps);
        self.row(i)
            .iter()
            .zip(self.row(j))
            .any(|(a, b)| u64::from(fix_dist(a.0, b.0).max(fix_dist(a.1, b.1))) >= e)
    }

    /// Bowen distance between orbits `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| fix_dist(a.0, b.0).max(fix_dist(a.1, b.1)))
            .max()
            .map_or(0.0, |d| f64::from(d) / FIX)
    }

    /// Greedy maximal separated set: scan in index order, keep a point iff
    /// it is `eps`-separated from every kept point.
    pub fn max_separated(&self, eps: f64) -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::new();
        for c in 0..self.len() {
            if kept.iter().all(|&k| self.separated(c, k, eps)) {
                kept.push(c);
            }
        }
        kept
    }

    /// Greedy cover: take the lowest-index uncovered point as a centre and
    /// cover every point within Bowen distance `< eps`; repeat.
    pub fn min_cover(&self, eps: f64) -> Vec<usize> {
        let n = self.len();
        let mut covered = vec![false; n];
        let mut centres = Vec::new();
        for c in 0..n {
            if covered[c] {
                continue;
            }
            centres.push(c);
            covered[c] = true;
            for (j, cov) in covered.iter_mut().enumerate().skip(c + 1) {
                if !*cov && !self.separated(c, j, eps) {
                    *cov = true;
                }
            }
        }
        centres
    }
}

/// Bowen distance `max_{t < n} d(T^t x, T^t y)` in floating point.
pub fn bowen_dist(sys: &AbCSystem, x: TorusPoint, y: TorusPoint, n: u64) -> f64 {
    let s = Sampling::full(n);
    let eng = OrbitEngine::new(sys, &s);
    eng.orbit(x).zip(eng.orbit(y)).map(|(a, b)| a.dist(&b)).fold(0.0, f64::max)
}

/// Greedy separated set, a lower bound on the maximal separated set.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatedSet {
    pub count: usize,
    pub points: Vec<TorusPoint>,
}

pub fn max_separated(sys: &AbCSystem, cfg: &BowenConfig, eps: f64) -> Result<SeparatedSet> {
    cfg.check_eps(eps)?;
    let kept = OrbitTable::of_points(sys, &cfg.points, &cfg.sampling).max_separated(eps);
    Ok(SeparatedSet { count: kept.len(), points: kept.iter().map(|&i| cfg.points[i]).collect() })
}

/// Greedy cover size, an upper bound on the minimal cover over the candidates.
pub fn min_cover(sys: &AbCSystem, cfg: &BowenConfig, eps: f64) -> Result<usize> {
    cfg.check_eps(eps)?;
    Ok(OrbitTable::of_points(sys, &cfg.points, &cfg.sampling).min_cover(eps).len())
}

/// Result of the explicit separated-set check.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    /// Points of the witness set, already mapped by `H_n`.
    pub points: Vec<TorusPoint>,
    pub pairs: usize,
    pub separated_pairs: usize,
    /// Smallest Bowen distance over all pairs.
    pub min_distance: f64,
}

impl WitnessReport {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn all_separated(&self) -> bool {
        self.pairs == self.separated_pairs
    }
}

/// Witness set for the untwisted construction at stage `n`: for each level
/// `y = 3/8 + k eps` (`k = 0..=floor(1/(4 eps))`) the `q_n/2` points
/// `x = i0/q_n + 2 j eps_n/q_n^2`, with `i0` the central index, mapped by
/// `H_n`. Every pair is checked for `(q_{n+1}, eps)`-separation.
pub fn witness_untwisted(chain: &[StageParams], sys: &AbCSystem, eps: f64) -> Result<WitnessReport> {
    let st = &sys.stage;
    let q = st
        .q_u64()
        .ok_or_else(|| AbcError::Invalid("witness set needs q_n to fit in 64 bits".into()))?;
    let horizon = sys
        .period
        .to_u64_digits()
        .first()
        .copied()
        .filter(|_| sys.period.bits() <= 32)
        .ok_or(AbcError::Budget { estimated: u128::MAX, limit: 1 << 32 })?;
    let i0 = central_index(chain, st.n)?;
    let i0 = i0.to_u64_digits().first().copied().unwrap_or(0);
    let eps_n = st.eps_f64();
    let qf = q as f64;
    let levels = (1.0 / (4.0 * eps) + 1e-12).floor() as usize;
    let mut bases = Vec::new();
    for k in 0..=levels {
        let y = 3.0 / 8.0 + k as f64 * eps;
        for j in 0..q / 2 {
            bases.push(TorusPoint::new(i0 as f64 / qf + 2.0 * j as f64 * eps_n / (qf * qf), y));
        }
    }
    let table = OrbitTable::of_bases(sys, &bases, &Sampling::full(horizon));
    let mut pairs = 0;
    let mut sep = 0;
    let mut min_d = f64::INFINITY;
    for a in 0..bases.len() {
        for b in a + 1..bases.len() {
            pairs += 1;
            if table.separated(a, b, eps) {
                sep += 1;
            }
            min_d = min_d.min(table.distance(a, b));
        }
    }
    let points = bases.iter().map(|&b| sys.h.forward(b)).collect();
    Ok(WitnessReport { points, pairs, separated_pairs: sep, min_distance: min_d })
}

/// Partition labels along the sampled orbit of `x`.
pub fn code_orbit(sys: &AbCSystem, part: &Partition, x: TorusPoint, sampling: &Sampling) -> Vec<u16> {
    OrbitEngine::new(sys, sampling).orbit(x).map(|p| part.label(p)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HammingCover {
    pub count: usize,
    pub covered_fraction: f64,
    pub samples: usize,
}

/// Normalised Hamming distance of two codes, or `None` once it is known to
/// reach `limit`.
#[inline]
fn hamming_below(a: &[u16], b: &[u16], limit: usize) -> bool {
    let mut m = 0;
    for (x, y) in a.iter().zip(b) {
        if x != y {
            m += 1;
            if m >= limit {
                return false;
            }
        }
    }
    true
}

/// `n` uniform points from a ChaCha8 stream; the Hamming cover samples these.
pub fn uniform_points(n: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| TorusPoint::new(rng.random::<f64>(), rng.random::<f64>())).collect()
}

/// Greedy Hamming-ball cover of `sample_size` random points: balls of radius
/// `eps` (distance `< eps`) around the first uncovered sample until at least
/// a `1 - eps` fraction is covered.
pub fn hamming_cover(
    sys: &AbCSystem,
    part: &Partition,
    sampling: &Sampling,
    eps: f64,
    sample_size: usize,
    seed: u64,
) -> Result<HammingCover> {
    part.check()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AbcError::Invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    if (sample_size as f64) < 100.0 / eps {
        return Err(AbcError::Invalid(format!("sample size {sample_size} below 100/eps")));
    }
    let pts = uniform_points(sample_size, seed);
    let eng = OrbitEngine::new(sys, sampling);
    let len = eng.len();
    let codes: Vec<Vec<u16>> =
        pts.par_iter().map(|&p| eng.orbit(p).map(|q| part.label(q)).collect()).collect();
    // d < eps  <=>  mismatches < eps * len
    let limit = (eps * len as f64).ceil().max(1.0) as usize;
    let limit = if (limit as f64) < eps * len as f64 { limit + 1 } else { limit };
    let need = ((1.0 - eps) * sample_size as f64).ceil() as usize;
    let mut covered = vec![false; sample_size];
    let mut n_cov = 0;
    let mut count = 0;
    let mut next = 0;
    while n_cov < need {
        while covered[next] {
            next += 1;
        }
        count += 1;
        let c = next;
        for j in c..sample_size {
            if !covered[j] && hamming_below(&codes[c], &codes[j], limit) {
                covered[j] = true;
                n_cov += 1;
            }
        }
    }
    Ok(HammingCover { count, covered_fraction: n_cov as f64 / sample_size as f64, samples: sample_size })
}

/// Counts in the inequality `N_n(4 eps) <= N_{n+1}(2 eps) <= N_n(eps)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sandwich {
    pub lower: usize,
    pub middle: usize,
    pub upper: usize,
}

impl Sandwich {
    pub fn holds(&self) -> bool {
        self.lower <= self.middle && self.middle <= self.upper
    }
}

/// Greedy-cover sandwich between consecutive stages on a common candidate set.
pub fn sandwich(sys_n: &AbCSystem, sys_next: &AbCSystem, cfg: &BowenConfig, eps: f64) -> Result<Sandwich> {
    cfg.check_eps(eps)?;
    let a = OrbitTable::of_points(sys_n, &cfg.points, &cfg.sampling);
    let b = OrbitTable::of_points(sys_next, &cfg.points, &cfg.sampling);
    Ok(Sandwich {
        lower: a.min_cover(4.0 * eps).len(),
        middle: b.min_cover(2.0 * eps).len(),
        upper: a.min_cover(eps).len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Separated,
    Cover,
    Hamming,
    Witness,
}

impl CountKind {
    pub fn name(&self) -> &'static str {
        match self {
            CountKind::Separated => "separated",
            CountKind::Cover => "cover",
            CountKind::Hamming => "hamming",
            CountKind::Witness => "witness",
        }
    }
}

/// One measured count.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    pub stage: u32,
    pub horizon: BigUint,
    pub eps: f64,
    pub kind: CountKind,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub record: usize,
    pub family: String,
    pub t: f64,
    pub log_ratio: f64,
}

/// Per family and count kind, the smallest `t` whose log-ratio stops
/// increasing over the last two horizons.
#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    pub family: String,
    pub kind: CountKind,
    pub eps: f64,
    pub t: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ComplexityReport {
    pub records: Vec<CountRecord>,
    pub ratios: Vec<RatioRow>,
    pub thresholds: Vec<Threshold>,
}

/// Checks `S(2 eps) <= N(eps) <= S(eps)` wherever all three counts exist.
pub fn check_invariants(records: &[CountRecord]) -> Result<()> {
    let find = |r: &CountRecord, kind: CountKind, eps: f64| {
        records
            .iter()
            .find(|o| o.stage == r.stage && o.horizon == r.horizon && o.kind == kind && (o.eps - eps).abs() < 1e-12)
            .map(|o| o.count)
    };
    for r in records.iter().filter(|r| r.kind == CountKind::Cover) {
        if let Some(s) = find(r, CountKind::Separated, r.eps) {
            if r.count > s {
                return Err(AbcError::Numerical(format!("cover {} exceeds separated {} at eps {}", r.count, s, r.eps)));
            }
        }
        if let Some(s2) = find(r, CountKind::Separated, 2.0 * r.eps) {
            if s2 > r.count {
                return Err(AbcError::Numerical(format!("separated(2 eps) {} exceeds cover {}", s2, r.count)));
            }
        }
    }
    Ok(())
}

/// Log-ratios `ln(count / a_m(t))` with `m` the horizon, and threshold estimates.
pub fn slow_entropy_report(
    records: Vec<CountRecord>,
    families: &[ScalingFamily],
    t_grid: &[f64],
) -> Result<ComplexityReport> {
    check_invariants(&records)?;
    let mut ratios = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let ln_m = ln_biguint(&r.horizon);
        for fam in families {
            for &t in t_grid {
                let Ok(ln_a) = fam.eval_ln(ln_m, t) else { continue };
                let lr = (r.count.max(1) as f64).ln() - ln_a;
                ratios.push(RatioRow { record: i, family: fam.name(), t, log_ratio: lr });
            }
        }
    }
    let mut thresholds = Vec::new();
    let mut keys: Vec<(String, CountKind, u64)> = Vec::new();
    for row in &ratios {
        let r = &records[row.record];
        let key = (row.family.clone(), r.kind, r.eps.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (fam, kind, eps_bits) in keys {
        let mut t_star = None;
        let mut ts: Vec<f64> = t_grid.to_vec();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for t in ts {
            let mut series: Vec<(&BigUint, f64)> = ratios
                .iter()
                .filter(|x| x.family == fam && x.t == t)
                .filter(|x| records[x.record].kind == kind && records[x.record].eps.to_bits() == eps_bits)
                .map(|x| (&records[x.record].horizon, x.log_ratio))
                .collect();
            series.sort_by(|a, b| a.0.cmp(b.0));
            if series.len() >= 2 {
                let n = series.len();
                if series[n - 1].1 <= series[n - 2].1 {
                    t_star = Some(t);
                    break;
                }
            }
        }
        thresholds.push(Threshold { family: fam, kind, eps: f64::from_bits(eps_bits), t: t_star });
    }
    Ok(ComplexityReport { records, ratios, thresholds })
}

impl ComplexityReport {
    /// CSV with columns `stage,horizon,eps,count_kind,count,family,t,log_ratio`;
    /// rows without a family carry the raw count only.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("stage,horizon,eps,count_kind,count,family,t,log_ratio\n");
        for (i, r) in self.records.iter().enumerate() {
            let base = format!("{},{},{},{},{}", r.stage, r.horizon, fmt_f64(r.eps), r.kind.name(), r.count);
            let _ = writeln!(out, "{base},,,");
            for x in self.ratios.iter().filter(|x| x.record == i) {
                let _ = writeln!(out, "{base},{},{},{}", x.family, fmt_f64(x.t), fmt_f64(x.log_ratio));
            }
        }
        out
    }

    pub fn thresholds_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("family,count_kind,eps,threshold_t\n");
        for t in &self.thresholds {
            let v = t.t.map_or_else(|| "none".to_string(), fmt_f64);
            let _ = writeln!(out, "{},{},{},{}", t.family, t.kind.name(), fmt_f64(t.eps), v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{Construction, UntwistedVariant};
    use crate::params::{build_chain, CustomStage, Growth, LPrime, ParamProfile, Regime};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn chain(q1: u64, growth: &[u32]) -> Vec<StageParams> {
        let prof = ParamProfile::new(
            Regime::Custom {
                stages: growth
                    .iter()
                    .map(|&g| CustomStage { growth: Growth::Exponent(g), l_prime: LPrime::Exponent(1) })
                    .collect(),
            },
            q1,
        )
        .relaxed();
        build_chain(&prof, growth.len() as u32).unwrap()
    }

    /// `T_1 = R_{alpha_2}` (seed stage, identity conjugacy).
    fn rotation_system(alpha_num: i64, alpha_den: i64) -> AbCSystem {
        let mut c = chain(2, &[2]);
        c[0].alpha = BigRational::new(BigInt::from(alpha_num), BigInt::from(alpha_den));
        AbCSystem::from_maps(&c, vec![]).unwrap()
    }

    #[test]
    fn identity_cover_is_small() {
        let sys = rotation_system(0, 1);
        let mut sys = sys;
        sys.alpha = BigRational::from_integer(0.into());
        let cfg = BowenConfig::grid(32, Sampling::full(1));
        let n = min_cover(&sys, &cfg, 0.26).unwrap();
        assert!(n <= 16, "{n}");
    }

    #[test]
    fn rotation_counts_do_not_grow() {
        let sys = rotation_system(1, 3);
        let a = min_cover(&sys, &BowenConfig::grid(30, Sampling::full(1)), 0.3).unwrap();
        let b = min_cover(&sys, &BowenConfig::grid(30, Sampling::full(50)), 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let sys = rotation_system(1, 3);
        assert!(min_cover(&sys, &BowenConfig::grid(8, Sampling::full(1)), 0.2).is_err());
    }

    #[test]
    fn cover_equals_separated_and_sandwiches() {
        let c = chain(2, &[3, 4, 3]);
        let sys = AbCSystem::build(&c, 2, &Construction::Untwisted { variant: UntwistedVariant::BlockWidth }).unwrap();
        let cfg = BowenConfig::grid(24, Sampling::full(64));
        let table = OrbitTable::of_points(&sys, &cfg.points, &cfg.sampling);
        let n = table.min_cover(0.125).len();
        let s = table.max_separated(0.125).len();
        let s2 = table.max_separated(0.25).len();
        assert_eq!(n, s);
        assert!(s2 <= n);
    }

    #[test]
    fn report_threshold_for_exact_power_law() {
        let recs: Vec<CountRecord> = [10u32, 100, 1000]
            .iter()
            .map(|&m| CountRecord { stage: 2, horizon: m.into(), eps: 0.1, kind: CountKind::Cover, count: m as usize })
            .collect();
        let rep = slow_entropy_report(recs, &[ScalingFamily::Pol], &[0.5, 1.0, 1.5]).unwrap();
        assert_eq!(rep.thresholds[0].t, Some(1.0));
        let csv = rep.to_csv("");
        assert_eq!(csv.lines().count(), 1 + 3 * 4);
    }

    #[test]
    fn invariant_violation_is_reported() {
        let mk = |kind, eps, count| CountRecord { stage: 2, horizon: 8u32.into(), eps, kind, count };
        let recs = vec![mk(CountKind::Cover, 0.1, 10), mk(CountKind::Separated, 0.1, 5)];
        assert!(slow_entropy_report(recs, &[], &[]).is_err());
    }

    #[test]
    fn fixed_point_distance_is_exact_for_dyadics() {
        let a = to_fix(0.375);
        let b = to_fix(0.5);
        assert_eq!(u64::from(fix_dist(a, b)), eps_fix(0.125));
        assert_eq!(fix_dist(to_fix(0.0), to_fix(0.9375)), fix_dist(to_fix(0.0), to_fix(0.0625)));
    }

    proptest! {
        #[test]
        fn hamming_distance_limit_agrees_with_count(
            a in proptest::collection::vec(0u16..3, 40),
            b in proptest::collection::vec(0u16..3, 40),
            limit in 1usize..41,
        ) {
            let m = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            prop_assert_eq!(hamming_below(&a, &b, limit), m < limit);
        }
    }
}
