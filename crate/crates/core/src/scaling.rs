//! Scaling functions used to normalise complexity counts, and the ordering
//! tables that compare them.
//!
//! Values like `q_5` have hundreds of thousands of digits, so every family is
//! evaluated from `ln m` and returns `ln a_m(t)`.

use num_bigint::BigUint;
use num_traits::{Pow, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{AbcError, Result};
use crate::params::{decimal_digits, ln_biguint, MAX_DIGITS};
use crate::report::fmt_f64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x >= 0.5` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x >= 0.5);
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln Gamma_r(x) = r ln Gamma(x^(1/r) + 1)`.
pub fn ln_gamma_r(x: f64, r: u32) -> Result<f64> {
    if !(x >= 0.0) || r == 0 {
        return Err(AbcError::Domain(format!("Gamma_r needs x >= 0 and r > 0 (x = {x}, r = {r})")));
    }
    Ok(f64::from(r) * ln_gamma(x.powf(1.0 / f64::from(r)) + 1.0))
}

/// `Gamma_r(x) = Gamma(x^(1/r) + 1)^r`, `+inf` on overflow.
pub fn gamma_r(x: f64, r: u32) -> Result<f64> {
    Ok(ln_gamma_r(x, r)?.exp())
}

/// Inverse of `Gamma_r` on `[1, inf)`, taking `ln y` with `y >= 1`.
pub fn gamma_r_inv_ln(ln_y: f64, r: u32) -> Result<f64> {
    if !(ln_y >= 0.0) || !ln_y.is_finite() || r == 0 {
        return Err(AbcError::Domain(format!("Gamma_r inverse needs y >= 1 (ln y = {ln_y})")));
    }
    let target = ln_y / f64::from(r);
    let f = |z: f64| ln_gamma(z + 1.0) - target;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    if f(lo) >= 0.0 {
        return Ok(1.0);
    }
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(AbcError::Numerical("Gamma_r inverse bracket overflow".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).powi(r as i32))
}

/// Inverse of `Gamma_r` on `[1, inf)`.
pub fn gamma_r_inv(y: f64, r: u32) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(AbcError::Domain(format!("Gamma_r inverse needs y >= 1 (y = {y})")));
    }
    gamma_r_inv_ln(y.ln(), r)
}

/// A positive integer-valued magnitude, possibly far beyond `f64` range.
#[derive(Clone, Debug, PartialEq)]
pub struct Magnitude {
    exact: Option<BigUint>,
    ln: f64,
}

impl Magnitude {
    pub fn from_big(x: BigUint) -> Self {
        let ln = ln_biguint(&x);
        Self { exact: Some(x), ln }
    }

    pub fn from_u64(x: u64) -> Self {
        Self::from_big(BigUint::from(x))
    }

    /// A real magnitude known only through its logarithm.
    pub fn from_ln(ln: f64) -> Self {
        Self { exact: None, ln }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn exact(&self) -> Option<&BigUint> {
        self.exact.as_ref()
    }

    pub fn as_f64(&self) -> f64 {
        match &self.exact {
            Some(x) => x.to_f64().unwrap_or(f64::INFINITY),
            None => self.ln.exp(),
        }
    }

    /// `self^e`, exact when possible.
    pub fn pow(&self, e: u32) -> Result<Self> {
        match &self.exact {
            Some(x) => {
                let digits = decimal_digits(x) as f64 * f64::from(e);
                if digits > MAX_DIGITS as f64 {
                    return Err(AbcError::SizeLimit { stage: 0, digits: digits as u64 });
                }
                Ok(Self::from_big(Pow::pow(x, e)))
            }
            None => Ok(Self::from_ln(self.ln * f64::from(e))),
        }
    }

    /// Decimal rendering (exact when the integer is known).
    pub fn decimal(&self) -> String {
        match &self.exact {
            Some(x) => x.to_string(),
            None => fmt_f64(self.ln.exp()),
        }
    }
}

/// `q~_1, ..., q~_{n_max + 1}` with `q~_{n+1} = q1^((n!)^r)`.
pub fn idealized_q_sequence(q1: u64, r: u32, n_max: u32) -> Result<Vec<Magnitude>> {
    if q1 < 2 {
        return Err(AbcError::Domain("q1 must be at least 2".into()));
    }
    let base = BigUint::from(q1);
    let mut out = vec![Magnitude::from_big(base.clone())];
    let mut fact = BigUint::from(1u32);
    for n in 1..=n_max {
        fact *= n;
        let e = Pow::pow(&fact, r);
        let digits = e.to_f64().unwrap_or(f64::INFINITY) * (q1 as f64).log10();
        if digits > MAX_DIGITS as f64 {
            return Err(AbcError::SizeLimit { stage: n + 1, digits: digits as u64 });
        }
        out.push(Magnitude::from_big(Pow::pow(&base, e.to_u64().unwrap())));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingFamily {
    /// `m^t`
    Pol,
    /// `(ln m)^t`
    Ln,
    /// `m^(t / Gamma_r^{-1}(ln m / ln q1))`
    Int1 { r: u32, q1: u64 },
    /// `m^(t / Gamma_r^{-1}(ln m / ln q1)^((r-2)/r))`
    Int2 { r: u32, q1: u64 },
}

impl ScalingFamily {
    pub fn name(&self) -> String {
        match self {
            ScalingFamily::Pol => "pol".into(),
            ScalingFamily::Ln => "ln".into(),
            ScalingFamily::Int1 { r, .. } => format!("int1_r{r}"),
            ScalingFamily::Int2 { r, .. } => format!("int2_r{r}"),
        }
    }

    /// `ln a_m(t)` from `ln m`.
    pub fn eval_ln(&self, ln_m: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(AbcError::Domain(format!("t must be non-negative, got {t}")));
        }
        if !(ln_m > 0.0) {
            return Err(AbcError::Domain(format!("scaling needs m > 1 (ln m = {ln_m})")));
        }
        match *self {
            ScalingFamily::Pol => Ok(t * ln_m),
            ScalingFamily::Ln => Ok(t * ln_m.ln()),
            ScalingFamily::Int1 { r, q1 } => {
                let g = gamma_r_inv_ln(level(ln_m, q1)?.ln(), r)?;
                Ok(t * ln_m / g)
            }
            ScalingFamily::Int2 { r, q1 } => {
                let g = gamma_r_inv_ln(level(ln_m, q1)?.ln(), r)?;
                let e = f64::from(r.saturating_sub(2)) / f64::from(r);
                Ok(t * ln_m / g.powf(e))
            }
        }
    }

    /// `a_m(t)`; overflow gives `+inf`.
    pub fn eval(&self, m: f64, t: f64) -> Result<f64> {
        Ok(self.eval_ln(m.ln(), t)?.exp())
    }
}

fn level(ln_m: f64, q1: u64) -> Result<f64> {
    if q1 < 2 {
        return Err(AbcError::Domain("q1 must be at least 2".into()));
    }
    let v = ln_m / (q1 as f64).ln();
    if v < 1.0 {
        return Err(AbcError::Domain(format!("ln m / ln q1 = {v} is below 1")));
    }
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct OrderingRow {
    pub m: Magnitude,
    pub log_ratio: f64,
}

/// `ln(slow(m, t) / fast(m, s))` along a grid of `m`.
#[derive(Clone, Debug)]
pub struct OrderingTable {
    pub rows: Vec<OrderingRow>,
}

impl OrderingTable {
    pub fn log_ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.log_ratio).collect()
    }

    /// The suffix starting at the largest entry is strictly decreasing, has
    /// at least two points, and ends at the table minimum.
    pub fn tail_is_decreasing(&self) -> bool {
        let v = self.log_ratios();
        if v.len() < 2 {
            return false;
        }
        let argmax = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, &x)| if x > v[best] { i } else { best });
        if argmax + 1 >= v.len() {
            return false;
        }
        v[argmax..].windows(2).all(|w| w[1] < w[0]) && self.final_is_min()
    }

    pub fn final_is_min(&self) -> bool {
        let v = self.log_ratios();
        match v.last() {
            Some(&last) => v.iter().all(|&x| last <= x),
            None => false,
        }
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.log_ratios().windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with columns `m,log_ratio,ratio_finite`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        out.push_str(header);
        out.push_str("m,log_ratio,ratio_finite\n");
        for r in &self.rows {
            let ratio = r.log_ratio.exp();
            let ratio = if ratio.is_infinite() {
                "inf".to_string()
            } else if ratio == 0.0 {
                "0".to_string()
            } else {
                fmt_f64(ratio)
            };
            let _ = writeln!(out, "{},{},{}", r.m.decimal(), fmt_f64(r.log_ratio), ratio);
        }
        out
    }
}

pub fn ordering_table(
    slow: ScalingFamily,
    t: f64,
    fast: ScalingFamily,
    s: f64,
    grid: &[Magnitude],
) -> Result<OrderingTable> {
    let rows = grid
        .iter()
        .map(|m| {
            let lr = slow.eval_ln(m.ln(), t)? - fast.eval_ln(m.ln(), s)?;
            Ok(OrderingRow { m: m.clone(), log_ratio: lr })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `ln n!` from the exact factorial.
    fn ln_factorial(n: u32) -> f64 {
        let mut f = BigUint::from(1u32);
        for i in 2..=n {
            f *= i;
        }
        ln_biguint(&f)
    }

    #[test]
    fn ln_gamma_matches_exact_factorials() {
        for n in 1..=170u32 {
            let got = ln_gamma(f64::from(n) + 1.0);
            let want = ln_factorial(n);
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "n = {n}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_gamma_half_integer() {
        // Gamma(1/2) = sqrt(pi)
        let want = 0.5 * std::f64::consts::PI.ln();
        assert!((ln_gamma(0.5) - want).abs() < 1e-14);
    }

    #[test]
    fn gamma_r_hits_factorial_powers() {
        assert!((gamma_r(16.0, 4).unwrap() - 16.0).abs() < 1e-10);
        assert!((gamma_r(81.0, 4).unwrap() - 1296.0).abs() < 1e-8);
        assert_eq!(gamma_r_inv(1.0, 4).unwrap(), 1.0);
    }

    #[test]
    fn gamma_r_inverse_rejects_small_y() {
        assert!(matches!(gamma_r_inv(0.5, 4), Err(AbcError::Domain(_))));
    }

    #[test]
    fn int_families_on_idealized_points() {
        let q = idealized_q_sequence(2, 4, 3).unwrap();
        let int1 = ScalingFamily::Int1 { r: 4, q1: 2 };
        let int2 = ScalingFamily::Int2 { r: 4, q1: 2 };
        // q~_3 = 2^16 = 65536, q~_2 = 2
        assert_eq!(q[2].exact().unwrap(), &BigUint::from(65536u32));
        assert!((int1.eval(65536.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((int1.eval(65536.0, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((int2.eval(65536.0, 1.0).unwrap() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_domain_errors() {
        assert!(ScalingFamily::Int1 { r: 4, q1: 2 }.eval(1.5, 1.0).is_err());
        assert!(ScalingFamily::Ln.eval(1.0, 1.0).is_err());
        assert!(ScalingFamily::Pol.eval(10.0, -1.0).is_err());
    }

    #[test]
    fn overflow_is_infinite() {
        assert!(ScalingFamily::Pol.eval(1e300, 5.0).unwrap().is_infinite());
    }

    #[test]
    fn log_vs_int1_has_decreasing_tail() {
        let q = idealized_q_sequence(2, 4, 4).unwrap();
        let t = ordering_table(
            ScalingFamily::Ln,
            3.0,
            ScalingFamily::Int1 { r: 4, q1: 2 },
            0.5,
            &q[1..],
        )
        .unwrap();
        assert!(t.tail_is_decreasing());
        assert!(!t.strictly_decreasing());
    }

    #[test]
    fn csv_marks_overflow() {
        let grid = [Magnitude::from_ln(1e4)];
        let t = ordering_table(ScalingFamily::Pol, 1.0, ScalingFamily::Ln, 1.0, &grid).unwrap();
        let csv = t.to_csv("");
        assert!(csv.lines().nth(1).unwrap().ends_with(",inf"));
    }

    proptest! {
        #[test]
        fn gamma_r_roundtrip(lx in 0.0f64..13.8, r in 2u32..9) {
            let x = lx.exp();
            let y = ln_gamma_r(x, r).unwrap();
            let back = gamma_r_inv_ln(y, r).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x.max(1.0));
        }

        #[test]
        fn gamma_r_is_increasing(a in 1.0f64..1e5, b in 1.0f64..1e5, r in 2u32..9) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9 * hi);
            prop_assert!(ln_gamma_r(lo, r).unwrap() < ln_gamma_r(hi, r).unwrap());
        }

        #[test]
        fn families_monotone_in_t(lm in 1.0f64..1e5, t in 0.0f64..4.0) {
            for fam in [ScalingFamily::Pol, ScalingFamily::Ln,
                        ScalingFamily::Int1 { r: 4, q1: 2 }, ScalingFamily::Int2 { r: 4, q1: 2 }] {
                let a = fam.eval_ln(lm, t).unwrap();
                let b = fam.eval_ln(lm, t + 0.5).unwrap();
                prop_assert!(b >= a);
            }
        }
    }
}
