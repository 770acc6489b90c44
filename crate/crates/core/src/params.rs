//! Stage parameters of an approximation-by-conjugation chain.
//!
//! Every integer is exact (`BigUint`/`BigInt`) and every rational is a
//! `BigRational`; nothing in here touches floating point.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{AbcError, Result};

/// Largest number of decimal digits allowed for any `q_n` produced by a chain.
pub const MAX_DIGITS: u64 = 10_000_000;

/// Exact parameters of a single stage `n` of the chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageParams {
    pub n: u32,
    pub p: BigInt,
    pub q: BigUint,
    pub k: BigUint,
    pub l: BigUint,
    pub l_prime: BigUint,
    pub alpha: BigRational,
    pub eps: BigRational,
    pub m_smooth: u32,
}

impl StageParams {
    /// `k_n * l_n`.
    pub fn kl(&self) -> BigUint {
        &self.k * &self.l
    }

    /// `q_{n+1} = k_n l_n q_n^2`.
    pub fn next_q(&self) -> BigUint {
        self.kl() * &self.q * &self.q
    }

    /// `p_{n+1} = k_n l_n q_n p_n + 1`, the numerator that keeps
    /// `alpha_{n+1} = alpha_n + 1/(k_n l_n q_n^2)` in lowest terms.
    pub fn next_p(&self) -> BigInt {
        BigInt::from(self.kl() * &self.q) * &self.p + BigInt::one()
    }

    /// `alpha_{n+1}` computed from the increment `1/(k_n l_n q_n^2)`.
    pub fn next_alpha(&self) -> BigRational {
        &self.alpha + BigRational::new(BigInt::one(), BigInt::from(self.next_q()))
    }

    pub fn q_u64(&self) -> Option<u64> {
        self.q.to_u64()
    }

    pub fn eps_f64(&self) -> f64 {
        ratio_to_f64(&self.eps)
    }

    /// Number of decimal digits of `q_n`.
    pub fn q_digits(&self) -> u64 {
        decimal_digits(&self.q)
    }
}

/// How a stage chooses `k_n l_n` (hence `q_{n+1}`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// `q_{n+1} = q_n^e`, i.e. `k_n l_n = q_n^(e-2)`.
    Exponent(u32),
    /// `k_n l_n` given directly.
    Factor(String),
}

/// How a stage chooses `l'_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LPrime {
    /// `l'_n = q_n^e`.
    Exponent(u32),
    Value(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomStage {
    pub growth: Growth,
    pub l_prime: LPrime,
}

/// Growth regime of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// `q_{n+1} = q_n^(n^r)`.
    Intermediate { r: u32 },
    /// `q_{n+1} = q_n^(q_n)`.
    Log,
    /// `q_{n+1} = q_n^(K^4)`.
    Poly { k: u32 },
    /// Explicit per-stage schedule; entry `i` describes stage `i + 1`.
    Custom { stages: Vec<CustomStage> },
}

/// Rule producing `eps_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EpsRule {
    /// `1/n^4`, or `1/8` when relaxed.
    #[default]
    Auto,
    Fixed(String),
    /// Entry `i` is `eps_{i+1}`; missing entries fall back to `Auto`.
    Explicit(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamProfile {
    pub regime: Regime,
    pub q1: u64,
    #[serde(default)]
    pub eps_rule: EpsRule,
    #[serde(default)]
    pub relax_eps: bool,
}

impl ParamProfile {
    pub fn new(regime: Regime, q1: u64) -> Self {
        Self { regime, q1, eps_rule: EpsRule::Auto, relax_eps: false }
    }

    pub fn relaxed(mut self) -> Self {
        self.relax_eps = true;
        self
    }

    /// The profile's `eps_n`.
    pub fn eps_for(&self, n: u32) -> Result<BigRational> {
        let auto = || {
            if self.relax_eps {
                BigRational::new(1.into(), 8.into())
            } else {
                BigRational::new(1.into(), BigInt::from(n).pow(4u32))
            }
        };
        match &self.eps_rule {
            EpsRule::Auto => Ok(auto()),
            EpsRule::Fixed(s) => parse_ratio(s),
            EpsRule::Explicit(list) => match list.get(n as usize - 1) {
                Some(s) => parse_ratio(s),
                None => Ok(auto()),
            },
        }
    }

    /// `(k_n l_n, l'_n)` chosen by the regime for stage `n` with denominator `q`.
    fn targets(&self, n: u32, q: &BigUint) -> Result<(BigUint, BigUint)> {
        let pow = |e: u64| -> Result<BigUint> { checked_pow(q, e) };
        match &self.regime {
            Regime::Custom { stages } => {
                let entry = stages.get(n as usize - 1).ok_or_else(|| AbcError::Infeasible {
                    stage: n,
                    constraint: "custom schedule has no entry for this stage".into(),
                })?;
                let kl = match &entry.growth {
                    Growth::Exponent(e) if *e < 2 => {
                        return Err(AbcError::Infeasible {
                            stage: n,
                            constraint: format!("k*l = q^(e-2) is not an integer for e = {e}"),
                        })
                    }
                    Growth::Exponent(e) => pow(u64::from(*e) - 2)?,
                    Growth::Factor(s) => parse_biguint(s)?,
                };
                if kl.is_zero() {
                    return Err(AbcError::Infeasible {
                        stage: n,
                        constraint: "k*l must be a positive integer".into(),
                    });
                }
                let lp = match &entry.l_prime {
                    LPrime::Exponent(e) => pow(u64::from(*e))?,
                    LPrime::Value(s) => parse_biguint(s)?,
                };
                Ok((kl, lp))
            }
            _ if n == 1 => Ok((BigUint::one(), BigUint::one())),
            Regime::Intermediate { r } => {
                let n = u64::from(n);
                let nr = n.checked_pow(*r).ok_or_else(|| too_big(n as u32))?;
                let lower = (n - 1).pow(*r).saturating_sub(1).max(n * n);
                Ok((pow(nr - 2)?, pow(lower)?))
            }
            Regime::Log => {
                let qe = q.to_u64().ok_or_else(|| too_big(n))?;
                if qe < u64::from(n) {
                    return Err(AbcError::Infeasible {
                        stage: n,
                        constraint: "l' = q^(q-n) needs q >= n".into(),
                    });
                }
                Ok((pow(qe - 2)?, pow(qe - u64::from(n))?))
            }
            Regime::Poly { k } => {
                let k4 = u64::from(*k).pow(4);
                let e = k4.checked_sub(u64::from(*k) + 3).ok_or_else(|| AbcError::Infeasible {
                    stage: n,
                    constraint: "K^4 - K - 3 must be non-negative".into(),
                })?;
                Ok((pow(k4 - 2)?, pow(e)?))
            }
        }
    }
}

fn too_big(stage: u32) -> AbcError {
    AbcError::SizeLimit { stage, digits: u64::MAX }
}

/// `q^e`, refusing results with more than [`MAX_DIGITS`] digits.
fn checked_pow(q: &BigUint, e: u64) -> Result<BigUint> {
    let digits = (q.bits() as f64) * std::f64::consts::LOG10_2 * e as f64;
    if digits > MAX_DIGITS as f64 {
        return Err(AbcError::SizeLimit { stage: 0, digits: digits as u64 });
    }
    Ok(Pow::pow(q, e))
}

pub fn decimal_digits(x: &BigUint) -> u64 {
    if x.is_zero() {
        return 1;
    }
    let approx = (x.bits() as f64 - 1.0) * std::f64::consts::LOG10_2;
    approx.floor() as u64 + 1
}

/// Seed stage: `p_1 = 1`, `q_1`, with the regime's `k_1 l_1`.
pub fn seed_stage(profile: &ParamProfile) -> Result<StageParams> {
    if profile.q1 < 2 {
        return Err(AbcError::Infeasible { stage: 1, constraint: "q_1 >= 2".into() });
    }
    let q = BigUint::from(profile.q1);
    let (kl, lp) = profile.targets(1, &q)?;
    Ok(StageParams {
        n: 1,
        p: BigInt::one(),
        alpha: BigRational::new(BigInt::one(), BigInt::from(q.clone())),
        q,
        k: BigUint::one(),
        l: kl,
        l_prime: lp,
        eps: profile.eps_for(1)?,
        m_smooth: 0,
    })
}

/// Builds stage `n + 1` from stage `n`.
///
/// `norm_hint` is an estimate of `|||H_{n+1}|||_1`; when given, `l_{n+1}` is
/// raised to at least `ceil(norm_hint) * l'_{n+1}`.
pub fn advance_stage(
    prev: &StageParams,
    profile: &ParamProfile,
    norm_hint: Option<f64>,
) -> Result<StageParams> {
    let n = prev.n + 1;
    let q = prev.next_q();
    let digits = decimal_digits(&q);
    if digits > MAX_DIGITS {
        return Err(AbcError::SizeLimit { stage: n, digits });
    }
    let p = prev.next_p();
    let alpha = prev.next_alpha();
    let (kl, l_prime) = profile.targets(n, &q).map_err(|e| e.at_stage(n))?;
    let mut l = kl;
    if let Some(h) = norm_hint {
        if !(h.is_finite() && h > 0.0) {
            return Err(AbcError::Infeasible { stage: n, constraint: "norm hint must be positive".into() });
        }
        let floor = BigUint::from(h.ceil() as u64) * &l_prime;
        if floor > l {
            l = floor;
        }
    }
    Ok(StageParams {
        n,
        p,
        q,
        k: BigUint::one(),
        l,
        l_prime,
        alpha,
        eps: profile.eps_for(n)?,
        m_smooth: n - 1,
    })
}

/// Stages `1..=n_max` of the chain generated by `profile`.
pub fn build_chain(profile: &ParamProfile, n_max: u32) -> Result<Vec<StageParams>> {
    let mut chain = vec![seed_stage(profile)?];
    while chain.len() < n_max as usize {
        let next = advance_stage(chain.last().unwrap(), profile, None)?;
        chain.push(next);
    }
    Ok(chain)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub n: u32,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub stages: Vec<StageReport>,
    /// `sum_{m=2}^{n} 1/l'_m` after each stage.
    pub partial_sums: Vec<BigRational>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures().next().is_none()
    }

    /// `(stage, check)` for every failed check.
    pub fn failures(&self) -> impl Iterator<Item = (u32, &Check)> {
        self.stages
            .iter()
            .flat_map(|s| s.checks.iter().filter(|c| !c.passed).map(move |c| (s.n, c)))
    }

    pub fn check(&self, n: u32, name: &str) -> Option<&Check> {
        self.stages.iter().find(|s| s.n == n)?.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            for c in &s.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                writeln!(f, "{mark} n={} {}: {}", s.n, c.name, c.detail)?;
            }
        }
        Ok(())
    }
}

/// Checks every constraint a chain must satisfy.
///
/// The seed stage (n = 1) only takes part in the successor and epsilon checks:
/// the growth regimes start at n = 2, so its `l'_1` is not summed.
pub fn validate_chain(chain: &[StageParams], profile: &ParamProfile) -> ValidationReport {
    let mut stages = Vec::new();
    let mut partial_sums = Vec::new();
    let mut sum = BigRational::zero();
    let one = BigRational::one();
    for (i, s) in chain.iter().enumerate() {
        let mut checks = Vec::new();
        let alpha_ok = s.alpha == BigRational::new(s.p.clone(), BigInt::from(s.q.clone()))
            && s.alpha.denom() == &BigInt::from(s.q.clone());
        checks.push(Check {
            name: "alpha_is_p_over_q",
            passed: alpha_ok,
            detail: format!("alpha = {}", ratio_string(&s.alpha)),
        });
        if i > 0 {
            let prev = &chain[i - 1];
            let ok = s.n == prev.n + 1
                && s.q == prev.next_q()
                && s.p == prev.next_p()
                && s.alpha == prev.next_alpha()
                && (&s.q % &prev.q).is_zero();
            checks.push(Check {
                name: "successor",
                passed: ok,
                detail: "q_{n+1} = k l q^2, alpha_{n+1} = alpha_n + 1/(k l q^2), q_n | q_{n+1}".into(),
            });
        }
        checks.push(Check {
            name: "l_ge_l_prime",
            passed: s.l >= s.l_prime,
            detail: format!("l = {}, l' = {}", short(&s.l), short(&s.l_prime)),
        });
        if s.n >= 2 {
            let next_q = s.next_q();
            let lpq = &s.l_prime * &s.q;
            let (passed, detail) = match &profile.regime {
                Regime::Intermediate { r } => {
                    let n2 = Pow::pow(&s.q, u64::from(s.n) * u64::from(s.n));
                    let target = u64::from(s.n).checked_pow(*r).map(|e| {
                        // q^(n^r) == q_{n+1} is checked on exponents to avoid huge powers.
                        BigUint::from(e)
                    });
                    let q_next_is_target = match target {
                        Some(e) => is_power_of(&next_q, &s.q, &e),
                        None => false,
                    };
                    (
                        s.q < n2 && n2 < lpq && lpq < next_q && q_next_is_target,
                        "q < q^(n^2) < l' q < q^(n^r) = q_{n+1}".to_string(),
                    )
                }
                _ => (s.q < lpq && lpq < next_q, "q < l' q < q_{n+1}".to_string()),
            };
            checks.push(Check { name: "ordering", passed, detail });
            if !s.l_prime.is_zero() {
                sum += BigRational::new(BigInt::one(), BigInt::from(s.l_prime.clone()));
            }
            checks.push(Check {
                name: "summability",
                passed: !s.l_prime.is_zero() && sum < one,
                detail: format!("partial sum of 1/l' = {:.6e}", ratio_to_f64(&sum)),
            });
        }
        partial_sums.push(sum.clone());
        if !profile.relax_eps {
            let bound = BigRational::new(BigInt::one(), BigInt::from(s.n).pow(4u32));
            checks.push(Check {
                name: "eps_le_inv_n4",
                passed: s.eps <= bound && s.eps > BigRational::zero(),
                detail: format!("eps = {}", ratio_string(&s.eps)),
            });
            let q = BigRational::from_integer(BigInt::from(s.q.clone()));
            let passed = s.eps > BigRational::zero() && q > s.eps.recip();
            checks.push(Check {
                name: "q_gt_inv_eps",
                passed,
                detail: format!("q = {}, 1/eps = {}", short(&s.q), ratio_string(&s.eps.recip())),
            });
            if i > 0 {
                checks.push(Check {
                    name: "eps_monotone",
                    passed: s.eps <= chain[i - 1].eps,
                    detail: "eps_n <= eps_{n-1}".into(),
                });
            }
        }
        stages.push(StageReport { n: s.n, checks });
    }
    ValidationReport { stages, partial_sums }
}

/// True iff `x == base^e`.
fn is_power_of(x: &BigUint, base: &BigUint, e: &BigUint) -> bool {
    let Some(e) = e.to_u64() else { return false };
    let expected_bits = (base.bits() as f64 - 1.0) * e as f64;
    if (x.bits() as f64) < expected_bits - 1.0 || x.bits() as f64 > (base.bits() as f64) * e as f64 + 1.0 {
        return false;
    }
    &Pow::pow(base, e) == x
}

fn short(x: &BigUint) -> String {
    let d = decimal_digits(x);
    if d <= 30 {
        x.to_string()
    } else {
        format!("<{d} digits>")
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Fallback for huge numerators/denominators: shift both to 64 significant bits.
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let nf = (n >> shift_n as usize).to_f64().unwrap_or(0.0);
    let df = (d >> shift_d as usize).to_f64().unwrap_or(1.0);
    nf / df * 2f64.powi((shift_n - shift_d) as i32)
}

/// Natural logarithm of a positive big integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x >> shift as usize).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_ratio(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || AbcError::Parse(format!("not a rational: {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

pub fn parse_biguint(s: &str) -> Result<BigUint> {
    s.trim().parse().map_err(|_| AbcError::Parse(format!("not a non-negative integer: {s:?}")))
}

#[derive(Serialize, Deserialize)]
struct StageRecord {
    n: u32,
    p: String,
    q: String,
    k: String,
    l: String,
    l_prime: String,
    alpha: String,
    eps: String,
    m_smooth: u32,
}

/// Serializes a chain as a JSON array of stages.
pub fn chain_to_json(chain: &[StageParams]) -> String {
    let recs: Vec<StageRecord> = chain
        .iter()
        .map(|s| StageRecord {
            n: s.n,
            p: s.p.to_string(),
            q: s.q.to_string(),
            k: s.k.to_string(),
            l: s.l.to_string(),
            l_prime: s.l_prime.to_string(),
            alpha: ratio_string(&s.alpha),
            eps: ratio_string(&s.eps),
            m_smooth: s.m_smooth,
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&recs).expect("chain serializes");
    out.push('\n');
    out
}

pub fn chain_from_json(text: &str) -> Result<Vec<StageParams>> {
    let recs: Vec<StageRecord> =
        serde_json::from_str(text).map_err(|e| AbcError::Parse(e.to_string()))?;
    recs.into_iter()
        .map(|r| {
            let p: BigInt = r.p.parse().map_err(|_| AbcError::Parse(format!("bad p {:?}", r.p)))?;
            Ok(StageParams {
                n: r.n,
                p,
                q: parse_biguint(&r.q)?,
                k: parse_biguint(&r.k)?,
                l: parse_biguint(&r.l)?,
                l_prime: parse_biguint(&r.l_prime)?,
                alpha: parse_ratio(&r.alpha)?,
                eps: parse_ratio(&r.eps)?,
                m_smooth: r.m_smooth,
            })
        })
        .collect()
}

/// Greatest common divisor helper used by tests and callers.
pub fn gcd(a: &BigUint, b: &BigUint) -> BigUint {
    a.gcd(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn custom(entries: &[(u32, u32)]) -> Regime {
        Regime::Custom {
            stages: entries
                .iter()
                .map(|&(g, lp)| CustomStage { growth: Growth::Exponent(g), l_prime: LPrime::Exponent(lp) })
                .collect(),
        }
    }

    #[test]
    fn seed_successor_matches_hand_values() {
        let prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2);
        let chain = build_chain(&prof, 2).unwrap();
        assert_eq!(chain[1].q, big(4));
        assert_eq!(chain[1].p, BigInt::from(3));
        assert_eq!(chain[1].alpha, BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn intermediate_stage_two_growth() {
        let prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2);
        let chain = build_chain(&prof, 3).unwrap();
        assert_eq!(chain[1].l, Pow::pow(big(4), 14u32));
        assert_eq!(chain[1].k, big(1));
        assert_eq!(chain[2].q, Pow::pow(big(4), 16u32));
        // raised lower bound: exponent max((n-1)^r - 1, n^2) = 4 at n = 2
        assert_eq!(chain[1].l_prime, Pow::pow(big(4), 4u32));
    }

    #[test]
    fn norm_hint_raises_l() {
        let prof = ParamProfile::new(
            Regime::Custom {
                stages: vec![
                    CustomStage { growth: Growth::Exponent(2), l_prime: LPrime::Value("1".into()) },
                    CustomStage { growth: Growth::Exponent(2), l_prime: LPrime::Value("10".into()) },
                ],
            },
            4,
        );
        let s1 = seed_stage(&prof).unwrap();
        let s2 = advance_stage(&s1, &prof, Some(7.3)).unwrap();
        assert!(s2.l >= big(80));
    }

    #[test]
    fn non_integer_kl_is_rejected() {
        let prof = ParamProfile::new(custom(&[(1, 0)]), 4);
        assert!(matches!(seed_stage(&prof), Err(AbcError::Infeasible { .. })));
    }

    #[test]
    fn intermediate_chain_passes_when_relaxed() {
        let prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2).relaxed();
        let chain = build_chain(&prof, 3).unwrap();
        let rep = validate_chain(&chain, &prof);
        assert!(rep.ok(), "{rep}");
    }

    #[test]
    fn intermediate_chain_strict_eps_only_fails_small_q2() {
        let prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2);
        let chain = build_chain(&prof, 3).unwrap();
        let rep = validate_chain(&chain, &prof);
        let fails: Vec<_> = rep.failures().map(|(n, c)| (n, c.name)).collect();
        assert_eq!(fails, vec![(2, "q_gt_inv_eps")]);
    }

    #[test]
    fn unit_l_prime_breaks_summability() {
        let prof = ParamProfile::new(custom(&[(2, 0), (3, 0), (3, 1)]), 4).relaxed();
        let chain = build_chain(&prof, 3).unwrap();
        let rep = validate_chain(&chain, &prof);
        assert!(!rep.check(2, "summability").unwrap().passed);
    }

    #[test]
    fn bad_eps_is_flagged_at_its_stage() {
        let mut prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2);
        prof.eps_rule = EpsRule::Explicit(vec!["1".into(), "1/16".into(), "1/2".into()]);
        let chain = build_chain(&prof, 3).unwrap();
        let rep = validate_chain(&chain, &prof);
        assert!(!rep.check(3, "eps_le_inv_n4").unwrap().passed);
        assert!(!rep.check(3, "eps_monotone").unwrap().passed);
    }

    #[test]
    fn log_and_poly_chains_validate() {
        for (regime, n) in [(Regime::Log, 2), (Regime::Poly { k: 2 }, 3)] {
            let prof = ParamProfile::new(regime, 4).relaxed();
            let chain = build_chain(&prof, n).unwrap();
            let rep = validate_chain(&chain, &prof);
            assert!(rep.ok(), "{rep}");
        }
    }

    #[test]
    fn oversized_chain_is_refused() {
        let prof = ParamProfile::new(Regime::Log, 4);
        assert!(matches!(build_chain(&prof, 3), Err(AbcError::SizeLimit { .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let prof = ParamProfile::new(Regime::Intermediate { r: 4 }, 2).relaxed();
        let chain = build_chain(&prof, 3).unwrap();
        let text = chain_to_json(&chain);
        let back = chain_from_json(&text).unwrap();
        assert_eq!(back, chain);
        assert_eq!(chain_to_json(&back), text);
    }

    #[test]
    fn ln_of_big_power_of_two() {
        let x = BigUint::one() << 20736usize;
        let got = ln_biguint(&x);
        let want = 20736.0 * std::f64::consts::LN_2;
        assert!((got - want).abs() / want < 1e-15);
    }

    proptest! {
        #[test]
        fn custom_chains_keep_alpha_in_lowest_terms(
            q1 in 2u64..9,
            gs in proptest::collection::vec(2u32..4, 3),
        ) {
            let entries: Vec<(u32, u32)> = gs.iter().map(|&g| (g, 1)).collect();
            let prof = ParamProfile::new(custom(&entries), q1).relaxed();
            let chain = build_chain(&prof, 3).unwrap();
            for w in chain.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                prop_assert_eq!(&b.alpha - &a.alpha,
                    BigRational::new(BigInt::one(), BigInt::from(a.kl() * &a.q * &a.q)));
                prop_assert_eq!(b.alpha.denom(), &BigInt::from(b.q.clone()));
                prop_assert!((&b.q % &a.q).is_zero());
            }
        }
    }
}
