//! Experiment configuration: JSON file, defaults and flag overrides.
//!
//! Precedence is flags > file > defaults. Missing fields in the file take
//! their default; unknown fields are rejected.

use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use abclab::complexity::Partition;
use abclab::diffeo::UntwistedVariant;
use abclab::params::{parse_ratio, ratio_to_f64, CustomStage, Growth, LPrime, StageParams};
use abclab::{Construction, ParamProfile, Regime, ScalingFamily};

use crate::CliError;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

/// Rejects schema versions with an unknown major number.
pub fn check_schema(version: &str) -> Result<(), CliError> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(SCHEMA_MAJOR) => Ok(()),
        _ => Err(CliError::config(format!(
            "unsupported schema_version {version:?} (this build reads major version {SCHEMA_MAJOR})"
        ))),
    }
}

/// Inclusive stage range; written `"2..3"` on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRange {
    pub from: u32,
    pub to: u32,
}

impl StageRange {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::config(format!("bad stage range {s:?} (expected A..B or N)"));
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
            None => (s.trim(), s.trim()),
        };
        let from = a.parse().map_err(|_| bad())?;
        let to = b.parse().map_err(|_| bad())?;
        Ok(Self { from, to })
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.from..=self.to
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HammingSpec {
    /// Radii, as rationals or decimals.
    pub eps: Vec<String>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub k: Vec<u32>,
    pub grid: usize,
    pub fd_step: f64,
}

impl Default for NormSpec {
    fn default() -> Self {
        Self { k: vec![0, 1], grid: 64, fd_step: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: String,
    pub construction: Construction,
    pub profile: ParamProfile,
    pub stages: StageRange,
    /// Bowen candidates are the cell centres of a `grid x grid` grid.
    pub grid: usize,
    /// Integers, or `q_n`, `q_next` (the period `q_{n+1}`), `lprime_q` (`l'_n q_n`).
    pub horizons: Vec<String>,
    pub eps: Vec<String>,
    pub families: Vec<ScalingFamily>,
    pub t: Vec<f64>,
    pub partition: Partition,
    pub hamming: Option<HammingSpec>,
    /// Orbit samples per point; longer horizons are strided.
    pub max_samples: usize,
    /// Largest allowed number of orbit evaluations.
    pub budget: u64,
    pub seed: u64,
    pub norms: NormSpec,
    /// Not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// `q_1 = 2, q_2 = 8, q_3 = 4096, q_4 = 4096^3` with `eps_n = 1/8`.
pub fn desk_profile() -> ParamProfile {
    let stages = [3, 4, 3]
        .into_iter()
        .map(|e| CustomStage { growth: Growth::Exponent(e), l_prime: LPrime::Exponent(1) })
        .collect();
    ParamProfile::new(Regime::Custom { stages }, 2).relaxed()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            construction: Construction::Untwisted { variant: UntwistedVariant::BlockWidth },
            profile: desk_profile(),
            stages: StageRange { from: 2, to: 2 },
            grid: 32,
            horizons: vec!["1".into(), "q_n".into(), "q_next".into()],
            eps: vec!["1/8".into()],
            families: vec![ScalingFamily::Pol, ScalingFamily::Ln, ScalingFamily::Int1 { r: 4, q1: 2 }],
            t: vec![0.5, 1.0, 2.0],
            partition: Partition::grid(4, 4),
            hamming: None,
            max_samples: 4096,
            budget: 1_000_000_000,
            seed: 1,
            norms: NormSpec::default(),
            output_dir: None,
        }
    }
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub stages: Option<String>,
    pub grid: Option<usize>,
    pub eps: Option<Vec<String>>,
    pub horizons: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub max_samples: Option<usize>,
    pub budget: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// A horizon request before the stage is known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HorizonSpec {
    Fixed(BigUint),
    Qn,
    QNext,
    LPrimeQ,
}

impl HorizonSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "q_n" => Ok(Self::Qn),
            "q_next" => Ok(Self::QNext),
            "lprime_q" => Ok(Self::LPrimeQ),
            v => match v.parse::<BigUint>() {
                Ok(h) if h > BigUint::ZERO => Ok(Self::Fixed(h)),
                _ => Err(CliError::config(format!(
                    "bad horizon {s:?} (expected a positive integer, q_n, q_next or lprime_q)"
                ))),
            },
        }
    }

    pub fn resolve(&self, st: &StageParams) -> BigUint {
        match self {
            Self::Fixed(h) => h.clone(),
            Self::Qn => st.q.clone(),
            Self::QNext => st.next_q(),
            Self::LPrimeQ => &st.l_prime * &st.q,
        }
    }
}

/// `"1/8"` or `"0.125"`.
pub fn parse_real(s: &str) -> Result<f64, CliError> {
    let v = if s.contains('/') {
        parse_ratio(s).map(|r| ratio_to_f64(&r)).map_err(|e| CliError::config(e.to_string()))?
    } else {
        s.trim().parse::<f64>().map_err(|_| CliError::config(format!("not a number: {s:?}")))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("not a finite number: {s:?}")))
    }
}

impl ExperimentConfig {
    /// Defaults, then the file (if any), then the flags.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let raw: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                if let Some(v) = raw.get("schema_version") {
                    let v = v.as_str().ok_or_else(|| CliError::config("schema_version must be a string"))?;
                    check_schema(v)?;
                }
                serde_json::from_value::<Self>(raw).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        cfg.apply(ov)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) -> Result<(), CliError> {
        if let Some(s) = &ov.stages {
            self.stages = StageRange::parse(s)?;
        }
        if let Some(g) = ov.grid {
            self.grid = g;
        }
        if let Some(e) = &ov.eps {
            self.eps = e.clone();
        }
        if let Some(h) = &ov.horizons {
            self.horizons = h.clone();
        }
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(m) = ov.max_samples {
            self.max_samples = m;
        }
        if let Some(b) = ov.budget {
            self.budget = b;
        }
        if let Some(o) = &ov.output_dir {
            self.output_dir = Some(o.clone());
        }
        Ok(())
    }

    /// Checks every field; nothing is computed before this passes.
    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(&self.schema_version)?;
        let bad = |m: String| Err(CliError::config(m));
        if self.stages.from < 2 || self.stages.to < self.stages.from {
            return bad(format!("stage range {}..{} must satisfy 2 <= from <= to", self.stages.from, self.stages.to));
        }
        if self.stages.to > 64 {
            return bad(format!("stage {} is beyond any representable chain", self.stages.to));
        }
        if let Regime::Custom { stages } = &self.profile.regime {
            if (stages.len() as u32) < self.stages.to {
                return bad(format!("custom profile has {} stages, range needs {}", stages.len(), self.stages.to));
            }
        }
        if self.profile.q1 < 2 {
            return bad(format!("q1 = {} must be at least 2", self.profile.q1));
        }
        if self.grid == 0 {
            return bad("grid must be positive".into());
        }
        if self.max_samples == 0 {
            return bad("max_samples must be positive".into());
        }
        if self.horizons.is_empty() {
            return bad("at least one horizon is required".into());
        }
        self.horizon_specs()?;
        let eps = self.eps_values()?;
        if eps.is_empty() {
            return bad("at least one eps is required".into());
        }
        for e in eps {
            if !(e > 0.0) {
                return bad(format!("eps = {e} must be positive"));
            }
            if e <= 2.0 / self.grid as f64 {
                return bad(format!("grid {} too coarse for eps = {e} (need eps > 2/grid)", self.grid));
            }
        }
        for &t in &self.t {
            if !(t >= 0.0) || !t.is_finite() {
                return bad(format!("t = {t} must be a non-negative number"));
            }
        }
        for f in &self.families {
            f.eval_ln(2.0, 1.0).map_err(|e| CliError::config(format!("family {}: {e}", f.name())))?;
        }
        self.partition.check().map_err(|e| CliError::config(format!("partition: {e}")))?;
        if let Some(h) = &self.hamming {
            for e in self.hamming_eps()? {
                if !(e > 0.0 && e < 1.0) {
                    return bad(format!("hamming eps = {e} must lie in (0, 1)"));
                }
                if (h.samples as f64) < 100.0 / e {
                    return bad(format!("hamming samples {} below 100/eps = {}", h.samples, 100.0 / e));
                }
            }
        }
        if self.norms.grid == 0 || !(self.norms.fd_step > 0.0) || self.norms.k.iter().any(|&k| k > 2) {
            return bad("norms need grid > 0, fd_step > 0 and k in 0..=2".into());
        }
        if let Construction::WeakMixing { words, .. } = &self.construction {
            if words.alphabet < 2 || words.word_len == 0 || !(words.eps > 0.0 && words.eps < 1.0) {
                return bad("weak-mixing words need alphabet >= 2, word_len > 0 and eps in (0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn horizon_specs(&self) -> Result<Vec<HorizonSpec>, CliError> {
        self.horizons.iter().map(|h| HorizonSpec::parse(h)).collect()
    }

    pub fn eps_values(&self) -> Result<Vec<f64>, CliError> {
        self.eps.iter().map(|e| parse_real(e)).collect()
    }

    pub fn hamming_eps(&self) -> Result<Vec<f64>, CliError> {
        match &self.hamming {
            Some(h) => h.eps.iter().map(|e| parse_real(e)).collect(),
            None => Ok(Vec::new()),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The config as echoed into output headers (without the output directory).
    pub fn echo(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`ExperimentConfig::echo`], lower-case hex.
    pub fn hash(&self) -> String {
        sha256_hex(self.echo().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn flags_override_file_values() {
        let mut c = ExperimentConfig { grid: 16, ..Default::default() };
        c.apply(&Overrides { grid: Some(48), stages: Some("2..3".into()), ..Default::default() }).unwrap();
        assert_eq!(c.grid, 48);
        assert_eq!(c.stages, StageRange { from: 2, to: 3 });
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output_dir: Some("elsewhere".into()), ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig { seed: 2, ..Default::default() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_round_trips_through_json() {
        let a = ExperimentConfig::default();
        let b: ExperimentConfig = serde_json::from_str(&a.echo()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = [
            ExperimentConfig { grid: 8, ..Default::default() },
            ExperimentConfig { eps: vec!["0".into()], ..Default::default() },
            ExperimentConfig { horizons: vec!["q_m".into()], ..Default::default() },
            ExperimentConfig { stages: StageRange { from: 1, to: 2 }, ..Default::default() },
            ExperimentConfig { stages: StageRange { from: 2, to: 4 }, ..Default::default() },
            ExperimentConfig { schema_version: "2.0".into(), ..Default::default() },
            ExperimentConfig { t: vec![-1.0], ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{:?}", c.echo());
        }
    }

    #[test]
    fn parses_ranges_reals_and_horizons() {
        assert_eq!(StageRange::parse("3").unwrap(), StageRange { from: 3, to: 3 });
        assert_eq!(StageRange::parse("2..=4").unwrap(), StageRange { from: 2, to: 4 });
        assert_eq!(parse_real("1/8").unwrap(), 0.125);
        assert_eq!(parse_real("0.2").unwrap(), 0.2);
        assert!(parse_real("x").is_err());
        assert_eq!(HorizonSpec::parse("64").unwrap(), HorizonSpec::Fixed(64u32.into()));
        assert!(HorizonSpec::parse("0").is_err());
    }
}
