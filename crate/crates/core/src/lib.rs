//! Smooth area-preserving torus diffeomorphisms built by approximation by
//! conjugation, together with tools to estimate their slow entropy.
//!
//! * [`params`]: exact stage parameters `p_n, q_n, k_n, l_n, l'_n, eps_n`.
//! * [`scaling`]: scaling families `a_m(t)` and ordering tables.
//! * [`diffeo`]: the conjugating maps `h_n`, `H_n` and orbits of `T_n`.
//! * [`words`]: random word selection for the weak-mixing construction.
//! * [`complexity`]: Bowen and Hamming covering counts.
//! * [`normest`]: finite-difference `C^k` norm estimates.

pub mod complexity;
pub mod diffeo;
pub mod error;
pub mod normest;
pub mod params;
pub mod report;
pub mod scaling;
pub mod words;

pub use complexity::{BowenConfig, ComplexityReport, Partition};
pub use diffeo::{AbCSystem, Construction, MapNode, Sampling, TorusPoint};
pub use error::{AbcError, Result};
pub use params::{ParamProfile, Regime, StageParams};
pub use scaling::{Magnitude, ScalingFamily};
pub use words::{Selection, Word};
