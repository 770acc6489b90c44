use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbcError {
    #[error("stage {stage}: infeasible target ({constraint})")]
    Infeasible { stage: u32, constraint: String },
    #[error("stage {stage}: result would have {digits} decimal digits")]
    SizeLimit { stage: u32, digits: u64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("selection failed after {rounds} rounds: {reason}")]
    Selection { rounds: u32, reason: String },
    #[error("budget exceeded: {estimated} orbit evaluations > {limit}")]
    Budget { estimated: u128, limit: u128 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl AbcError {
    pub(crate) fn at_stage(self, n: u32) -> Self {
        match self {
            AbcError::SizeLimit { digits, .. } => AbcError::SizeLimit { stage: n, digits },
            AbcError::Infeasible { constraint, .. } => AbcError::Infeasible { stage: n, constraint },
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, AbcError>;
