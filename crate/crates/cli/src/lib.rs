//! Batch experiment driver for `abclab`.
//!
//! Every subcommand reads an [`ExperimentConfig`](config::ExperimentConfig),
//! validates it before computing anything, and writes plain-text outputs whose
//! headers carry the schema version, the config hash and the config itself.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | file system error |
//! | 2 | parameter validation failed |
//! | 3 | evaluation budget exceeded |
//! | 4 | construction error |
//! | 5 | bad configuration or input file |
//! | 6 | word selection or verification failed |
//! | 7 | numerical error |

use std::fmt;
use std::path::Path;

use abclab::AbcError;

pub mod commands;
pub mod config;
pub mod output;
pub mod plotdata;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const CONSTRUCTION: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const SELECTION: i32 = 6;
    pub const NUMERICAL: i32 = 7;

    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Self::CONFIG, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Self::IO, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<AbcError> for CliError {
    fn from(e: AbcError) -> Self {
        let code = match &e {
            AbcError::Construction(_) => Self::CONSTRUCTION,
            AbcError::Budget { .. } => Self::BUDGET,
            AbcError::Selection { .. } => Self::SELECTION,
            AbcError::Numerical(_) => Self::NUMERICAL,
            AbcError::Infeasible { .. }
            | AbcError::SizeLimit { .. }
            | AbcError::Domain(_)
            | AbcError::Invalid(_)
            | AbcError::Parse(_) => Self::CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

/// Sizes the global rayon pool; `None` keeps the rayon default.
pub fn init_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::config("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}
