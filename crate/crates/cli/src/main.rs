use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abclab_cli::commands::{
    cmd_describe, cmd_norms, cmd_params, cmd_run, cmd_words, cmd_words_verify, Outcome, WordsRequest,
};
use abclab_cli::config::{ExperimentConfig, Overrides};
use abclab_cli::plotdata::{cmd_plotdata, CurveFilter};
use abclab_cli::{init_threads, CliError};

/// Finite-stage approximation-by-conjugation experiments.
///
/// Settings come from command-line flags, then the JSON config file, then
/// built-in defaults, in that order of precedence.
#[derive(Parser)]
#[command(name = "abclab", version)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "ABCLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Stage range, `A..B` or a single stage.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated radii, rationals or decimals.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<String>>,
    /// Comma-separated horizons: integers, q_n, q_next or lprime_q.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_samples: Option<usize>,
    /// Largest allowed number of orbit evaluations.
    #[arg(long)]
    budget: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let ov = Overrides {
            stages: self.stages.clone(),
            grid: self.grid,
            eps: self.eps.clone(),
            horizons: self.horizons.clone(),
            seed: self.seed,
            max_samples: self.max_samples,
            budget: self.budget,
            output_dir: self.out.clone(),
        };
        ExperimentConfig::load(self.config.as_deref(), &ov)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build and validate the parameter chain.
    Params {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Re-validate a chain file instead of building one.
        #[arg(long)]
        chain: Option<PathBuf>,
    },
    /// Measure separated, cover, Hamming and witness counts.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run even if the evaluation estimate exceeds the budget.
        #[arg(long)]
        allow_over_budget: bool,
    },
    /// Turn count reports into per-curve plot data.
    Plotdata {
        /// `counts.csv` files written by `run`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, short, default_value = "plots")]
        out: PathBuf,
        /// Keep only these families (e.g. `pol`, `int1_r4`).
        #[arg(long, value_delimiter = ',')]
        family: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Keep only these count kinds.
        #[arg(long, value_delimiter = ',')]
        kind: Vec<String>,
    },
    /// Select or verify separated balanced words.
    Words {
        #[arg(long, default_value_t = 4)]
        alphabet: u32,
        #[arg(long, default_value_t = 2000)]
        length: usize,
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value = "1/16")]
        eps: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        retries: u32,
        /// Write the selection here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Verify an existing selection file instead.
        #[arg(long, conflicts_with = "out")]
        verify: Option<PathBuf>,
    },
    /// Estimate C^k norms of the conjugacies.
    Norms {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print stage parameters and map structure.
    Describe {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    init_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Params { cfg, chain } => cmd_params(&cfg.load()?, chain.as_deref()),
        Cmd::Run { cfg, allow_over_budget } => cmd_run(&cfg.load()?, allow_over_budget),
        Cmd::Plotdata { reports, out, family, t, kind } => {
            cmd_plotdata(&reports, &out, &CurveFilter { families: family, t, kinds: kind })
        }
        Cmd::Words { alphabet, length, count, eps, seed, retries, out, verify } => match verify {
            Some(p) => cmd_words_verify(&p),
            None => cmd_words(&WordsRequest { alphabet, length, count, eps, seed, retries }, out.as_deref()),
        },
        Cmd::Norms { cfg } => cmd_norms(&cfg.load()?),
        Cmd::Describe { cfg } => cmd_describe(&cfg.load()?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.status != 0 {
                eprintln!("error: checks failed (exit {})", out.status);
            }
            ExitCode::from(u8::try_from(out.status).unwrap_or(1))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.code).unwrap_or(1))
        }
    }
}
