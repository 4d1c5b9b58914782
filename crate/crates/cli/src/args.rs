use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Layer;
use crate::sweep::Preset;

#[derive(Debug, Parser)]
#[command(name = "ewsn", version, about = "Retrieval times in energy-harvesting sensor networks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Each can also come from an
/// `EWSN_*` environment variable or from the `--config` TOML file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Number of sensors N
    #[arg(long, global = true, env = "EWSN_N")]
    pub n: Option<usize>,
    /// Battery capacity B
    #[arg(long, global = true, env = "EWSN_B")]
    pub b: Option<usize>,
    /// Per-sensor harvest rate λ_e
    #[arg(long = "lambda-e", global = true, env = "EWSN_LAMBDA_E")]
    pub lambda_e: Option<f64>,
    /// Network-wide broadcast rate μ
    #[arg(long, global = true, env = "EWSN_MU")]
    pub mu: Option<f64>,
    /// Client arrival rate λ_a; `simulate` then injects at Poisson arrivals
    #[arg(long = "lambda-a", global = true, env = "EWSN_LAMBDA_A")]
    pub lambda_a: Option<f64>,
    /// Measurements the client needs
    #[arg(long, global = true, env = "EWSN_S")]
    pub s: Option<usize>,
    /// Measurement noise variance (with --threshold, replaces --s)
    #[arg(long, global = true, env = "EWSN_SIGMA2")]
    pub sigma2: Option<f64>,
    /// Variance threshold H for a reliable estimate
    #[arg(long, global = true, env = "EWSN_THRESHOLD")]
    pub threshold: Option<f64>,
    /// closed | quadrature | matrix (sweep: comma list, may add simulate)
    #[arg(long, global = true, env = "EWSN_METHOD")]
    pub method: Option<String>,
    /// Simulation replications
    #[arg(long, global = true, env = "EWSN_REPS")]
    pub reps: Option<usize>,
    /// Simulation seed
    #[arg(long, global = true, env = "EWSN_SEED")]
    pub seed: Option<u64>,
    /// Simulation warm-up time before the client arrives
    #[arg(long, global = true, env = "EWSN_WARMUP")]
    pub warmup: Option<f64>,
    /// Output file for CSV data
    #[arg(long, global = true, env = "EWSN_OUT")]
    pub out: Option<PathBuf>,
    /// TOML file with defaults for any of the settings above
    #[arg(long, global = true, env = "EWSN_CONFIG")]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    pub fn layer(&self) -> Layer {
        Layer {
            n: self.n,
            b: self.b,
            lambda_e: self.lambda_e,
            mu: self.mu,
            lambda_a: self.lambda_a,
            s: self.s,
            sigma2: self.sigma2,
            threshold: self.threshold,
            method: self.method.clone(),
            reps: self.reps,
            seed: self.seed,
            warmup: self.warmup,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Expected retrieval time E[W_s]
    Expected,
    /// Tabulate the CDF of W_s on an even grid
    Cdf {
        /// Grid end (default: 5 E[W_s], rounded up)
        #[arg(long = "t-max", env = "EWSN_T_MAX")]
        t_max: Option<f64>,
        /// Number of grid intervals
        #[arg(long, default_value_t = 100, env = "EWSN_STEPS")]
        steps: usize,
    },
    /// Monte Carlo estimate of W_s; JSON summary on stdout
    Simulate,
    /// Evaluate E[W_s] over a parameter range
    Sweep {
        #[arg(long, value_enum, conflicts_with_all = ["param", "values"])]
        preset: Option<Preset>,
        /// n | b | lambda_e | mu | s
        #[arg(long, requires = "values")]
        param: Option<String>,
        /// Comma-separated, strictly increasing
        #[arg(long, value_delimiter = ',', requires = "param", allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Run the cross-check suite; exits 1 if any check fails
    Validate {
        /// Analytic checks only
        #[arg(long)]
        quick: bool,
        /// Evaluate the closed form with the wrong alternating sign
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
}
