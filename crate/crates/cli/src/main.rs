//! `lll`: runs the prior-accuracy sweep, the tracking study, the gradient
//! checks and the conjugacy demonstrations.
//!
//! Exit status is 0 on success, 2 for an invalid configuration and 1 for any
//! other failure; failures are reported as one JSON object on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable consulted when `--out` is not given.
pub const OUT_DIR_ENV: &str = "LLL_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "lll", version, about = "Linearized-likelihood extended target tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One-shot comparison against the importance-sampling reference over an (α, δ) grid.
    Sweep(SweepArgs),
    /// Single-target tracking Monte Carlo.
    Track(TrackArgs),
    /// Finite-difference gradient and tangency checks.
    Gradcheck(GradcheckArgs),
    /// Trigonometric and inverse-gamma conjugacy demonstrations.
    Conjugacy(ConjugacyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $LLL_OUT_DIR, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; affects wall-clock time only.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated methods, e.g. `ffk,ull`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Monte-Carlo runs per grid cell.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Importance samples per run.
    #[arg(long)]
    pub oracle_samples: Option<usize>,
    /// Number of α grid points.
    #[arg(long)]
    pub alpha_count: Option<usize>,
    /// Number of δ grid points.
    #[arg(long)]
    pub delta_count: Option<usize>,
    /// Isotropic measurement-noise standard deviation, `R = σ²I`.
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated methods, e.g. `ffk,ull`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Monte-Carlo runs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Scans per run.
    #[arg(long)]
    pub scans: Option<usize>,
    /// Replace per-run errors above this value by it.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Write zeros in the cycle-time column so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed of the random test instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to `gradcheck.json` in this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConjugacyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Measurement of the trigonometric example.
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub y: f64,
    /// Inverse-gamma prior shape.
    #[arg(long, default_value_t = 3.0)]
    pub shape: f64,
    /// Inverse-gamma prior scale.
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    /// Noise variance of the inverse-gamma example.
    #[arg(long, default_value_t = 1.0)]
    pub noise_var: f64,
    /// Measurement of the inverse-gamma example.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub igamma_y: f64,
    /// Linearize at the prior mean β/(α−1) instead of α/β.
    #[arg(long)]
    pub prior_mean_nominal: bool,
    /// Grid points of the density tables.
    #[arg(long, default_value_t = 2049)]
    pub points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => commands::cmd_sweep(&a),
        Command::Track(a) => commands::cmd_track(&a),
        Command::Gradcheck(a) => commands::cmd_gradcheck(&a),
        Command::Conjugacy(a) => commands::cmd_conjugacy(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
