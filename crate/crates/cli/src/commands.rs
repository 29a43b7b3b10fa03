use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use lll_core::demos;
use lll_core::diagnostics;
use lll_core::linearize::{IGammaParams, Nominal};
use lll_core::oracle::RngStream;
use lll_core::randmat::Method;
use lll_core::sim::output::{write_sweep_csv, write_track_csv};
use lll_core::sim::{run_sweep, run_track, SweepConfig, TrackConfig};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{CommonArgs, ConjugacyArgs, GradcheckArgs, SweepArgs, TrackArgs, OUT_DIR_ENV};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration; exit status 2.
    Config(String),
    /// Anything failing after the configuration was accepted; exit status 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Errors raised while validating a configuration are configuration errors.
fn from_setup(e: lll_core::Error) -> CliError {
    use lll_core::Error as E;
    match e {
        E::Config(_) | E::InvalidParameter(_) | E::MeanUndefined { .. } => CliError::Config(e.to_string()),
        other => runtime(other),
    }
}

type CliResult = Result<ExitCode, CliError>;

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    let methods = names
        .iter()
        .map(|s| s.parse::<Method>())
        .collect::<lll_core::Result<Vec<_>>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if methods.is_empty() {
        return Err(CliError::Config("no methods selected".into()));
    }
    Ok(methods)
}

fn out_dir(out: Option<&PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out
        .cloned()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn workers(common: &CommonArgs) -> usize {
    common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Records the effective configuration with its hash; contains nothing that
/// varies between identical invocations.
fn write_manifest(dir: &Path, command: &str, config: &Value, seed: u64, outputs: &[&str]) -> Result<(), CliError> {
    let canonical = serde_json::to_string(config).map_err(runtime)?;
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "rng": RngStream::ALGORITHM,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "config": config,
        "outputs": outputs,
    });
    let mut w = create(&dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(runtime)
}

/// Prints to stdout; a closed pipe is not an error.
fn print_json(v: &Value) {
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let mut cfg: SweepConfig = load_config(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(n) = args.runs {
        cfg.n_mc = n;
    }
    if let Some(n) = args.oracle_samples {
        cfg.oracle_samples = n;
    }
    if let Some(n) = args.alpha_count {
        cfg.alpha_grid.count = n;
    }
    if let Some(n) = args.delta_count {
        cfg.delta_grid.count = n;
    }
    if let Some(sd) = args.noise_std {
        let d = cfg.r.len();
        cfg.r = (0..d).map(|i| (0..d).map(|j| if i == j { sd * sd } else { 0.0 }).collect()).collect();
    }
    cfg.setup().map_err(from_setup)?;
    let dir = out_dir(args.common.out.as_ref())?;

    let table = run_sweep(&cfg, workers(&args.common)).map_err(from_setup)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    write_sweep_csv(&mut w, &table).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    write_manifest(&dir, "sweep", &to_value(&cfg)?, cfg.seed, &["sweep.csv"])?;

    let summary: Vec<Value> = cfg
        .methods
        .iter()
        .map(|&m| {
            let (e_x, e_extent) = table.grid_mean(m);
            json!({ "method": m.name(), "grid_mean_E_x": e_x, "grid_mean_E_X": e_extent })
        })
        .collect();
    print_json(&json!({ "sweep": summary, "failures": table.total_failures(), "out": dir }));
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_track(args: &TrackArgs) -> CliResult {
    let mut cfg: TrackConfig = load_config(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(n) = args.runs {
        cfg.n_mc = n;
    }
    if let Some(k) = args.scans {
        cfg.k_scans = k;
    }
    if args.clip.is_some() {
        cfg.clip = args.clip;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    cfg.setup().map_err(from_setup)?;
    let dir = out_dir(args.common.out.as_ref())?;

    let result = run_track(&cfg, workers(&args.common)).map_err(from_setup)?;
    let mut w = create(&dir.join("track.csv"))?;
    write_track_csv(&mut w, &result.records).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    write_manifest(&dir, "track", &to_value(&cfg)?, cfg.seed, &["track.csv"])?;

    let summary: Vec<Value> = result
        .summary
        .iter()
        .map(|s| {
            json!({
                "method": s.method.name(),
                "E_x": { "mean": s.e_x.0, "std": s.e_x.1 },
                "E_X": { "mean": s.e_extent.0, "std": s.e_extent.1 },
                "cycle_mean_s": s.cycle_s.0,
                "runs_ok": s.n_ok,
                "runs_failed": s.n_fail,
                "spd_repairs": s.repairs,
            })
        })
        .collect();
    print_json(&json!({ "track": summary, "out": dir }));
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> CliResult {
    let (checks, tangency) = diagnostics::run_gradcheck(args.seed).map_err(runtime)?;
    let passed = checks.iter().all(|c| c.passed) && tangency.passed;
    let report = json!({
        "seed": args.seed,
        "checks": to_value(&checks)?,
        "lemma2_tangency": to_value(&tangency)?,
        "passed": passed,
    });
    if let Some(out) = &args.out {
        let dir = out_dir(Some(out))?;
        let mut w = create(&dir.join("gradcheck.json"))?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(runtime)?;
        writeln!(w).and_then(|_| w.flush()).map_err(runtime)?;
    }
    print_json(&report);
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

pub fn cmd_conjugacy(args: &ConjugacyArgs) -> CliResult {
    let prior = IGammaParams::new(args.shape, args.scale).map_err(from_setup)?;
    if args.points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let nominal = if args.prior_mean_nominal { Nominal::PriorMean } else { Nominal::ShapeOverScale };
    let dir = out_dir(args.out.as_ref())?;

    let trig = demos::trig_demo(args.y, (-10.0, 16.0), args.points).map_err(from_setup)?;
    let igamma = demos::igamma_demo(&prior, args.noise_var, args.igamma_y, nominal, args.points).map_err(from_setup)?;
    write_rows(&dir.join("trig_density.csv"), &trig.rows)?;
    write_rows(&dir.join("igamma_loglik.csv"), &igamma.rows)?;

    let summary = json!({
        "trig": {
            "y": trig.y,
            "interval": trig.interval,
            "posterior_eta": trig.posterior_eta,
            "refined_integral": trig.refined_integral,
            "likelihood_maxima": trig.likelihood_maxima,
        },
        "igamma": {
            "nominal": igamma.nominal,
            "solutions": to_value(&igamma.solutions)?,
        },
        "outputs": ["trig_density.csv", "igamma_loglik.csv"],
    });
    let mut w = create(&dir.join("conjugacy.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)?;
    print_json(&summary);
    Ok(ExitCode::SUCCESS)
}
