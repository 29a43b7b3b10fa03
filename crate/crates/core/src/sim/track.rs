//! Single-target tracking Monte-Carlo study on a synthesized trajectory.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{TrackConfig, TrackSetup};
use super::metrics::{extent_sq_error, kinematic_sq_error, mean_std, ErrorAccumulator};
use super::sweep::{draw_batch, draw_extent_prior, thread_pool};
use crate::error::{Error, Result};
use crate::oracle::{self, RngStream};
use crate::randmat::{self, KinematicBelief, MeasurementBatch, Method};

/// True kinematic state and extent at one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthState {
    pub x: DVector<f64>,
    pub extent: DMatrix<f64>,
}

/// `λ_along u uᵀ + λ_across u⊥ u⊥ᵀ` with `u` the unit heading.
pub fn heading_extent(velocity: &DVector<f64>, eigenvalues: [f64; 2]) -> DMatrix<f64> {
    let u = velocity.normalize();
    let perp = DVector::from_row_slice(&[-u[1], u[0]]);
    let x = &u * u.transpose() * eigenvalues[0] + &perp * perp.transpose() * eigenvalues[1];
    (&x + x.transpose()) * 0.5
}

/// Exact constant-turn-rate motion over `dt` seconds at `omega` rad/s.
fn coordinated_turn(x: &DVector<f64>, omega: f64, dt: f64) -> DVector<f64> {
    let (px, py, vx, vy) = (x[0], x[1], x[2], x[3]);
    let th = omega * dt;
    let (sin, cos) = th.sin_cos();
    // sin(θ)/ω and (1 − cos θ)/ω, with their straight-line limits.
    let (a, b) = if th.abs() < 1e-9 { (dt, 0.5 * omega * dt * dt) } else { (sin / omega, (1.0 - cos) / omega) };
    DVector::from_row_slice(&[
        px + a * vx - b * vy,
        py + a * vy + b * vx,
        cos * vx - sin * vy,
        sin * vx + cos * vy,
    ])
}

/// Noise-free truth at scan times `(k − 1)τ`, `k = 1..K`.
pub fn generate_trajectory(cfg: &TrackConfig) -> Result<Vec<TruthState>> {
    cfg.setup()?;
    // Segment end times.
    let mut ends = Vec::with_capacity(cfg.segments.len());
    let mut t_end = 0.0;
    for seg in &cfg.segments {
        t_end += seg.duration_s;
        ends.push((t_end, seg.turn_rate_deg_s.to_radians()));
    }
    let mut x = DVector::from_row_slice(&cfg.x1);
    if x.rows(2, 2).norm() == 0.0 {
        return Err(Error::Config("initial velocity must be nonzero to define a heading".into()));
    }
    let mut out = Vec::with_capacity(cfg.k_scans);
    for k in 0..cfg.k_scans {
        out.push(TruthState { extent: heading_extent(&x.rows(2, 2).into_owned(), cfg.extent_eigenvalues), x: x.clone() });
        if k + 1 == cfg.k_scans {
            break;
        }
        let (mut t, t_next) = (k as f64 * cfg.tau, (k + 1) as f64 * cfg.tau);
        for &(end, omega) in &ends {
            if t >= t_next {
                break;
            }
            if end <= t {
                continue;
            }
            let stop = end.min(t_next);
            x = coordinated_turn(&x, omega, stop - t);
            t = stop;
        }
    }
    Ok(out)
}

/// One method's result over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub x_final: DVector<f64>,
    pub extent_final: DMatrix<f64>,
    pub e_x: f64,
    pub e_extent: f64,
    pub cycle_mean_s: f64,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodOutcome {
    Ok(MethodRun),
    Failed { method: Method, reason: String },
}

impl MethodOutcome {
    pub fn method(&self) -> Method {
        match self {
            MethodOutcome::Ok(r) => r.method,
            MethodOutcome::Failed { method, .. } => *method,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub stream_id: u64,
    pub outcomes: Vec<MethodOutcome>,
}

/// Mean ± standard deviation over successful runs of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub method: Method,
    pub e_x: (f64, f64),
    pub e_extent: (f64, f64),
    pub cycle_s: (f64, f64),
    pub n_ok: usize,
    pub n_fail: usize,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<TrackSummary>,
}

struct RunData {
    kin: KinematicBelief,
    ext: randmat::ExtentBelief,
    batches: Vec<MeasurementBatch>,
}

fn draw_run(cfg: &TrackConfig, setup: &TrackSetup, truth: &[TruthState], stream: &mut RngStream) -> Result<RunData> {
    let x1 = DVector::from_row_slice(&cfg.x1);
    let mean = oracle::sample_gaussian(stream, &x1, &(&setup.p0 / cfg.alpha0))?;
    let kin = KinematicBelief::new(mean, setup.p0.clone())?;
    let ext = draw_extent_prior(stream, &setup.laws, cfg.delta0, &truth[0].extent)?;
    let batches = truth
        .iter()
        .map(|t| draw_batch(stream, &setup.laws, &setup.model, &t.x, &t.extent))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunData { kin, ext, batches })
}

fn filter_run(cfg: &TrackConfig, setup: &TrackSetup, truth: &[TruthState], data: &RunData, method: Method) -> Result<MethodRun> {
    let updater = method.updater();
    let (mut kin, mut ext) = (data.kin.clone(), data.ext.clone());
    let mut acc = ErrorAccumulator::default();
    let mut elapsed = 0.0;
    let mut repairs = 0;
    let mut last = None;
    for (k, (t, b)) in truth.iter().zip(&data.batches).enumerate() {
        let start = cfg.timing.then(Instant::now);
        let out = updater.update(&kin, &ext, &setup.model, b)?;
        if let Some(start) = start {
            elapsed += start.elapsed().as_secs_f64();
        }
        repairs += usize::from(out.repaired);
        let extent = out.extent.mean()?;
        acc.push(kinematic_sq_error(&setup.model.h, &out.kinematic.mean, &t.x), extent_sq_error(&extent, &t.extent));
        if k + 1 < truth.len() {
            (kin, ext) = randmat::time_update(&out.kinematic, &out.extent, &setup.motion)?;
        }
        last = Some((out.kinematic.mean, extent));
    }
    let (x_final, extent_final) = last.expect("at least one scan");
    let clip = |e: f64| cfg.clip.map_or(e, |c| e.min(c));
    Ok(MethodRun {
        method,
        x_final,
        extent_final,
        e_x: clip(acc.e_x(2)),
        e_extent: clip(acc.e_extent(2)),
        cycle_mean_s: elapsed / truth.len() as f64,
        repairs,
    })
}

fn track_run(cfg: &TrackConfig, setup: &TrackSetup, truth: &[TruthState], run_id: u64) -> RunRecord {
    let mut stream = RngStream::new(cfg.seed, run_id);
    let outcomes = match draw_run(cfg, setup, truth, &mut stream) {
        Ok(data) => cfg
            .methods
            .iter()
            .map(|&method| match filter_run(cfg, setup, truth, &data, method) {
                Ok(r) => MethodOutcome::Ok(r),
                Err(e) => MethodOutcome::Failed { method, reason: e.to_string() },
            })
            .collect(),
        Err(e) => cfg
            .methods
            .iter()
            .map(|&method| MethodOutcome::Failed { method, reason: format!("scenario generation: {e}") })
            .collect(),
    };
    RunRecord { run_id, seed: cfg.seed, stream_id: run_id, outcomes }
}

pub fn summarize(methods: &[Method], records: &[RunRecord]) -> Vec<TrackSummary> {
    methods
        .iter()
        .map(|&method| {
            let runs: Vec<&MethodRun> = records
                .iter()
                .flat_map(|r| &r.outcomes)
                .filter_map(|o| match o {
                    MethodOutcome::Ok(run) if run.method == method => Some(run),
                    _ => None,
                })
                .collect();
            let n_fail = records
                .iter()
                .flat_map(|r| &r.outcomes)
                .filter(|o| matches!(o, MethodOutcome::Failed { method: m, .. } if *m == method))
                .count();
            let col = |f: fn(&MethodRun) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
            TrackSummary {
                method,
                e_x: col(|r| r.e_x),
                e_extent: col(|r| r.e_extent),
                cycle_s: col(|r| r.cycle_mean_s),
                n_ok: runs.len(),
                n_fail,
                repairs: runs.iter().map(|r| r.repairs).sum(),
            }
        })
        .collect()
}

/// Runs `n_mc` independent tracks; run `j` draws from stream `j`.
pub fn run_track(cfg: &TrackConfig, workers: usize) -> Result<TrackResult> {
    let setup = cfg.setup()?;
    let truth = generate_trajectory(cfg)?;
    let records: Vec<RunRecord> = thread_pool(workers)?.install(|| {
        (0..cfg.n_mc as u64)
            .into_par_iter()
            .map(|j| track_run(cfg, &setup, &truth, j))
            .collect()
    });
    let summary = summarize(&cfg.methods, &records);
    Ok(TrackResult { records, summary })
}
