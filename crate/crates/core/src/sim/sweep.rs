//! One-shot measurement-update comparison against the importance-sampling
//! reference, over a grid of prior accuracies.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{PriorLaws, SweepConfig, SweepSetup};
use super::metrics::{extent_sq_error, kinematic_sq_error, ErrorAccumulator};
use crate::error::{Error, Result};
use crate::oracle::{self, RngStream};
use crate::randmat::{EttModel, ExtentBelief, KinematicBelief, MeasurementBatch, Method};

/// Predicted beliefs and one scan of measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct McInstance {
    pub kin: KinematicBelief,
    pub ext: ExtentBelief,
    pub batch: MeasurementBatch,
}

pub(crate) fn draw_dof(stream: &mut RngStream, laws: &PriorLaws) -> Result<f64> {
    Ok((oracle::sample_poisson(stream, laws.nu_mean)? as f64).max(laws.nu_min))
}

pub(crate) fn draw_count(stream: &mut RngStream, laws: &PriorLaws) -> Result<usize> {
    Ok((oracle::sample_poisson(stream, laws.m_mean)? as usize).max(laws.m_min))
}

/// `ν` from its law and `V = W·(ν − 2d − 2)` with `W ~ Wishart(δ, X/δ)`.
pub(crate) fn draw_extent_prior(
    stream: &mut RngStream,
    laws: &PriorLaws,
    delta: f64,
    extent: &DMatrix<f64>,
) -> Result<ExtentBelief> {
    let dof = draw_dof(stream, laws)?;
    let mean = oracle::sample_wishart(stream, delta, &(extent / delta))?;
    ExtentBelief::from_mean(dof, &mean)
}

/// `m` measurements i.i.d. `N(Hx, sX + R)`.
pub(crate) fn draw_batch(
    stream: &mut RngStream,
    laws: &PriorLaws,
    model: &EttModel,
    x: &nalgebra::DVector<f64>,
    extent: &DMatrix<f64>,
) -> Result<MeasurementBatch> {
    let m = draw_count(stream, laws)?;
    let centre = &model.h * x;
    let cov = model.noise_cov(extent);
    let points = (0..m)
        .map(|_| oracle::sample_gaussian(stream, &centre, &cov))
        .collect::<Result<Vec<_>>>()?;
    MeasurementBatch::new(points)
}

/// Draws the predicted density and a batch around the fixed truth.
pub fn generate_mc_instance(
    setup: &SweepSetup,
    alpha: f64,
    delta: f64,
    stream: &mut RngStream,
) -> Result<McInstance> {
    if !(alpha >= 1.0 && delta >= 2.0) {
        return Err(Error::InvalidParameter(format!("need α ≥ 1 and δ ≥ 2, got α = {alpha}, δ = {delta}")));
    }
    let mean = oracle::sample_gaussian(stream, &setup.x0, &(&setup.p / alpha))?;
    let kin = KinematicBelief::new(mean, setup.p.clone())?;
    let ext = draw_extent_prior(stream, &setup.laws, delta, &setup.extent0)?;
    let batch = draw_batch(stream, &setup.laws, &setup.model, &setup.x0, &setup.extent0)?;
    Ok(McInstance { kin, ext, batch })
}

/// Squared error terms of one method in one run.
type RunTerms = Vec<Option<(f64, f64)>>;

fn sweep_run(cfg: &SweepConfig, setup: &SweepSetup, alpha: f64, delta: f64, stream: &mut RngStream) -> RunTerms {
    let failed = || vec![None; cfg.methods.len()];
    let Ok(inst) = generate_mc_instance(setup, alpha, delta, stream) else {
        return failed();
    };
    let Ok(reference) =
        oracle::importance_posterior(&inst.kin, &inst.ext, &setup.model, &inst.batch, cfg.oracle_samples, stream)
    else {
        return failed();
    };
    cfg.methods
        .iter()
        .map(|method| {
            let out = method.updater().update(&inst.kin, &inst.ext, &setup.model, &inst.batch).ok()?;
            let extent = out.extent.mean().ok()?;
            Some((
                kinematic_sq_error(&setup.model.h, &out.kinematic.mean, &reference.x_opt),
                extent_sq_error(&extent, &reference.extent_opt),
            ))
        })
        .collect()
}

/// One output row: a grid cell and a method.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub delta: f64,
    pub method: Method,
    pub e_x: f64,
    pub e_extent: f64,
    pub n_fail: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Grid averages of `(E_x, E_X)` over cells with at least one success.
    pub fn grid_mean(&self, method: Method) -> (f64, f64) {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.method == method && r.e_x.is_finite()).collect();
        let n = rows.len() as f64;
        (rows.iter().map(|r| r.e_x).sum::<f64>() / n, rows.iter().map(|r| r.e_extent).sum::<f64>() / n)
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.n_fail).sum()
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Runs every `(α, δ)` cell. Run `j` of cell `c` draws from stream
/// `c·n_mc + j`, and results are reduced in run order, so the table does
/// not depend on `workers`.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepTable> {
    let setup = cfg.setup()?;
    let cells: Vec<(f64, f64)> = setup
        .alphas
        .iter()
        .flat_map(|&a| setup.deltas.iter().map(move |&d| (a, d)))
        .collect();
    let n_mc = cfg.n_mc;
    let total = cells.len() * n_mc;
    let runs: Vec<RunTerms> = thread_pool(workers)?.install(|| {
        (0..total)
            .into_par_iter()
            .map(|i| {
                let (alpha, delta) = cells[i / n_mc];
                let mut stream = RngStream::new(cfg.seed, i as u64);
                sweep_run(cfg, &setup, alpha, delta, &mut stream)
            })
            .collect()
    });

    let d = setup.model.meas_dim();
    let mut rows = Vec::with_capacity(cells.len() * cfg.methods.len());
    for (c, &(alpha, delta)) in cells.iter().enumerate() {
        let cell_runs = &runs[c * n_mc..(c + 1) * n_mc];
        for (k, &method) in cfg.methods.iter().enumerate() {
            let mut acc = ErrorAccumulator::default();
            let mut n_fail = 0;
            for run in cell_runs {
                match run[k] {
                    Some((sx, se)) => acc.push(sx, se),
                    None => n_fail += 1,
                }
            }
            rows.push(SweepRow { alpha, delta, method, e_x: acc.e_x(d), e_extent: acc.e_extent(d), n_fail });
        }
    }
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_rel;
    use crate::sim::config::GridSpec;

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            alpha_grid: GridSpec::linear(2, 1.0, 50.0),
            delta_grid: GridSpec::logarithmic(2, 2.0, 1000.0),
            n_mc: 4,
            oracle_samples: 1000,
            seed: 42,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn instance_is_reproducible() {
        let setup = small_cfg().setup().unwrap();
        let a = generate_mc_instance(&setup, 10.0, 20.0, &mut RngStream::new(1, 5)).unwrap();
        let b = generate_mc_instance(&setup, 10.0, 20.0, &mut RngStream::new(1, 5)).unwrap();
        assert_eq!(a, b);
        assert!(a.batch.count() >= 2);
        assert!(a.ext.dof >= 7.0);
        assert!(generate_mc_instance(&setup, 0.5, 20.0, &mut RngStream::new(1, 5)).is_err());
    }

    #[test]
    fn generator_marginals() {
        let setup = small_cfg().setup().unwrap();
        let n = 10_000;
        let (alpha, delta) = (4.0, 10.0);
        let mut mean_x = nalgebra::DVector::zeros(4);
        let mut mean_ext = DMatrix::zeros(2, 2);
        for i in 0..n {
            let inst = generate_mc_instance(&setup, alpha, delta, &mut RngStream::new(3, i)).unwrap();
            mean_x += &inst.kin.mean;
            mean_ext += inst.ext.mean().unwrap();
        }
        mean_x /= n as f64;
        mean_ext /= n as f64;
        for i in 0..4 {
            let sigma = (setup.p[(i, i)] / alpha).sqrt();
            assert!((mean_x[i] - setup.x0[i]).abs() < 3.0 * sigma / (n as f64).sqrt(), "component {i}");
        }
        assert!(frobenius_rel(&mean_ext, &setup.extent0) < 0.02);
    }

    #[test]
    fn sweep_is_worker_independent() {
        let cfg = small_cfg();
        let a = run_sweep(&cfg, 1).unwrap();
        let b = run_sweep(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 8);
        assert_eq!(a.total_failures(), 0);
        assert!(a.rows.iter().all(|r| r.e_x >= 0.0 && r.e_extent >= 0.0));
    }
}
