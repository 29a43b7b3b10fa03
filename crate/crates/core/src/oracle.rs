//! Sampling primitives and the importance-sampling reference posterior.
//!
//! The reference draws `(xᵢ, Xᵢ)` from the prior product density and weights
//! each draw by the exact measurement likelihood. Per-sample work only needs
//! the batch mean and the spread about it, so the likelihood is evaluated in
//! `O(d³)` independent of `m`.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::randmat::{EttModel, ExtentBelief, KinematicBelief, MeasurementBatch};

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Streams with the same seed and different ids are independent ChaCha8
/// streams, so a run's draws never depend on which worker executes it.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn algorithm_tag(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `μ + L z` with `L` the Cholesky factor of `Σ`.
pub fn sample_gaussian(stream: &mut RngStream, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() {
        return Err(Error::InvalidParameter("covariance/mean size mismatch".into()));
    }
    let l = linalg::cholesky_lower(&linalg::checked_spd(cov, "Gaussian covariance")?, "Gaussian covariance")?;
    let z = DVector::from_fn(mean.len(), |_, _| stream.normal());
    Ok(mean + l * z)
}

/// Largest mean handled by inversion; larger means are split into chunks.
pub const POISSON_INVERSION_MAX: f64 = 30.0;

fn poisson_inversion(stream: &mut RngStream, lambda: f64) -> u64 {
    let u = stream.uniform();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // Guards the tail where the accumulated cdf stalls below u in floating point.
        if p < f64::MIN_POSITIVE && k as f64 > lambda {
            break;
        }
    }
    k
}

/// Poisson draw by cdf inversion for `λ ≤ 30`; above that, the sum of
/// `⌈λ/30⌉` independent inversions with equal means, which is exact by
/// additivity of the Poisson law.
pub fn sample_poisson(stream: &mut RngStream, lambda: f64) -> Result<u64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("Poisson mean {lambda} must be finite and ≥ 0")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let chunks = (lambda / POISSON_INVERSION_MAX).ceil().max(1.0) as u64;
    let part = lambda / chunks as f64;
    Ok((0..chunks).map(|_| poisson_inversion(stream, part)).sum())
}

fn chi_squared(k: f64) -> Result<ChiSquared<f64>> {
    ChiSquared::new(k).map_err(|e| Error::InvalidParameter(format!("χ² with {k} dof: {e}")))
}

/// Bartlett factor: lower triangular with `Aᵢᵢ = √χ²(n−i)` and standard
/// normal entries below the diagonal, drawn row by row.
fn bartlett(stream: &mut RngStream, chis: &[ChiSquared<f64>]) -> DMatrix<f64> {
    let d = chis.len();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = chis[i].sample(stream).sqrt();
        for j in 0..i {
            a[(i, j)] = stream.normal();
        }
    }
    a
}

fn bartlett_chis(n: f64, d: usize) -> Result<Vec<ChiSquared<f64>>> {
    if !(n > d as f64 - 1.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("Wishart dof {n} must exceed d − 1 = {}", d as f64 - 1.0)));
    }
    (0..d).map(|i| chi_squared(n - i as f64)).collect()
}

/// Wishart draw with `n` degrees of freedom and scale `Ψ` (mean `nΨ`).
pub fn sample_wishart(stream: &mut RngStream, n: f64, psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let psi = linalg::checked_spd(psi, "Wishart scale")?;
    let chis = bartlett_chis(n, psi.nrows())?;
    let b = linalg::cholesky_lower(&psi, "Wishart scale")? * bartlett(stream, &chis);
    Ok(linalg::symmetrize(&(&b * b.transpose())))
}

/// Inverse-Wishart draw: `X⁻¹ ~ Wishart(ν − d − 1, V⁻¹)`.
pub fn sample_invwishart(stream: &mut RngStream, dof: f64, scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = linalg::checked_spd(scale, "inverse-Wishart scale")?;
    let d = scale.nrows();
    if !(dof > 2.0 * d as f64) {
        return Err(Error::InvalidParameter(format!("inverse-Wishart dof {dof} must exceed 2d = {}", 2 * d)));
    }
    let chis = bartlett_chis(dof - d as f64 - 1.0, d)?;
    let lw = linalg::cholesky_lower(&linalg::spd_inverse(&scale, "inverse-Wishart scale")?, "V⁻¹")?;
    invwishart_from_bartlett(&lw, &bartlett(stream, &chis))
}

fn invwishart_from_bartlett(lw: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = lw * a;
    let binv = b
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular Bartlett factor".into()))?;
    Ok(linalg::symmetrize(&(binv.transpose() * binv)))
}

/// Reference posterior summary.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x_opt: DVector<f64>,
    pub extent_opt: DMatrix<f64>,
    pub ess: f64,
    pub n_samples: usize,
}

pub const MIN_ORACLE_SAMPLES: usize = 1000;

/// Normalizes log-weights with a single log-sum-exp pass.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

pub fn effective_sample_size(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|v| v * v).sum::<f64>()
}

/// Batch sufficient statistics: count, mean and spread about the mean.
struct BatchSummary {
    m: f64,
    ybar: DVector<f64>,
    spread: DMatrix<f64>,
}

fn validate(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    n_samples: usize,
) -> Result<BatchSummary> {
    if n_samples < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {n_samples}"
        )));
    }
    if kin.dim() != model.state_dim() || b.dim() != model.meas_dim() || ext.dim() != model.meas_dim() {
        return Err(Error::InvalidInput("belief, model and batch dimensions disagree".into()));
    }
    let ybar = b.mean();
    let spread = b.spread_about(&ybar);
    Ok(BatchSummary { m: b.count() as f64, ybar, spread })
}

/// Importance-sampling posterior with the prior as proposal.
///
/// Common dimensions run through a stack-allocated kernel; others use the
/// heap-allocated reference path. Both consume the random stream in the same
/// order and agree to rounding.
pub fn importance_posterior(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<OracleResult> {
    let summary = validate(kin, ext, model, b, n_samples)?;
    macro_rules! dispatch {
        ($(($d:literal, $n:literal)),*) => {
            match (model.meas_dim(), model.state_dim()) {
                $(($d, $n) => importance_static::<$d, $n>(kin, ext, model, &summary, n_samples, stream),)*
                _ => importance_dynamic(kin, ext, model, &summary, n_samples, stream),
            }
        };
    }
    dispatch!((1, 1), (1, 2), (2, 2), (2, 4), (3, 3), (3, 6))
}

/// Heap-allocated implementation for arbitrary dimensions.
pub fn importance_posterior_reference(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<OracleResult> {
    let summary = validate(kin, ext, model, b, n_samples)?;
    importance_dynamic(kin, ext, model, &summary, n_samples, stream)
}

fn importance_dynamic(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    bs: &BatchSummary,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<OracleResult> {
    let d = model.meas_dim();
    let lp = linalg::cholesky_lower(&kin.cov, "P")?;
    let lw = linalg::cholesky_lower(&linalg::spd_inverse(&ext.scale, "V")?, "V⁻¹")?;
    let chis = bartlett_chis(ext.dof - d as f64 - 1.0, d)?;

    let mut xs = Vec::with_capacity(n_samples);
    let mut ext_samples = Vec::with_capacity(n_samples);
    let mut log_w = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = DVector::from_fn(kin.dim(), |_, _| stream.normal());
        let x = &kin.mean + &lp * z;
        let xm = invwishart_from_bartlett(&lw, &bartlett(stream, &chis))?;
        let s = &xm * model.s + &model.r;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("sX + R not SPD".into()))?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let e = &bs.ybar - &model.h * &x;
        let quad = chol.solve(&bs.spread).trace() + e.dot(&chol.solve(&e));
        log_w.push(-0.5 * bs.m * (logdet + quad));
        xs.push(x);
        ext_samples.push(xm);
    }
    let w = normalize_log_weights(&log_w)?;
    let mut x_opt = DVector::zeros(kin.dim());
    let mut extent_opt = DMatrix::zeros(d, d);
    for ((wi, x), xm) in w.iter().zip(&xs).zip(&ext_samples) {
        x_opt.axpy(*wi, x, 1.0);
        extent_opt += xm * *wi;
    }
    Ok(OracleResult { x_opt, extent_opt: linalg::symmetrize(&extent_opt), ess: effective_sample_size(&w), n_samples })
}

fn to_static<const R: usize, const C: usize>(m: &DMatrix<f64>) -> SMatrix<f64, R, C> {
    SMatrix::from_fn(|i, j| m[(i, j)])
}

fn importance_static<const D: usize, const N: usize>(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    bs: &BatchSummary,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<OracleResult> {
    let lp: SMatrix<f64, N, N> = to_static(&linalg::cholesky_lower(&kin.cov, "P")?);
    let lw: SMatrix<f64, D, D> =
        to_static(&linalg::cholesky_lower(&linalg::spd_inverse(&ext.scale, "V")?, "V⁻¹")?);
    let h: SMatrix<f64, D, N> = to_static(&model.h);
    let r: SMatrix<f64, D, D> = to_static(&model.r);
    let spread: SMatrix<f64, D, D> = to_static(&bs.spread);
    let mean = SVector::<f64, N>::from_fn(|i, _| kin.mean[i]);
    let ybar = SVector::<f64, D>::from_fn(|i, _| bs.ybar[i]);
    let chis = bartlett_chis(ext.dof - D as f64 - 1.0, D)?;

    let mut xs = Vec::with_capacity(n_samples);
    let mut ext_samples = Vec::with_capacity(n_samples);
    let mut log_w = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = SVector::<f64, N>::from_fn(|_, _| stream.normal());
        let x = mean + lp * z;
        let mut a = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            a[(i, i)] = chis[i].sample(stream).sqrt();
            for j in 0..i {
                a[(i, j)] = stream.normal();
            }
        }
        let binv = (lw * a)
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("singular Bartlett factor".into()))?;
        let xm = binv.transpose() * binv;
        let xm = (xm + xm.transpose()) * 0.5;
        let chol = (xm * model.s + r)
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("sX + R not SPD".into()))?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let e = ybar - h * x;
        let quad = chol.solve(&spread).trace() + e.dot(&chol.solve(&e));
        log_w.push(-0.5 * bs.m * (logdet + quad));
        xs.push(x);
        ext_samples.push(xm);
    }
    let w = normalize_log_weights(&log_w)?;
    let mut x_opt = SVector::<f64, N>::zeros();
    let mut extent_opt = SMatrix::<f64, D, D>::zeros();
    for ((wi, x), xm) in w.iter().zip(&xs).zip(&ext_samples) {
        x_opt += x * *wi;
        extent_opt += xm * *wi;
    }
    Ok(OracleResult {
        x_opt: DVector::from_column_slice(x_opt.as_slice()),
        extent_opt: linalg::symmetrize(&DMatrix::from_column_slice(D, D, extent_opt.as_slice())),
        ess: effective_sample_size(&w),
        n_samples,
    })
}
