//! Finite-difference and tangency checks for the closed-form gradients and
//! likelihood approximations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::linalg;
use crate::linearize::{self, FnTransform, ScalarTransform};
use crate::oracle::RngStream;
use crate::randmat::{self, EttModel, MeasurementBatch};

/// Outcome of one check suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &str, cases: usize, max_error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), cases, max_error, tolerance, passed: max_error < tolerance }
    }
}

/// `max |a − b| / max |b|`.
pub fn max_rel_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

/// Random SPD matrix `AAᵀ + εI` with unit-scale entries.
pub fn random_spd(stream: &mut RngStream, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| stream.normal());
    linalg::symmetrize(&(&a * a.transpose() + DMatrix::identity(d, d) * 0.5))
}

fn random_symmetric(stream: &mut RngStream, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| stream.normal());
    linalg::symmetrize(&a)
}

/// Central-difference gradient of `f` over symmetric matrices.
///
/// Diagonal entries are perturbed alone; each off-diagonal pair is perturbed
/// together, which yields twice the symmetric gradient entry.
pub fn fd_symmetric_gradient(f: &dyn Fn(&DMatrix<f64>) -> f64, z: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let d = z.nrows();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let diff = (f(&(z + &e * h)) - f(&(z - &e * h))) / (2.0 * h);
            if i == j {
                g[(i, i)] = diff;
            } else {
                g[(i, j)] = diff / 2.0;
                g[(j, i)] = diff / 2.0;
            }
        }
    }
    g
}

fn fd_step_for(z: &DMatrix<f64>) -> f64 {
    1e-5 * linalg::min_eigenvalue(z)
}

/// `f₁(Z) = log|sI + Z^{1/2} R Z^{1/2}|`.
pub fn f1(z: &DMatrix<f64>, s: f64, r: &DMatrix<f64>) -> Result<f64> {
    let half = linalg::sym_power(z, 0.5, "Z")?;
    let inner = DMatrix::identity(z.nrows(), z.nrows()) * s + &half * r * &half;
    linalg::log_det_spd(&inner, "sI + Z^{1/2}RZ^{1/2}")
}

/// `f₂(Z) = tr(N (sZ⁻¹ + R)⁻¹)`.
pub fn f2(z: &DMatrix<f64>, s: f64, r: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<f64> {
    let w = linalg::spd_inverse(z, "Z")? * s + r;
    Ok(linalg::spd_solve(&w, n, "sZ⁻¹ + R")?.trace())
}

/// Closed-form `F₁` against finite differences on random SPD instances.
pub fn check_grad_f1(cases: usize, d: usize, seed: u64) -> Result<CheckReport> {
    let mut stream = RngStream::new(seed, 1000 + d as u64);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let z = random_spd(&mut stream, d);
        let r = random_spd(&mut stream, d);
        let s = 0.1 + 2.0 * stream.uniform();
        let analytic = randmat::grad_f1(&z, s, &r)?;
        let f = |m: &DMatrix<f64>| f1(m, s, &r).unwrap_or(f64::NAN);
        let fd = fd_symmetric_gradient(&f, &z, fd_step_for(&z));
        worst = worst.max(max_rel_error(&fd, &analytic));
    }
    Ok(CheckReport::new(&format!("grad_f1 {d}x{d}"), cases, worst, 1e-5))
}

/// Closed-form `F₂` against finite differences on random instances.
pub fn check_grad_f2(cases: usize, d: usize, seed: u64) -> Result<CheckReport> {
    let mut stream = RngStream::new(seed, 2000 + d as u64);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let z = random_spd(&mut stream, d);
        let r = random_spd(&mut stream, d);
        let n = random_spd(&mut stream, d);
        let s = 0.1 + 2.0 * stream.uniform();
        let analytic = randmat::grad_f2(&z, s, &r, &n)?;
        let f = |m: &DMatrix<f64>| f2(m, s, &r, &n).unwrap_or(f64::NAN);
        let fd = fd_symmetric_gradient(&f, &z, fd_step_for(&z));
        worst = worst.max(max_rel_error(&fd, &analytic));
    }
    Ok(CheckReport::new(&format!("grad_f2 {d}x{d}"), cases, worst, 1e-5))
}

/// First-order linearizations against hand-derived gradients: identity and
/// log transforms, the two scalar normal / inverse-gamma expansions and a
/// range measurement.
pub fn check_lemma1(seed: u64) -> Result<CheckReport> {
    let mut stream = RngStream::new(seed, 3000);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut record = |lin: &linearize::LinearizationResult, want: &DVector<f64>, value: f64| {
        // The expansion reproduces L exactly at the nominal point.
        assert_eq!(lin.evaluate_t(&lin.nominal_t), value);
        worst = worst.max(linalg::vec_rel(&lin.gradient, want));
        cases += 1;
    };

    let one = |x: f64| DVector::from_element(1, x);
    let lin = linearize::linearize_wrt_transform(&|x| x[0], &ScalarTransform::IDENTITY, &one(5.0), None)?;
    record(&lin, &one(1.0), 5.0);
    let lin = linearize::linearize_wrt_transform(&|x| x[0].ln(), &ScalarTransform::LOG, &one(2.0), None)?;
    record(&lin, &one(1.0), 2f64.ln());

    for _ in 0..20 {
        let xh = 0.2 + 5.0 * stream.uniform();
        let sig = 0.2 + 3.0 * stream.uniform();
        let y = 4.0 * stream.normal();
        let a = xh + sig;
        let l = |x: &DVector<f64>| linearize::normal_igamma_neg2_loglik(x[0], sig, y);
        let lin = linearize::linearize_wrt_transform(&l, &ScalarTransform::RECIPROCAL, &one(xh), None)?;
        record(&lin, &one(-xh * xh / a + y * y * xh * xh / (a * a)), l(&one(xh)));
        let lin = linearize::linearize_wrt_transform(&l, &ScalarTransform::LOG, &one(xh), None)?;
        record(&lin, &one(xh / a - y * y * xh / (a * a)), l(&one(xh)));
    }

    // Gaussian range measurement, expanded in x itself.
    let identity = FnTransform { forward: |x: &DVector<f64>| x.clone(), inverse: |z: &DVector<f64>| z.clone() };
    for _ in 0..20 {
        let xh = DVector::from_fn(2, |_, _| 1.0 + 5.0 * stream.uniform());
        let (r, y) = (0.01 + stream.uniform(), xh.norm() + stream.normal());
        let l = |x: &DVector<f64>| -0.5 * (y - x.norm()).powi(2) / r;
        let lin = linearize::linearize_wrt_transform(&l, &identity, &xh, None)?;
        let want = xh.normalize() * ((y - xh.norm()) / r);
        record(&lin, &want, l(&xh));
    }
    Ok(CheckReport::new("lemma1 gradient", cases, worst, 1e-5))
}

/// Tangency of the factorized extent likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangencyReport {
    pub pairs: usize,
    pub directions: usize,
    /// Largest variance, over perturbation directions, of
    /// exact − approximate `−2 log` likelihood.
    pub max_variance: f64,
    /// Largest norm-relative mismatch of the `Z = X⁻¹` gradients.
    pub max_gradient_error: f64,
    pub variance_tolerance: f64,
    pub gradient_tolerance: f64,
    pub passed: bool,
}

/// Random nominal point `(x̂, X̂)` and batch for the tangency suite.
fn random_tangency_problem(stream: &mut RngStream) -> Result<(EttModel, MeasurementBatch, DVector<f64>, DMatrix<f64>)> {
    let d = 2;
    let r = random_spd(stream, d);
    let model = EttModel::position_observation(d, 0.25 + stream.uniform(), r)?;
    let xh = DVector::from_fn(2 * d, |_, _| stream.normal());
    let extent = random_spd(stream, d) * 4.0;
    let m = 3 + (stream.uniform() * 10.0) as usize;
    let spread = model.noise_cov(&extent) * (0.3 + 2.0 * stream.uniform());
    let l = linalg::cholesky_lower(&spread, "spread")?;
    let centre = &model.h * &xh;
    let points = (0..m)
        .map(|_| &centre + &l * DVector::from_fn(d, |_, _| stream.normal()))
        .collect();
    Ok((model, MeasurementBatch::new(points)?, xh, extent))
}

/// Variance over random directions of size `1e−4` (relative) of the change
/// in exact − approximate `−2 log` likelihood away from `(x̂, X̂)`.
fn tangency_variance(
    model: &EttModel,
    b: &MeasurementBatch,
    xh: &DVector<f64>,
    extent: &DMatrix<f64>,
    fac: &randmat::Factorization,
    directions: usize,
    stream: &mut RngStream,
) -> Result<f64> {
    let diff = |x: &DVector<f64>, ext: &DMatrix<f64>| -> Result<f64> {
        Ok(randmat::exact_neg2_loglik(model, b, x, ext)? - fac.neg2_log(x, ext)?)
    };
    let base = diff(xh, extent)?;
    let zh = linalg::spd_inverse(extent, "X̂")?;
    let eps = 1e-4;
    let mut deltas = Vec::with_capacity(directions);
    for _ in 0..directions {
        let dx = DVector::from_fn(xh.len(), |_, _| stream.normal()) * eps;
        let dz = random_symmetric(stream, extent.nrows()) * (eps * linalg::min_eigenvalue(&zh));
        let ext = linalg::spd_inverse(&(&zh + dz), "Z")?;
        deltas.push(diff(&(xh + dx), &ext)? - base);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    Ok(deltas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / deltas.len() as f64)
}

/// Checks that exact and factorized `−2 log` likelihoods differ only by a
/// constant to first order around `(x̂, X̂)`, and that their gradients in
/// `Z = X⁻¹` agree at the nominal point.
pub fn check_lemma2(pairs: usize, directions: usize, seed: u64) -> Result<TangencyReport> {
    let mut stream = RngStream::new(seed, 4000);
    let (mut max_var, mut max_grad) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let (model, b, xh, extent) = random_tangency_problem(&mut stream)?;
        let fac = randmat::lemma2_factorize(&model, &b, &xh, &extent)?;
        max_var = max_var.max(tangency_variance(&model, &b, &xh, &extent, &fac, directions, &mut stream)?);

        // ∂/∂Z of the approximation is −m Ẑ⁻¹ + M.
        let zh = linalg::spd_inverse(&extent, "X̂")?;
        let m = b.count() as f64;
        let implied = &fac.wishart.scale - &extent * m;
        let exact = |z: &DMatrix<f64>| {
            linalg::spd_inverse(z, "Z")
                .and_then(|x| randmat::exact_neg2_loglik(&model, &b, &xh, &x))
                .unwrap_or(f64::NAN)
        };
        let fd = fd_symmetric_gradient(&exact, &zh, fd_step_for(&zh));
        max_grad = max_grad.max(max_rel_error(&fd, &implied));
    }
    let (vt, gt) = (1e-8, 1e-5);
    Ok(TangencyReport {
        pairs,
        directions,
        max_variance: max_var,
        max_gradient_error: max_grad,
        variance_tolerance: vt,
        gradient_tolerance: gt,
        passed: max_var < vt && max_grad < gt,
    })
}

/// Every gradient and tangency suite with its default sizes.
pub fn run_gradcheck(seed: u64) -> Result<(Vec<CheckReport>, TangencyReport)> {
    let reports = vec![
        check_grad_f1(50, 2, seed)?,
        check_grad_f1(50, 3, seed)?,
        check_grad_f2(50, 2, seed)?,
        check_grad_f2(50, 3, seed)?,
        check_lemma1(seed)?,
    ];
    Ok((reports, check_lemma2(10, 20, seed)?))
}
