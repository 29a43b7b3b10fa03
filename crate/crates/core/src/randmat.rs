//! Random-matrix extended target tracking.
//!
//! The target state is a Gaussian kinematic belief together with an
//! inverse-Wishart belief on the SPD extent matrix `X`. Each scan yields
//! `m` measurements `yʲ ~ N(Hx, sX + R)`. Three extent updates share the same
//! kinematic update and add an increment `M` to the inverse-Wishart scale:
//!
//! * FFK, the unbiased estimator built from the centre/spread split of `Y`;
//! * LLL, the first-order expansion of the log-likelihood in `X⁻¹`;
//! * ULL, the LLL increment recentred on `HPHᵀ + sX̂ + R` so that it is
//!   conditionally unbiased.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{self, InvWishartParams};
use crate::linalg;

/// Gaussian belief over the kinematic state.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl KinematicBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::InvalidParameter("kinematic covariance/mean size mismatch".into()));
        }
        let cov = linalg::checked_spd(&cov, "kinematic covariance")?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Inverse-Wishart belief over the extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtentBelief {
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

impl ExtentBelief {
    pub fn new(dof: f64, scale: DMatrix<f64>) -> Result<Self> {
        let p = InvWishartParams::new(dof, scale)?;
        Ok(Self { dof: p.dof, scale: p.scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }

    /// `V / (ν − 2d − 2)`.
    pub fn mean(&self) -> Result<DMatrix<f64>> {
        expfam::invwishart_mean(&InvWishartParams { dof: self.dof, scale: self.scale.clone() })
    }

    /// Builds a belief from a target extent mean and degrees of freedom.
    pub fn from_mean(dof: f64, mean: &DMatrix<f64>) -> Result<Self> {
        let d = mean.nrows() as f64;
        if !(dof > 2.0 * d + 2.0) {
            return Err(Error::MeanUndefined { dof, dim: mean.nrows() });
        }
        Self::new(dof, mean * (dof - 2.0 * d - 2.0))
    }
}

/// Measurement model `yʲ ~ N(Hx, sX + R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EttModel {
    pub h: DMatrix<f64>,
    pub s: f64,
    pub r: DMatrix<f64>,
}

impl EttModel {
    pub fn new(h: DMatrix<f64>, s: f64, r: DMatrix<f64>) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("scaling s = {s} must be positive")));
        }
        let r = linalg::checked_spd(&r, "sensor noise R")?;
        if h.nrows() != r.nrows() {
            return Err(Error::InvalidParameter("H rows must match R".into()));
        }
        if h.rank(1e-12) != h.nrows() {
            return Err(Error::InvalidParameter("H must have full row rank".into()));
        }
        Ok(Self { h, s, r })
    }

    /// `H = [I_d, 0]` for a position/velocity state of dimension `2d`.
    pub fn position_observation(d: usize, s: f64, r: DMatrix<f64>) -> Result<Self> {
        let mut h = DMatrix::zeros(d, 2 * d);
        h.view_mut((0, 0), (d, d)).fill_with_identity();
        Self::new(h, s, r)
    }

    pub fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    /// `sX + R`.
    pub fn noise_cov(&self, extent: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(extent * self.s + &self.r))
    }
}

/// The measurements of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    points: Vec<DVector<f64>>,
}

impl MeasurementBatch {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("measurement batch is empty".into()));
        };
        let d = first.len();
        if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("measurements must be finite and of equal size".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for p in &self.points {
            acc += p;
        }
        acc / self.count() as f64
    }

    /// `(1/m) Σ (yʲ − c)(yʲ − c)ᵀ`.
    pub fn spread_about(&self, centre: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for p in &self.points {
            let e = p - centre;
            acc.ger(1.0, &e, &e, 1.0);
        }
        linalg::symmetrize(&(acc / self.count() as f64))
    }
}

/// Linear motion model `x′ = A x + w`, `w ~ N(0, Q)`, with exponential
/// forgetting of the extent belief at time constant `τ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub tau: f64,
    pub tau0: f64,
}

impl MotionModel {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, tau: f64, tau0: f64) -> Result<Self> {
        if !(tau > 0.0 && tau0 > 0.0) {
            return Err(Error::InvalidParameter(format!("τ = {tau} and τ₀ = {tau0} must be positive")));
        }
        if !a.is_square() || a.nrows() != q.nrows() {
            return Err(Error::InvalidParameter("A and Q must be square of equal size".into()));
        }
        let q = linalg::checked_symmetric(&q, "process noise Q")?;
        if linalg::min_eigenvalue(&q) < -1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidParameter("process noise Q is not PSD".into()));
        }
        Ok(Self { a, q, tau, tau0 })
    }

    /// Discrete-time constant-velocity model in `d` spatial dimensions with
    /// white acceleration of standard deviation `sigma_v`.
    pub fn constant_velocity(d: usize, tau: f64, sigma_v: f64, tau0: f64) -> Result<Self> {
        let id = DMatrix::<f64>::identity(d, d);
        let mut a = DMatrix::identity(2 * d, 2 * d);
        a.view_mut((0, d), (d, d)).copy_from(&(&id * tau));
        let q2 = sigma_v * sigma_v;
        let mut q = DMatrix::zeros(2 * d, 2 * d);
        q.view_mut((0, 0), (d, d)).copy_from(&(&id * (q2 * tau.powi(4) / 4.0)));
        q.view_mut((0, d), (d, d)).copy_from(&(&id * (q2 * tau.powi(3) / 2.0)));
        q.view_mut((d, 0), (d, d)).copy_from(&(&id * (q2 * tau.powi(3) / 2.0)));
        q.view_mut((d, d), (d, d)).copy_from(&(&id * (q2 * tau * tau)));
        Self::new(a, q, tau, tau0)
    }
}

/// Mean measurement and spread about the predicted measurement.
pub fn batch_stats(b: &MeasurementBatch, predicted: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if b.dim() != predicted.len() {
        return Err(Error::InvalidInput("predicted measurement has wrong dimension".into()));
    }
    Ok((b.mean(), b.spread_about(predicted)))
}

fn check_dims(kin: &KinematicBelief, model: &EttModel, b: &MeasurementBatch) -> Result<()> {
    if kin.dim() != model.state_dim() || b.dim() != model.meas_dim() {
        return Err(Error::InvalidInput(format!(
            "state {} / measurement {} do not match H {}x{}",
            kin.dim(),
            b.dim(),
            model.meas_dim(),
            model.state_dim()
        )));
    }
    Ok(())
}

/// Kinematic update in gain form, `S = HPHᵀ + (sX̂ + R)/m`.
pub fn kinematic_update(
    prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    extent_mean: &DMatrix<f64>,
) -> Result<KinematicBelief> {
    check_dims(prior, model, b)?;
    let m = b.count() as f64;
    let h = &model.h;
    let ph = &prior.cov * h.transpose();
    let s = linalg::symmetrize(&(h * &ph + model.noise_cov(extent_mean) / m));
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("innovation covariance is singular".into()))?;
    // K = P Hᵀ S⁻¹
    let k = chol.solve(&ph.transpose()).transpose();
    let innov = b.mean() - h * &prior.mean;
    let mean = &prior.mean + &k * innov;
    let cov = linalg::symmetrize(&(&prior.cov - &k * &s * k.transpose()));
    Ok(KinematicBelief { mean, cov })
}

/// The same update in information form,
/// `P⁺ = (P⁻¹ + m Hᵀ(sX̂+R)⁻¹H)⁻¹`, `x⁺ = P⁺(P⁻¹x + m Hᵀ(sX̂+R)⁻¹ȳ)`.
pub fn kinematic_update_information(
    prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    extent_mean: &DMatrix<f64>,
) -> Result<KinematicBelief> {
    check_dims(prior, model, b)?;
    let m = b.count() as f64;
    let h = &model.h;
    let noise = model.noise_cov(extent_mean);
    let ninv_h = linalg::spd_solve(&noise, h, "sX̂ + R")?;
    let ninv_y = linalg::spd_solve_vec(&noise, &b.mean(), "sX̂ + R")?;
    let pinv = linalg::spd_inverse(&prior.cov, "P")?;
    let info = linalg::symmetrize(&(&pinv + h.transpose() * ninv_h * m));
    let cov = linalg::spd_inverse(&info, "posterior information")?;
    let mean = &cov * (&pinv * &prior.mean + h.transpose() * ninv_y * m);
    Ok(KinematicBelief { mean, cov })
}

/// Result of an extent update with its SPD-repair flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtentUpdate {
    pub posterior: ExtentBelief,
    /// `V + M` had eigenvalues floored to stay SPD.
    pub repaired: bool,
}

/// Relative eigenvalue floor for the posterior scale.
pub const SPD_REPAIR_FLOOR: f64 = 1e-9;

/// `ν + m`, `V + M`, flooring eigenvalues of `V + M` below `1e−9·tr(V)/d`.
fn apply_increment(prior: &ExtentBelief, m: usize, increment: &DMatrix<f64>) -> Result<ExtentUpdate> {
    if increment.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("extent increment is not finite".into()));
    }
    let d = prior.dim() as f64;
    let floor = SPD_REPAIR_FLOOR * prior.scale.trace() / d;
    let (scale, repaired) = linalg::floor_eigenvalues(&(&prior.scale + increment), floor);
    Ok(ExtentUpdate {
        posterior: ExtentBelief { dof: prior.dof + m as f64, scale },
        repaired,
    })
}

fn require_mean(prior: &ExtentBelief) -> Result<DMatrix<f64>> {
    prior.mean()
}

/// `mX̂ + m s X̂ C⁻¹ (Y − C) C⁻¹ X̂`.
fn linearized_increment(
    extent_mean: &DMatrix<f64>,
    s: f64,
    c: &DMatrix<f64>,
    spread: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    let mf = m as f64;
    let inner = linalg::inverse_sandwich(c, &(spread - c), "C")?;
    Ok(linalg::symmetrize(
        &(extent_mean * mf + extent_mean * &inner * extent_mean * (mf * s)),
    ))
}

/// The FFK increment `M^FFK`.
pub fn ffk_increment(
    extent_mean: &DMatrix<f64>,
    kin_prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
) -> Result<DMatrix<f64>> {
    check_dims(kin_prior, model, b)?;
    let m = b.count();
    if m < 2 {
        return Err(Error::InvalidInput("FFK extent update needs at least two measurements".into()));
    }
    let mf = m as f64;
    let h = &model.h;
    let predicted = h * &kin_prior.mean;
    let ybar = b.mean();
    let e = &ybar - &predicted;
    let y1 = &e * e.transpose();
    let y2 = b.spread_about(&ybar);
    let noise = model.noise_cov(extent_mean);
    let hph = linalg::symmetrize(&(h * &kin_prior.cov * h.transpose()));
    let y1_bar = &hph + &noise / mf;
    let y2_bar = &noise * ((mf - 1.0) / mf);

    let x_half = linalg::sym_power(extent_mean, 0.5, "X̂")?;
    let y1_isqrt = linalg::sym_power(&y1_bar, -0.5, "Ȳ¹")?;
    let y2_isqrt = linalg::sym_power(&y2_bar, -0.5, "Ȳ²")?;
    let t1 = &x_half * &y1_isqrt;
    let t2 = &x_half * &y2_isqrt;
    let m1 = &t1 * y1 * t1.transpose();
    let m2 = &t2 * y2 * t2.transpose() * (mf - 1.0);
    Ok(linalg::symmetrize(&(m1 + m2)))
}

/// The ULL increment with `C = HPHᵀ + sX̂ + R`.
pub fn ull_increment(
    extent_mean: &DMatrix<f64>,
    kin_prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
) -> Result<DMatrix<f64>> {
    check_dims(kin_prior, model, b)?;
    let h = &model.h;
    let spread = b.spread_about(&(h * &kin_prior.mean));
    let c = linalg::symmetrize(&(h * &kin_prior.cov * h.transpose() + model.noise_cov(extent_mean)));
    linearized_increment(extent_mean, model.s, &c, &spread, b.count())
}

/// The LLL increment with `C = sX̂ + R`, spread taken about `H x̂`.
pub fn lll_increment(
    extent_mean: &DMatrix<f64>,
    model: &EttModel,
    b: &MeasurementBatch,
    nominal: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if nominal.len() != model.state_dim() || b.dim() != model.meas_dim() {
        return Err(Error::InvalidInput("nominal state or batch has wrong dimension".into()));
    }
    let spread = b.spread_about(&(&model.h * nominal));
    let c = model.noise_cov(extent_mean);
    linearized_increment(extent_mean, model.s, &c, &spread, b.count())
}

pub fn ffk_extent_update(
    prior: &ExtentBelief,
    kin_prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
) -> Result<ExtentUpdate> {
    let xm = require_mean(prior)?;
    let inc = ffk_increment(&xm, kin_prior, model, b)?;
    apply_increment(prior, b.count(), &inc)
}

pub fn ull_extent_update(
    prior: &ExtentBelief,
    kin_prior: &KinematicBelief,
    model: &EttModel,
    b: &MeasurementBatch,
) -> Result<ExtentUpdate> {
    let xm = require_mean(prior)?;
    let inc = ull_increment(&xm, kin_prior, model, b)?;
    apply_increment(prior, b.count(), &inc)
}

pub fn lll_extent_update(
    prior: &ExtentBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    nominal: &DVector<f64>,
) -> Result<ExtentUpdate> {
    let xm = require_mean(prior)?;
    let inc = lll_increment(&xm, model, b, nominal)?;
    apply_increment(prior, b.count(), &inc)
}

/// Per-point Gaussian factor `N(yʲ; Hx, sX̂ + R)` of the factorized likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFactor {
    pub h: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub points: Vec<DVector<f64>>,
}

impl GaussianFactor {
    /// `−2 Σ log N(yʲ; Hx, sX̂ + R)` without the `2π` terms.
    pub fn neg2_log(&self, x: &DVector<f64>) -> Result<f64> {
        let hx = &self.h * x;
        let chol = linalg::symmetrize(&self.cov)
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("factor covariance singular".into()))?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(self
            .points
            .iter()
            .map(|y| {
                let e = y - &hx;
                logdet + e.dot(&chol.solve(&e))
            })
            .sum())
    }
}

/// Inverse-Wishart factor `IW(X; m, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartFactor {
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

impl WishartFactor {
    /// `−2 log IW(X; m, M)` up to the normalizer: `m log|X| + tr(M X⁻¹)`.
    pub fn neg2_log(&self, x: &DMatrix<f64>) -> Result<f64> {
        let logdet = linalg::log_det_spd(x, "X")?;
        let xinv_m = linalg::spd_solve(x, &self.scale, "X")?;
        Ok(self.dof * logdet + xinv_m.trace())
    }
}

/// Factorization of the measurement likelihood around `(x̂, X̂)` into
/// independent kinematic and extent factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub gaussian: GaussianFactor,
    pub wishart: WishartFactor,
}

impl Factorization {
    /// `−2 log` of the approximate likelihood, up to an additive constant.
    pub fn neg2_log(&self, x: &DVector<f64>, extent: &DMatrix<f64>) -> Result<f64> {
        Ok(self.gaussian.neg2_log(x)? + self.wishart.neg2_log(extent)?)
    }
}

pub fn lemma2_factorize(
    model: &EttModel,
    b: &MeasurementBatch,
    nominal: &DVector<f64>,
    extent_nominal: &DMatrix<f64>,
) -> Result<Factorization> {
    let xh = linalg::checked_spd(extent_nominal, "X̂")?;
    let inc = lll_increment(&xh, model, b, nominal)?;
    Ok(Factorization {
        gaussian: GaussianFactor {
            h: model.h.clone(),
            cov: model.noise_cov(&xh),
            points: b.points().to_vec(),
        },
        wishart: WishartFactor { dof: b.count() as f64, scale: inc },
    })
}

/// Exact `−2 Σ log N(yʲ; Hx, sX + R)` without the `2π` terms.
pub fn exact_neg2_loglik(model: &EttModel, b: &MeasurementBatch, x: &DVector<f64>, extent: &DMatrix<f64>) -> Result<f64> {
    GaussianFactor { h: model.h.clone(), cov: model.noise_cov(extent), points: b.points().to_vec() }.neg2_log(x)
}

/// `F₁ = (Z + sR⁻¹)⁻ᵀ`, the gradient of `log|sI + Z^{1/2} R Z^{1/2}|`.
pub fn grad_f1(z: &DMatrix<f64>, s: f64, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rinv = linalg::spd_inverse(r, "R")?;
    let sum = z + rinv * s;
    let inv = sum
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("Z + sR⁻¹ is singular".into()))?;
    Ok(inv.transpose())
}

/// `F₂ = s[Z⁻¹(sZ⁻¹+R)⁻¹N(sZ⁻¹+R)⁻¹Z⁻¹]ᵀ`, the gradient of `tr(N(sZ⁻¹+R)⁻¹)`.
pub fn grad_f2(z: &DMatrix<f64>, s: f64, r: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let zinv = z
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("Z is singular".into()))?;
    let w = (&zinv * s + r)
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("sZ⁻¹ + R is singular".into()))?;
    Ok((&zinv * &w * n * &w * &zinv * s).transpose())
}

/// Kalman prediction plus exponential forgetting of the extent belief.
/// The forgotten dof is floored at `2d + 3`; the extent mean is preserved.
pub fn time_update(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    motion: &MotionModel,
) -> Result<(KinematicBelief, ExtentBelief)> {
    if motion.a.ncols() != kin.dim() {
        return Err(Error::InvalidInput("motion model does not match state dimension".into()));
    }
    let mean = &motion.a * &kin.mean;
    let cov = linalg::symmetrize(&(&motion.a * &kin.cov * motion.a.transpose() + &motion.q));
    let d = ext.dim() as f64;
    let old = ext.dof - 2.0 * d - 2.0;
    if !(old > 0.0) {
        return Err(Error::MeanUndefined { dof: ext.dof, dim: ext.dim() });
    }
    let dof = ((-motion.tau / motion.tau0).exp() * ext.dof).max(2.0 * d + 3.0);
    let scale = &ext.scale * ((dof - 2.0 * d - 2.0) / old);
    Ok((KinematicBelief { mean, cov }, ExtentBelief { dof, scale }))
}

/// Extent update rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ffk,
    Ull,
    Lll,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ffk => "FFK",
            Method::Ull => "ULL",
            Method::Lll => "LLL",
        }
    }

    pub fn updater(self) -> &'static dyn MeasurementUpdater {
        match self {
            Method::Ffk => &FfkUpdate,
            Method::Ull => &UllUpdate,
            Method::Lll => &LllUpdate,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ffk" => Ok(Method::Ffk),
            "ull" => Ok(Method::Ull),
            "lll" => Ok(Method::Lll),
            other => Err(Error::Config(format!("unknown method {other:?} (expected ffk, ull or lll)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Posterior after a joint measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub kinematic: KinematicBelief,
    pub extent: ExtentBelief,
    pub repaired: bool,
}

/// A full measurement update of the kinematic and extent beliefs. Other
/// extent estimators (variational ones, for instance) plug in here.
pub trait MeasurementUpdater: Sync {
    fn name(&self) -> &'static str;

    fn update(
        &self,
        kin: &KinematicBelief,
        ext: &ExtentBelief,
        model: &EttModel,
        b: &MeasurementBatch,
    ) -> Result<UpdateOutcome>;
}

fn joint_update(
    kin: &KinematicBelief,
    ext: &ExtentBelief,
    model: &EttModel,
    b: &MeasurementBatch,
    extent: impl FnOnce(&DMatrix<f64>) -> Result<DMatrix<f64>>,
) -> Result<UpdateOutcome> {
    let xm = ext.mean()?;
    let kinematic = kinematic_update(kin, model, b, &xm)?;
    let inc = extent(&xm)?;
    let up = apply_increment(ext, b.count(), &inc)?;
    Ok(UpdateOutcome { kinematic, extent: up.posterior, repaired: up.repaired })
}

pub struct FfkUpdate;
pub struct UllUpdate;
pub struct LllUpdate;

impl MeasurementUpdater for FfkUpdate {
    fn name(&self) -> &'static str {
        "FFK"
    }
    fn update(&self, kin: &KinematicBelief, ext: &ExtentBelief, model: &EttModel, b: &MeasurementBatch) -> Result<UpdateOutcome> {
        joint_update(kin, ext, model, b, |xm| ffk_increment(xm, kin, model, b))
    }
}

impl MeasurementUpdater for UllUpdate {
    fn name(&self) -> &'static str {
        "ULL"
    }
    fn update(&self, kin: &KinematicBelief, ext: &ExtentBelief, model: &EttModel, b: &MeasurementBatch) -> Result<UpdateOutcome> {
        joint_update(kin, ext, model, b, |xm| ull_increment(xm, kin, model, b))
    }
}

impl MeasurementUpdater for LllUpdate {
    fn name(&self) -> &'static str {
        "LLL"
    }
    fn update(&self, kin: &KinematicBelief, ext: &ExtentBelief, model: &EttModel, b: &MeasurementBatch) -> Result<UpdateOutcome> {
        joint_update(kin, ext, model, b, |xm| lll_increment(xm, model, b, &kin.mean))
    }
}
