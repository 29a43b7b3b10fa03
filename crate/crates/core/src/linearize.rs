//! Log-likelihood linearization with respect to sufficient statistics.
//!
//! [`linearize_wrt_transform`] expands a scalar log-likelihood to first order
//! in an invertible transform `t(x)`. The EKF measurement update and the four
//! normal / inverse-gamma linearizations are built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expfam::{
    self, Block, Family, GaussianParams, LikelihoodOffset,
};
use crate::linalg;

/// An invertible map `x ↦ t(x)` with its inverse.
pub trait InvertibleTransform {
    fn forward(&self, x: &DVector<f64>) -> DVector<f64>;
    fn inverse(&self, z: &DVector<f64>) -> DVector<f64>;
}

/// Closure pair implementing [`InvertibleTransform`].
pub struct FnTransform<F, G> {
    pub forward: F,
    pub inverse: G,
}

impl<F, G> InvertibleTransform for FnTransform<F, G>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.forward)(x)
    }
    fn inverse(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.inverse)(z)
    }
}

/// Elementwise scalar transform applied to every component.
pub struct ScalarTransform {
    forward: fn(f64) -> f64,
    inverse: fn(f64) -> f64,
}

impl ScalarTransform {
    pub const IDENTITY: Self = Self { forward: |x| x, inverse: |z| z };
    pub const LOG: Self = Self { forward: f64::ln, inverse: f64::exp };
    pub const RECIPROCAL: Self = Self { forward: |x| 1.0 / x, inverse: |z| 1.0 / z };
}

impl InvertibleTransform for ScalarTransform {
    fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(self.forward)
    }
    fn inverse(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(self.inverse)
    }
}

/// `L(x) ≈ L(x̂) + Φ·(t(x) − t(x̂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationResult {
    /// `L(x̂)`.
    pub offset: f64,
    /// `Φ = ∇_z L(t⁻¹(z))` at `z = t(x̂)`.
    pub gradient: DVector<f64>,
    pub nominal: DVector<f64>,
    pub nominal_t: DVector<f64>,
}

impl LinearizationResult {
    /// Value of the linear approximation at a transformed point `z = t(x)`.
    pub fn evaluate_t(&self, z: &DVector<f64>) -> f64 {
        self.offset + self.gradient.dot(&(z - &self.nominal_t))
    }

    pub fn evaluate(&self, t: &dyn InvertibleTransform, x: &DVector<f64>) -> f64 {
        self.evaluate_t(&t.forward(x))
    }
}

/// Finite-difference step for component value `z`.
pub fn fd_step(z: f64) -> f64 {
    (1e-6 * z.abs()).max(1e-6)
}

/// Linearizes `loglik` with respect to `t` about `nominal`.
///
/// `analytic`, when given, is the gradient of `z ↦ loglik(t⁻¹(z))` and is used
/// instead of central finite differences.
pub fn linearize_wrt_transform(
    loglik: &dyn Fn(&DVector<f64>) -> f64,
    t: &dyn InvertibleTransform,
    nominal: &DVector<f64>,
    analytic: Option<&dyn Fn(&DVector<f64>) -> DVector<f64>>,
) -> Result<LinearizationResult> {
    let offset = loglik(nominal);
    if !offset.is_finite() {
        return Err(Error::NumericalFailure(format!("log-likelihood not finite at {nominal:?}")));
    }
    let z0 = t.forward(nominal);
    let gradient = match analytic {
        Some(g) => g(&z0),
        None => {
            let q = |z: &DVector<f64>| loglik(&t.inverse(z));
            let mut grad = DVector::zeros(z0.len());
            for i in 0..z0.len() {
                let h = fd_step(z0[i]);
                let mut zp = z0.clone();
                let mut zm = z0.clone();
                zp[i] += h;
                zm[i] -= h;
                let (fp, fm) = (q(&zp), q(&zm));
                if !fp.is_finite() || !fm.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite log-likelihood in difference stencil for component {i}"
                    )));
                }
                grad[i] = (fp - fm) / (2.0 * h);
            }
            grad
        }
    };
    if gradient.len() != z0.len() || gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("gradient has wrong shape or is not finite".into()));
    }
    Ok(LinearizationResult { offset, gradient, nominal: nominal.clone(), nominal_t: z0 })
}

/// EKF measurement update in extended information form.
///
/// `jacobian` is `∂c/∂x` (d×n) evaluated at the prior mean, which is also the
/// linearization point.
pub fn ekf_measurement_update(
    prior: &GaussianParams,
    c: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jacobian: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<GaussianParams> {
    let r = linalg::checked_spd(r, "measurement noise R")?;
    let n = prior.dim();
    if jacobian.ncols() != n || jacobian.nrows() != y.len() || r.nrows() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "Jacobian {}x{}, R {}x{}, y {} incompatible with state dimension {n}",
            jacobian.nrows(),
            jacobian.ncols(),
            r.nrows(),
            r.ncols(),
            y.len()
        )));
    }
    let mu = &prior.mean;
    // c(x) ≈ c(μ) + J(x − μ)  ⇒  λ = (Jᵀ R⁻¹ (y − c(μ) + Jμ), −½ Jᵀ R⁻¹ J)
    let pseudo = y - c(mu) + jacobian * mu;
    let rinv_j = linalg::spd_solve(&r, jacobian, "R")?;
    let rinv_pseudo = linalg::spd_solve_vec(&r, &pseudo, "R")?;
    let offset = LikelihoodOffset::new(
        Family::Gaussian { dim: n },
        vec![
            Block::Vector(jacobian.transpose() * rinv_pseudo),
            Block::Matrix(jacobian.transpose() * rinv_j * -0.5),
        ],
    )?;
    let eta = expfam::gaussian_to_natural(prior)?;
    let post = expfam::conjugate_update(&eta, &offset)?;
    expfam::natural_to_gaussian(&post)
}

/// Inverse-gamma parameters `IGamma(x; α, β) ∝ x^{−α−1} e^{−β/x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl IGammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma needs α > 0 and β > 0, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }
}

/// Choice of linearization point for the normal / inverse-gamma model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Nominal {
    /// `x̂ = α/β`, the point the derivation proposes.
    #[default]
    ShapeOverScale,
    /// `x̂ = β/(α − 1)`, the actual inverse-gamma mean (needs α > 1).
    PriorMean,
    At(f64),
}

impl Nominal {
    pub fn resolve(self, prior: &IGammaParams) -> Result<f64> {
        let x = match self {
            Nominal::ShapeOverScale => prior.shape / prior.scale,
            Nominal::PriorMean => {
                if prior.shape <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "inverse-gamma mean undefined for α = {}",
                        prior.shape
                    )));
                }
                prior.scale / (prior.shape - 1.0)
            }
            Nominal::At(x) => x,
        };
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidParameter(format!("linearization point {x} must be positive")));
        }
        Ok(x)
    }
}

/// Whether the approximate posterior is proper for every measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorPropriety {
    /// Proper for every `y` whenever `x̂ > 0`.
    Always,
    /// Proper only for some `y`.
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionOffset {
    /// 1-based solution number.
    pub solution: u8,
    /// Offset against `T(x) = (log x, 1/x)`.
    pub offset: LikelihoodOffset,
    pub y_integrable: bool,
    pub posterior: PosteriorPropriety,
}

impl SolutionOffset {
    pub fn log_x(&self) -> f64 {
        self.offset.block(0).as_scalar().expect("layout")
    }

    pub fn inv_x(&self) -> f64 {
        self.offset.block(1).as_scalar().expect("layout")
    }
}

fn igamma_offset(log_x: f64, inv_x: f64) -> LikelihoodOffset {
    LikelihoodOffset::new(Family::InverseGamma, vec![Block::Scalar(log_x), Block::Scalar(inv_x)])
        .expect("fixed layout")
}

/// `−2·log N(y; 0, x + σ²)` up to a constant.
pub fn normal_igamma_neg2_loglik(x: f64, noise_var: f64, y: f64) -> f64 {
    (x + noise_var).ln() + y * y / (x + noise_var)
}

/// The four linearizations of `log N(y; 0, x + σ²)` against the
/// inverse-gamma statistic `(log x, 1/x)`, as offsets on the log-likelihood
/// (`−½` times the coefficients of the `−2·log` expansion).
pub fn igamma_solution_offsets(
    prior: &IGammaParams,
    noise_var: f64,
    y: f64,
    nominal: Nominal,
) -> Result<[SolutionOffset; 4]> {
    let xh = nominal.resolve(prior)?;
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be positive")));
    }
    if !y.is_finite() {
        return Err(Error::InvalidParameter("measurement is not finite".into()));
    }
    let a = xh + noise_var;
    let y2 = y * y;

    // Whole log-likelihood in log x.
    let s1 = xh / a - y2 * xh / (a * a);
    // Whole log-likelihood in 1/x.
    let s2 = -xh * xh / a + y2 * xh * xh / (a * a);
    // log-term in log x, quadratic term in 1/x.
    let s3 = (xh / a, y2 * xh * xh / (a * a));
    // log x split off exactly, the rest in 1/x.
    let s4 = (1.0, noise_var * xh / a + y2 * xh * xh / (a * a));

    Ok([
        SolutionOffset {
            solution: 1,
            offset: igamma_offset(-0.5 * s1, 0.0),
            y_integrable: false,
            posterior: PosteriorPropriety::Conditional,
        },
        SolutionOffset {
            solution: 2,
            offset: igamma_offset(0.0, -0.5 * s2),
            y_integrable: true,
            posterior: PosteriorPropriety::Conditional,
        },
        SolutionOffset {
            solution: 3,
            offset: igamma_offset(-0.5 * s3.0, -0.5 * s3.1),
            y_integrable: true,
            posterior: PosteriorPropriety::Always,
        },
        SolutionOffset {
            solution: 4,
            offset: igamma_offset(-0.5 * s4.0, -0.5 * s4.1),
            y_integrable: true,
            posterior: PosteriorPropriety::Always,
        },
    ])
}

/// Exponent of `x` in the first solution's approximate likelihood,
/// `−x̂(x̂ + σ² − y²) / (2(x̂ + σ²)²)`; positive once `y² > x̂ + σ²`.
pub fn solution1_y_exponent(nominal: f64, noise_var: f64, y: f64) -> f64 {
    let a = nominal + noise_var;
    -nominal * (a - y * y) / (2.0 * a * a)
}

/// Inverse-gamma posterior `α′ = α − λ_log x`, `β′ = β − λ_1/x`.
pub fn igamma_posterior(prior: &IGammaParams, offset: &LikelihoodOffset) -> Result<IGammaParams> {
    let eta = expfam::inverse_gamma_to_natural(prior.shape, prior.scale)?;
    let post = expfam::conjugate_update(&eta, offset)?;
    let (shape, scale) = expfam::scalar_shape_and_scale(&post)?;
    Ok(IGammaParams { shape, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn linear_function_is_its_own_linearization() {
        let l = |x: &DVector<f64>| x[0];
        let r = linearize_wrt_transform(&l, &ScalarTransform::IDENTITY, &v(&[5.0]), None).unwrap();
        assert!((r.gradient[0] - 1.0).abs() < 1e-9);
        for x in [-3.0, 0.0, 11.0] {
            assert!((r.evaluate(&ScalarTransform::IDENTITY, &v(&[x])) - x).abs() < 1e-7);
        }
    }

    #[test]
    fn log_is_linear_in_log() {
        let l = |x: &DVector<f64>| x[0].ln();
        let r = linearize_wrt_transform(&l, &ScalarTransform::LOG, &v(&[2.0]), None).unwrap();
        assert!((r.gradient[0] - 1.0).abs() < 1e-9);
        assert_eq!(r.offset, 2f64.ln());
    }

    #[test]
    fn reciprocal_gradient_matches_closed_form() {
        let (s2, y) = (1.0, 2.0);
        let l = |x: &DVector<f64>| normal_igamma_neg2_loglik(x[0], s2, y);
        let xh = 1.0;
        let r = linearize_wrt_transform(&l, &ScalarTransform::RECIPROCAL, &v(&[xh]), None).unwrap();
        let want = -xh * xh / (xh + s2) + y * y * xh * xh / (xh + s2).powi(2);
        assert!((r.gradient[0] - want).abs() < 1e-6);
    }

    #[test]
    fn analytic_gradient_takes_precedence() {
        let l = |x: &DVector<f64>| x[0] * x[0];
        let g = |_z: &DVector<f64>| v(&[42.0]);
        let r = linearize_wrt_transform(&l, &ScalarTransform::IDENTITY, &v(&[1.0]), Some(&g)).unwrap();
        assert_eq!(r.gradient[0], 42.0);
    }

    #[test]
    fn non_finite_stencil_fails() {
        let l = |x: &DVector<f64>| if x[0] > 1.0 { f64::NAN } else { x[0] };
        let r = linearize_wrt_transform(&l, &ScalarTransform::IDENTITY, &v(&[1.0]), None);
        assert!(matches!(r, Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn ekf_scalar_identity() {
        let prior = GaussianParams::new(v(&[0.0]), DMatrix::identity(1, 1)).unwrap();
        let c = |x: &DVector<f64>| x.clone();
        let post =
            ekf_measurement_update(&prior, &c, &DMatrix::identity(1, 1), &DMatrix::identity(1, 1), &v(&[2.0])).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-14);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ekf_rejects_bad_noise() {
        let prior = GaussianParams::new(v(&[0.0]), DMatrix::identity(1, 1)).unwrap();
        let c = |x: &DVector<f64>| x.clone();
        let r = ekf_measurement_update(&prior, &c, &DMatrix::identity(1, 1), &DMatrix::from_element(1, 1, -1.0), &v(&[2.0]));
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn ekf_range_measurement() {
        let prior = GaussianParams::new(v(&[3.0, 4.0]), DMatrix::identity(2, 2)).unwrap();
        let c = |x: &DVector<f64>| v(&[x.norm()]);
        let j = DMatrix::from_row_slice(1, 2, &[0.6, 0.8]);
        let r = DMatrix::from_element(1, 1, 0.01);
        let post = ekf_measurement_update(&prior, &c, &j, &r, &v(&[5.1])).unwrap();
        // Direct evaluation of the information-form posterior.
        let info = DMatrix::identity(2, 2) + j.transpose() * &j / 0.01;
        let rhs = v(&[3.0, 4.0]) + j.transpose() * (5.1 - 5.0 + 0.6 * 3.0 + 0.8 * 4.0) / 0.01;
        let cov = info.try_inverse().unwrap();
        let mean = &cov * rhs;
        assert!(linalg::vec_rel(&post.mean, &mean) < 1e-12);
        assert!(linalg::frobenius_rel(&post.cov, &cov) < 1e-12);
    }

    #[test]
    fn solution3_and_4_values() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let s = igamma_solution_offsets(&prior, 1.0, 2.0, Nominal::At(1.0)).unwrap();
        assert!((s[2].log_x() + 0.25).abs() < 1e-15);
        assert!((s[2].inv_x() + 0.5).abs() < 1e-15);
        let s = igamma_solution_offsets(&prior, 1.0, 0.0, Nominal::At(1.0)).unwrap();
        assert_eq!(s[3].log_x(), -0.5);
        assert!((s[3].inv_x() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn solution_flags() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let s = igamma_solution_offsets(&prior, 1.0, 1.0, Nominal::default()).unwrap();
        assert!(!s[0].y_integrable);
        assert_eq!(s[1].posterior, PosteriorPropriety::Conditional);
        assert_eq!(s[2].posterior, PosteriorPropriety::Always);
        assert_eq!(s[3].posterior, PosteriorPropriety::Always);
    }

    #[test]
    fn nominal_policies() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        assert_eq!(Nominal::default().resolve(&prior).unwrap(), 1.5);
        assert_eq!(Nominal::PriorMean.resolve(&prior).unwrap(), 1.0);
        assert!(Nominal::At(0.0).resolve(&prior).is_err());
        assert!(igamma_solution_offsets(&prior, 1.0, 1.0, Nominal::At(-1.0)).is_err());
    }

    #[test]
    fn zero_offset_keeps_prior() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let post = igamma_posterior(&prior, &LikelihoodOffset::zero(Family::InverseGamma)).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn solution2_small_y_is_improper() {
        let prior = IGammaParams::new(3.0, 0.05).unwrap();
        let s = igamma_solution_offsets(&prior, 1.0, 0.0, Nominal::At(1.0)).unwrap();
        // (0 − 1 − 1) / (2·4) = −0.25 < −β
        assert!((s[1].inv_x() - 0.25).abs() < 1e-15);
        assert!(matches!(igamma_posterior(&prior, &s[1].offset), Err(Error::PosteriorImproper(_))));
    }

    #[test]
    fn solution1_exponent_sign() {
        let (xh, s2) = (1.0, 1.0);
        assert!(solution1_y_exponent(xh, s2, 0.0) < 0.0);
        assert!(solution1_y_exponent(xh, s2, 1.5) > 0.0);
        // agrees with −½ times the printed log x coefficient
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let s = igamma_solution_offsets(&prior, s2, 3.0, Nominal::At(xh)).unwrap();
        assert!((s[0].log_x() - solution1_y_exponent(xh, s2, 3.0)).abs() < 1e-15);
    }
}
