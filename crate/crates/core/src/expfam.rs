//! Exponential-family densities in natural form, `h(x) exp(η·T(x) − A(η))`.
//!
//! A [`NaturalParam`] is an ordered list of labelled blocks whose layout is
//! fixed by its [`Family`]. Likelihood offsets ([`LikelihoodOffset`]) share the
//! same layout; a conjugate update is the blockwise sum of the two, followed by
//! a membership test against the family's natural parameter space.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Families with an explicit sufficient-statistic schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `T(x) = (x, x xᵀ)`, `x ∈ ℝᵈ`.
    Gaussian { dim: usize },
    /// `T(X) = (log|X|, X⁻¹)`, `X` a d×d SPD matrix.
    InverseWishart { dim: usize },
    /// `T(x) = (log x, x)`, `x > 0`.
    Gamma,
    /// `T(x) = (log x, 1/x)`, `x > 0`.
    InverseGamma,
    /// `T(x) = (x², x, cos x, sin x)`, `x ∈ ℝ`.
    Trig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockShape {
    Scalar,
    Vector(usize),
    Matrix(usize),
}

/// Domain of the latent variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RealLine,
    PositiveReals,
    Euclidean(usize),
    SpdMatrices(usize),
}

impl Family {
    /// Ordered `(label, shape)` pairs of the sufficient statistic.
    pub fn schema(&self) -> Vec<(&'static str, BlockShape)> {
        match *self {
            Family::Gaussian { dim } => {
                vec![("x", BlockShape::Vector(dim)), ("x_xT", BlockShape::Matrix(dim))]
            }
            Family::InverseWishart { dim } => {
                vec![("log_det_X", BlockShape::Scalar), ("X_inv", BlockShape::Matrix(dim))]
            }
            Family::Gamma => vec![("log_x", BlockShape::Scalar), ("x", BlockShape::Scalar)],
            Family::InverseGamma => {
                vec![("log_x", BlockShape::Scalar), ("inv_x", BlockShape::Scalar)]
            }
            Family::Trig => vec![
                ("x_sq", BlockShape::Scalar),
                ("x", BlockShape::Scalar),
                ("cos_x", BlockShape::Scalar),
                ("sin_x", BlockShape::Scalar),
            ],
        }
    }

    pub fn support(&self) -> Support {
        match *self {
            Family::Gaussian { dim: 1 } | Family::Trig => Support::RealLine,
            Family::Gaussian { dim } => Support::Euclidean(dim),
            Family::InverseWishart { dim } => Support::SpdMatrices(dim),
            Family::Gamma | Family::InverseGamma => Support::PositiveReals,
        }
    }

    /// `log h(x)` for the base measure used by this crate's parameterizations.
    pub fn log_base_measure(&self) -> f64 {
        match *self {
            Family::Gaussian { dim } => -0.5 * dim as f64 * (2.0 * PI).ln(),
            _ => 0.0,
        }
    }

    /// Checks that `η` lies in the natural parameter space Ω of the family.
    fn check_natural_space(&self, blocks: &[(&'static str, Block)]) -> std::result::Result<(), String> {
        match *self {
            Family::Gaussian { .. } => {
                let eta2 = blocks[1].1.as_matrix().expect("schema checked");
                if linalg::is_spd(&(-eta2)) {
                    Ok(())
                } else {
                    Err("Gaussian x_xT block is not negative definite".into())
                }
            }
            Family::InverseWishart { dim } => {
                let eta1 = blocks[0].1.as_scalar().expect("schema checked");
                let nu = -2.0 * eta1;
                if !(nu > 2.0 * dim as f64) {
                    return Err(format!("inverse-Wishart dof {nu} must exceed 2d = {}", 2 * dim));
                }
                let eta2 = blocks[1].1.as_matrix().expect("schema checked");
                if linalg::is_spd(&(-eta2)) {
                    Ok(())
                } else {
                    Err("inverse-Wishart X_inv block is not negative definite".into())
                }
            }
            Family::Gamma => {
                let a = blocks[0].1.as_scalar().unwrap() + 1.0;
                let b = -blocks[1].1.as_scalar().unwrap();
                if a > 0.0 && b > 0.0 {
                    Ok(())
                } else {
                    Err(format!("gamma shape {a} and rate {b} must be positive"))
                }
            }
            Family::InverseGamma => {
                let a = -blocks[0].1.as_scalar().unwrap() - 1.0;
                let b = -blocks[1].1.as_scalar().unwrap();
                if a > 0.0 && b > 0.0 {
                    Ok(())
                } else {
                    Err(format!("inverse-gamma shape {a} and scale {b} must be positive"))
                }
            }
            Family::Trig => {
                let q = blocks[0].1.as_scalar().unwrap();
                if q < 0.0 {
                    Ok(())
                } else {
                    Err(format!("x_sq coefficient {q} must be negative"))
                }
            }
        }
    }
}

/// One block of a natural parameter or sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Block {
    pub fn shape(&self) -> BlockShape {
        match self {
            Block::Scalar(_) => BlockShape::Scalar,
            Block::Vector(v) => BlockShape::Vector(v.len()),
            Block::Matrix(m) if m.is_square() => BlockShape::Matrix(m.nrows()),
            // Non-square matrices never match a schema entry.
            Block::Matrix(_) => BlockShape::Matrix(usize::MAX),
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Block::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            Block::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Block::Matrix(m) => Some(m),
            _ => None,
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Block) -> f64 {
        match (self, other) {
            (Block::Scalar(a), Block::Scalar(b)) => a * b,
            (Block::Vector(a), Block::Vector(b)) => a.dot(b),
            (Block::Matrix(a), Block::Matrix(b)) => a.dot(b),
            _ => panic!("block shape mismatch in dot product"),
        }
    }

    fn add(&self, other: &Block) -> Block {
        match (self, other) {
            (Block::Scalar(a), Block::Scalar(b)) => Block::Scalar(a + b),
            (Block::Vector(a), Block::Vector(b)) => Block::Vector(a + b),
            (Block::Matrix(a), Block::Matrix(b)) => Block::Matrix(linalg::symmetrize(&(a + b))),
            _ => panic!("block shape mismatch in addition"),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Block::Scalar(v) => v.is_finite(),
            Block::Vector(v) => v.iter().all(|x| x.is_finite()),
            Block::Matrix(m) => m.iter().all(|x| x.is_finite()),
        }
    }
}

/// Checks the layout against the family schema and symmetrizes matrix blocks.
fn conform(family: Family, blocks: Vec<Block>) -> Result<Vec<(&'static str, Block)>> {
    let schema = family.schema();
    if schema.len() != blocks.len() {
        return Err(Error::SchemaMismatch(format!(
            "{family:?} expects {} blocks, got {}",
            schema.len(),
            blocks.len()
        )));
    }
    schema
        .into_iter()
        .zip(blocks)
        .map(|((label, shape), block)| {
            if block.shape() != shape {
                return Err(Error::SchemaMismatch(format!(
                    "block {label} of {family:?} expects {shape:?}, got {:?}",
                    block.shape()
                )));
            }
            if !block.is_finite() {
                return Err(Error::InvalidParameter(format!("block {label} is not finite")));
            }
            let block = match block {
                Block::Matrix(m) => Block::Matrix(linalg::checked_symmetric(&m, label)?),
                other => other,
            };
            Ok((label, block))
        })
        .collect()
}

/// A point in the support of a family.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

/// Sufficient statistic evaluator, laid out like the family's natural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SufficientStat {
    pub family: Family,
}

impl SufficientStat {
    pub fn new(family: Family) -> Self {
        Self { family }
    }

    pub fn labels(&self) -> Vec<&'static str> {
        self.family.schema().into_iter().map(|(l, _)| l).collect()
    }

    pub fn evaluate(&self, point: &Point) -> Result<Vec<Block>> {
        let bad = || Error::InvalidInput(format!("{point:?} is outside the support of {:?}", self.family));
        match (self.family, point) {
            (Family::Gaussian { dim: 1 }, Point::Scalar(x)) => {
                Ok(vec![Block::Vector(DVector::from_element(1, *x)), Block::Matrix(DMatrix::from_element(1, 1, x * x))])
            }
            (Family::Gaussian { dim }, Point::Vector(x)) if x.len() == dim => {
                Ok(vec![Block::Vector(x.clone()), Block::Matrix(x * x.transpose())])
            }
            (Family::InverseWishart { dim }, Point::Matrix(x)) if x.nrows() == dim => {
                let x = linalg::checked_spd(x, "X").map_err(|_| bad())?;
                let logdet = linalg::log_det_spd(&x, "X")?;
                Ok(vec![Block::Scalar(logdet), Block::Matrix(linalg::spd_inverse(&x, "X")?)])
            }
            (Family::Gamma, Point::Scalar(x)) if *x > 0.0 => {
                Ok(vec![Block::Scalar(x.ln()), Block::Scalar(*x)])
            }
            (Family::InverseGamma, Point::Scalar(x)) if *x > 0.0 => {
                Ok(vec![Block::Scalar(x.ln()), Block::Scalar(1.0 / x)])
            }
            (Family::Trig, Point::Scalar(x)) => Ok(vec![
                Block::Scalar(x * x),
                Block::Scalar(*x),
                Block::Scalar(x.cos()),
                Block::Scalar(x.sin()),
            ]),
            _ => Err(bad()),
        }
    }
}

/// Block-structured natural parameter of an exponential-family density.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParam {
    family: Family,
    blocks: Vec<(&'static str, Block)>,
}

impl NaturalParam {
    /// Builds a natural parameter, checking layout and membership in Ω.
    pub fn new(family: Family, blocks: Vec<Block>) -> Result<Self> {
        let blocks = conform(family, blocks)?;
        family
            .check_natural_space(&blocks)
            .map_err(Error::InvalidParameter)?;
        Ok(Self { family, blocks })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn blocks(&self) -> &[(&'static str, Block)] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i].1
    }

    /// `η·T(x)`.
    pub fn dot_stat(&self, stat: &[Block]) -> f64 {
        self.blocks.iter().zip(stat).map(|((_, a), b)| a.dot(b)).sum()
    }

    /// `log h(x) + η·T(x)`, the log-density up to `A(η)`.
    pub fn log_unnormalized(&self, point: &Point) -> Result<f64> {
        let t = SufficientStat::new(self.family).evaluate(point)?;
        Ok(self.family.log_base_measure() + self.dot_stat(&t))
    }
}

impl fmt::Display for NaturalParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(", self.family)?;
        for (i, (label, block)) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match block {
                Block::Scalar(v) => write!(f, "{label}={v}")?,
                Block::Vector(v) => write!(f, "{label}={:?}", v.as_slice())?,
                Block::Matrix(m) => write!(f, "{label}={:?}", m.as_slice())?,
            }
        }
        write!(f, ")")
    }
}

/// The `λ(Y)` term a conjugate likelihood adds to the prior natural parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodOffset {
    family: Family,
    blocks: Vec<(&'static str, Block)>,
}

impl LikelihoodOffset {
    /// Only the layout is checked; offsets need not lie in Ω.
    pub fn new(family: Family, blocks: Vec<Block>) -> Result<Self> {
        Ok(Self { family, blocks: conform(family, blocks)? })
    }

    pub fn zero(family: Family) -> Self {
        let blocks = family
            .schema()
            .into_iter()
            .map(|(label, shape)| {
                let b = match shape {
                    BlockShape::Scalar => Block::Scalar(0.0),
                    BlockShape::Vector(n) => Block::Vector(DVector::zeros(n)),
                    BlockShape::Matrix(n) => Block::Matrix(DMatrix::zeros(n, n)),
                };
                (label, b)
            })
            .collect();
        Self { family, blocks }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn blocks(&self) -> &[(&'static str, Block)] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i].1
    }

    /// Blockwise sum of two offsets of the same family.
    pub fn combine(&self, other: &LikelihoodOffset) -> Result<LikelihoodOffset> {
        if self.family != other.family {
            return Err(Error::SchemaMismatch(format!(
                "cannot add {:?} offset to {:?} offset",
                other.family, self.family
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|((l, a), (_, b))| (*l, a.add(b)))
            .collect();
        Ok(Self { family: self.family, blocks })
    }

    /// `λ·T(x)`.
    pub fn dot_stat(&self, stat: &[Block]) -> f64 {
        self.blocks.iter().zip(stat).map(|((_, a), b)| a.dot(b)).sum()
    }
}

/// Mean and covariance of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{} but mean has length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        let cov = linalg::checked_spd(&cov, "covariance")?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Inverse-Wishart parameters with density ∝ `|X|^{−ν/2} exp(tr(−½ V X⁻¹))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvWishartParams {
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

impl InvWishartParams {
    pub fn new(dof: f64, scale: DMatrix<f64>) -> Result<Self> {
        let scale = linalg::checked_spd(&scale, "inverse-Wishart scale")?;
        let d = scale.nrows();
        if !(dof > 2.0 * d as f64) || !dof.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inverse-Wishart dof {dof} must exceed 2d = {}",
                2 * d
            )));
        }
        Ok(Self { dof, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }
}

/// `(Σ⁻¹μ, −½Σ⁻¹)`.
pub fn gaussian_to_natural(p: &GaussianParams) -> Result<NaturalParam> {
    let cov = linalg::checked_spd(&p.cov, "covariance")?;
    let chol = cov.cholesky().expect("checked SPD");
    let eta1 = chol.solve(&p.mean);
    let precision = linalg::symmetrize(&chol.inverse());
    NaturalParam::new(
        Family::Gaussian { dim: p.dim() },
        vec![Block::Vector(eta1), Block::Matrix(precision * -0.5)],
    )
}

/// `Σ = −½η₂⁻¹`, `μ = Ση₁`.
pub fn natural_to_gaussian(eta: &NaturalParam) -> Result<GaussianParams> {
    let Family::Gaussian { .. } = eta.family() else {
        return Err(Error::SchemaMismatch(format!("expected Gaussian, got {:?}", eta.family())));
    };
    let eta1 = eta.block(0).as_vector().expect("schema");
    let precision = eta.block(1).as_matrix().expect("schema") * -2.0;
    let chol = linalg::symmetrize(&precision)
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("x_xT block is not negative definite".into()))?;
    let mean = chol.solve(eta1);
    let cov = linalg::symmetrize(&chol.inverse());
    Ok(GaussianParams { mean, cov })
}

/// `A(η) = ½μᵀΣ⁻¹μ + ½log|Σ|`.
pub fn gaussian_log_partition(eta: &NaturalParam) -> Result<f64> {
    let p = natural_to_gaussian(eta)?;
    let eta1 = eta.block(0).as_vector().expect("schema");
    // μᵀΣ⁻¹μ = μ·η₁
    let quad = p.mean.dot(eta1);
    Ok(0.5 * quad + 0.5 * linalg::log_det_spd(&p.cov, "covariance")?)
}

/// `(−ν/2, −½V)` against `T(X) = (log|X|, X⁻¹)`.
pub fn invwishart_to_natural(p: &InvWishartParams) -> Result<NaturalParam> {
    let p = InvWishartParams::new(p.dof, p.scale.clone())?;
    NaturalParam::new(
        Family::InverseWishart { dim: p.dim() },
        vec![Block::Scalar(-0.5 * p.dof), Block::Matrix(&p.scale * -0.5)],
    )
}

pub fn natural_to_invwishart(eta: &NaturalParam) -> Result<InvWishartParams> {
    let Family::InverseWishart { .. } = eta.family() else {
        return Err(Error::SchemaMismatch(format!("expected inverse Wishart, got {:?}", eta.family())));
    };
    let dof = -2.0 * eta.block(0).as_scalar().expect("schema");
    let scale = eta.block(1).as_matrix().expect("schema") * -2.0;
    InvWishartParams::new(dof, scale)
}

/// `V / (ν − 2d − 2)`.
pub fn invwishart_mean(p: &InvWishartParams) -> Result<DMatrix<f64>> {
    let d = p.dim();
    let denom = p.dof - 2.0 * d as f64 - 2.0;
    if !(denom > 0.0) {
        return Err(Error::MeanUndefined { dof: p.dof, dim: d });
    }
    Ok(&p.scale / denom)
}

/// Natural parameter `(α − 1, −β)` of Gamma(α, β) (rate β).
pub fn gamma_to_natural(shape: f64, rate: f64) -> Result<NaturalParam> {
    NaturalParam::new(Family::Gamma, vec![Block::Scalar(shape - 1.0), Block::Scalar(-rate)])
}

/// Natural parameter `(−α − 1, −β)` of IGamma(α, β).
pub fn inverse_gamma_to_natural(shape: f64, scale: f64) -> Result<NaturalParam> {
    NaturalParam::new(Family::InverseGamma, vec![Block::Scalar(-shape - 1.0), Block::Scalar(-scale)])
}

/// Recovers `(α, β)` from a Gamma or inverse-gamma natural parameter.
pub fn scalar_shape_and_scale(eta: &NaturalParam) -> Result<(f64, f64)> {
    let e1 = eta.block(0).as_scalar().unwrap_or(f64::NAN);
    let e2 = eta.block(1).as_scalar().unwrap_or(f64::NAN);
    match eta.family() {
        Family::Gamma => Ok((e1 + 1.0, -e2)),
        Family::InverseGamma => Ok((-e1 - 1.0, -e2)),
        other => Err(Error::SchemaMismatch(format!("{other:?} is not a gamma-type family"))),
    }
}

/// Posterior natural parameter `η + λ`.
pub fn conjugate_update(prior: &NaturalParam, offset: &LikelihoodOffset) -> Result<NaturalParam> {
    if prior.family() != offset.family() {
        return Err(Error::SchemaMismatch(format!(
            "offset layout {:?} does not match prior {:?}",
            offset.family(),
            prior.family()
        )));
    }
    let blocks: Vec<_> = prior
        .blocks
        .iter()
        .zip(&offset.blocks)
        .map(|((l, a), (_, b))| (*l, a.add(b)))
        .collect();
    prior
        .family
        .check_natural_space(&blocks)
        .map_err(Error::PosteriorImproper)?;
    Ok(NaturalParam { family: prior.family, blocks })
}

/// Offset of the multimodal likelihood `exp(−(y−x)²/24 + cos(y−x))`,
/// laid out against `T(x) = (x², x, cos x, sin x)`.
pub fn sin_example_offset(y: f64) -> LikelihoodOffset {
    LikelihoodOffset::new(
        Family::Trig,
        vec![
            Block::Scalar(-1.0 / 24.0),
            Block::Scalar(y / 12.0),
            Block::Scalar(y.cos()),
            Block::Scalar(y.sin()),
        ],
    )
    .expect("fixed layout")
}

/// Minimum grid size accepted by [`normalize_scalar_density`].
pub const MIN_NORMALIZE_POINTS: usize = 1025;

/// A scalar density normalized by composite trapezoid quadrature.
pub struct NormalizedDensity<F> {
    log_density: F,
    log_normalizer: f64,
    pub interval: (f64, f64),
    pub n_points: usize,
}

impl<F: Fn(f64) -> f64> NormalizedDensity<F> {
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        (self.log_density)(x) - self.log_normalizer
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }
}

/// Uniform grid of `n` points spanning `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { b } else { a + h * i as f64 })
}

/// `log ∫ exp(f)` over `[a, b]` by the composite trapezoid rule in log space.
/// Returns `+∞` on overflow and `NaN` when the integrand is not a number.
pub fn log_trapezoid<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / (n - 1) as f64;
    let vals: Vec<f64> = uniform_grid(a, b, n).map(&log_f).collect();
    if vals.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let last = vals.len() - 1;
    let sum: f64 = vals
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            w * (v - max).exp()
        })
        .sum();
    max + (h * sum).ln()
}

/// Normalizes `exp(log_density)` on `interval` with an `n_points` trapezoid grid.
pub fn normalize_scalar_density<F: Fn(f64) -> f64>(
    log_density: F,
    interval: (f64, f64),
    n_points: usize,
) -> Result<NormalizedDensity<F>> {
    let (a, b) = interval;
    if n_points < MIN_NORMALIZE_POINTS {
        return Err(Error::InvalidParameter(format!(
            "normalization grid needs at least {MIN_NORMALIZE_POINTS} points, got {n_points}"
        )));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("bad interval [{a}, {b}]")));
    }
    if let Some(x) = uniform_grid(a, b, n_points).find(|&x| !log_density(x).is_finite() && log_density(x) != f64::NEG_INFINITY) {
        return Err(Error::NumericalFailure(format!("log-density not finite at x = {x}")));
    }
    let log_normalizer = log_trapezoid(&log_density, a, b, n_points);
    if !log_normalizer.is_finite() {
        return Err(Error::NumericalFailure("density integrates to zero or infinity".into()));
    }
    Ok(NormalizedDensity { log_density, log_normalizer, interval, n_points })
}

/// Grid points that are strict local maxima of `f` over `[a, b]`.
pub fn local_maxima<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Vec<f64> {
    let xs: Vec<f64> = uniform_grid(a, b, n).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    (1..n - 1)
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] > ys[i + 1])
        .map(|i| xs[i])
        .collect()
}

/// Outcome of a numeric integrability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Integrable,
    Divergent,
    Indeterminate,
}

impl Verdict {
    pub fn is_integrable(self) -> bool {
        self == Verdict::Integrable
    }
}

/// Numeric check of the three conjugate-likelihood conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyReport {
    /// The offset uses the prior's sufficient-statistic layout.
    pub linear_in_t: bool,
    /// `∫ exp(ℓ(y, x)) dy < ∞` at every probe `x`.
    pub likelihood_integrable_in_y: Verdict,
    /// `∫ h(x) exp((η + λ(y))·T(x)) dx < ∞` at the reference `y`.
    pub posterior_integrable_in_x: Verdict,
}

impl ConjugacyReport {
    pub fn all_hold(&self) -> bool {
        self.linear_in_t
            && self.likelihood_integrable_in_y.is_integrable()
            && self.posterior_integrable_in_x.is_integrable()
    }
}

/// An approximate scalar log-likelihood `ℓ(y, x) = λ(y)·T(x) + c(y)`.
pub struct ScalarLikelihood<'a> {
    pub offset: &'a dyn Fn(f64) -> LikelihoodOffset,
    /// Terms depending on `y` only; zero when omitted.
    pub y_term: Option<&'a dyn Fn(f64) -> f64>,
}

/// Starting half-width of the doubling sequence.
pub const DOUBLING_START: f64 = 10.0;
/// Relative growth across a doubling that counts as divergence.
pub const DOUBLING_GROWTH: f64 = 0.10;
const DOUBLING_STEPS: usize = 3;
const DOUBLING_POINTS: usize = 8193;

/// Interval-doubling integrability test of `exp(log_f)` over the real line.
/// The integral is taken over `[−L, L]` for `L = 10, 20, 40`; divergence is
/// declared when the final doubling grows it by more than 10 %.
pub fn doubling_verdict<F: Fn(f64) -> f64>(log_f: F) -> Verdict {
    let mut prev = f64::NAN;
    let mut half = DOUBLING_START;
    for step in 0..DOUBLING_STEPS {
        let cur = log_trapezoid(&log_f, -half, half, DOUBLING_POINTS);
        if cur.is_nan() {
            return Verdict::Indeterminate;
        }
        if cur == f64::INFINITY {
            return Verdict::Divergent;
        }
        if step + 1 == DOUBLING_STEPS {
            if cur == f64::NEG_INFINITY || prev == f64::NEG_INFINITY {
                return Verdict::Indeterminate;
            }
            return if cur - prev > (1.0 + DOUBLING_GROWTH).ln() {
                Verdict::Divergent
            } else {
                Verdict::Integrable
            };
        }
        prev = cur;
        half *= 2.0;
    }
    unreachable!()
}

/// Same test on the support of `family`; positive supports are mapped to the
/// real line with `x = eᵘ`.
fn support_verdict<F: Fn(f64) -> f64>(support: Support, log_f: F) -> Verdict {
    match support {
        Support::PositiveReals => doubling_verdict(|u: f64| log_f(u.exp()) + u),
        _ => doubling_verdict(log_f),
    }
}

/// Default probe points in `x` for the likelihood-in-`y` test.
pub fn default_probes(family: Family) -> Vec<f64> {
    match family.support() {
        Support::PositiveReals => vec![0.5, 2.0, 5.0],
        _ => vec![-2.0, -0.5, 0.5, 2.0],
    }
}

/// Checks the conjugate-likelihood conditions for a scalar latent variable by
/// interval-doubling quadrature.
pub fn check_conjugacy_scalar(
    prior: &NaturalParam,
    likelihood: &ScalarLikelihood<'_>,
    y_ref: f64,
    x_probes: &[f64],
) -> ConjugacyReport {
    let family = prior.family();
    let scalar = matches!(
        family,
        Family::Gaussian { dim: 1 } | Family::Gamma | Family::InverseGamma | Family::Trig
    );
    let linear_in_t = (likelihood.offset)(y_ref).family() == family;
    if !scalar || !linear_in_t {
        return ConjugacyReport {
            linear_in_t,
            likelihood_integrable_in_y: Verdict::Indeterminate,
            posterior_integrable_in_x: Verdict::Indeterminate,
        };
    }
    let stat = SufficientStat::new(family);
    let t_at = |x: f64| stat.evaluate(&Point::Scalar(x)).ok();

    let mut y_verdict = Verdict::Integrable;
    for &x in x_probes {
        let Some(t) = t_at(x) else {
            y_verdict = Verdict::Indeterminate;
            continue;
        };
        let v = doubling_verdict(|y| {
            let c = likelihood.y_term.map_or(0.0, |g| g(y));
            (likelihood.offset)(y).dot_stat(&t) + c
        });
        y_verdict = match (y_verdict, v) {
            (Verdict::Divergent, _) | (_, Verdict::Divergent) => Verdict::Divergent,
            (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => Verdict::Indeterminate,
            _ => Verdict::Integrable,
        };
    }

    let offset = (likelihood.offset)(y_ref);
    let log_h = family.log_base_measure();
    let x_verdict = support_verdict(family.support(), |x| match t_at(x) {
        Some(t) => log_h + prior.dot_stat(&t) + offset.dot_stat(&t),
        None => f64::NEG_INFINITY,
    });

    ConjugacyReport {
        linear_in_t,
        likelihood_integrable_in_y: y_verdict,
        posterior_integrable_in_x: x_verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_rel;

    fn g(mean: &[f64], cov: &[f64]) -> GaussianParams {
        let d = mean.len();
        GaussianParams::new(DVector::from_row_slice(mean), DMatrix::from_row_slice(d, d, cov)).unwrap()
    }

    #[test]
    fn gaussian_identity_case() {
        let eta = gaussian_to_natural(&g(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(eta.block(0).as_vector().unwrap(), &DVector::zeros(2));
        assert_eq!(eta.block(1).as_matrix().unwrap(), &(DMatrix::identity(2, 2) * -0.5));
        let back = natural_to_gaussian(&eta).unwrap();
        assert_eq!(back.cov, DMatrix::identity(2, 2));
    }

    #[test]
    fn gaussian_scalar_case() {
        let eta = gaussian_to_natural(&g(&[1.0], &[4.0])).unwrap();
        assert!((eta.block(0).as_vector().unwrap()[0] - 0.25).abs() < 1e-15);
        assert!((eta.block(1).as_matrix().unwrap()[(0, 0)] + 0.125).abs() < 1e-15);
        let eta = NaturalParam::new(
            Family::Gaussian { dim: 1 },
            vec![Block::Vector(DVector::from_element(1, 0.25)), Block::Matrix(DMatrix::from_element(1, 1, -0.125))],
        )
        .unwrap();
        let p = natural_to_gaussian(&eta).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-15 && (p.cov[(0, 0)] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn log_partition_values() {
        let eta = gaussian_to_natural(&g(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(gaussian_log_partition(&eta).unwrap().abs() < 1e-15);
        let eta = gaussian_to_natural(&g(&[1.0], &[4.0])).unwrap();
        let want = 0.125 + 0.5 * 4f64.ln();
        assert!((gaussian_log_partition(&eta).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let r = GaussianParams::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
        let bad = NaturalParam::new(
            Family::Gaussian { dim: 1 },
            vec![Block::Vector(DVector::zeros(1)), Block::Matrix(DMatrix::from_element(1, 1, 0.5))],
        );
        assert!(matches!(bad, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let r = NaturalParam::new(Family::Gaussian { dim: 2 }, vec![Block::Vector(DVector::zeros(2))]);
        assert!(matches!(r, Err(Error::SchemaMismatch(_))));
        let r = NaturalParam::new(
            Family::Gaussian { dim: 2 },
            vec![Block::Matrix(DMatrix::zeros(2, 2)), Block::Vector(DVector::zeros(2))],
        );
        assert!(matches!(r, Err(Error::SchemaMismatch(_))));
        let prior = inverse_gamma_to_natural(3.0, 2.0).unwrap();
        assert!(matches!(
            conjugate_update(&prior, &sin_example_offset(0.0)),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn invwishart_natural_form() {
        let p = InvWishartParams::new(7.0, DMatrix::identity(2, 2)).unwrap();
        let eta = invwishart_to_natural(&p).unwrap();
        assert_eq!(eta.block(0).as_scalar(), Some(-3.5));
        assert_eq!(eta.block(1).as_matrix().unwrap(), &(DMatrix::identity(2, 2) * -0.5));
        let back = natural_to_invwishart(&eta).unwrap();
        assert_eq!(back, p);
        // log|I| = 0, so η·T(I) = tr(−½V)
        let v = eta.log_unnormalized(&Point::Matrix(DMatrix::identity(2, 2))).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn invwishart_dof_bound() {
        assert!(InvWishartParams::new(4.0, DMatrix::identity(2, 2)).is_err());
        assert!(InvWishartParams::new(4.01, DMatrix::identity(2, 2)).is_ok());
    }

    #[test]
    fn invwishart_mean_values() {
        let p = InvWishartParams::new(7.0, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(invwishart_mean(&p).unwrap(), DMatrix::identity(2, 2));
        let p = InvWishartParams::new(10.0, DMatrix::from_diagonal(&DVector::from_row_slice(&[8.0, 4.0]))).unwrap();
        let m = invwishart_mean(&p).unwrap();
        assert!(frobenius_rel(&m, &DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]))) < 1e-15);
        let p = InvWishartParams::new(5.5, DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(invwishart_mean(&p), Err(Error::MeanUndefined { .. })));
    }

    #[test]
    fn conjugate_update_scalar_and_zero() {
        let prior = NaturalParam::new(
            Family::Gaussian { dim: 1 },
            vec![Block::Vector(DVector::from_element(1, 1.0)), Block::Matrix(DMatrix::from_element(1, 1, -1.0))],
        )
        .unwrap();
        let off = LikelihoodOffset::new(
            Family::Gaussian { dim: 1 },
            vec![Block::Vector(DVector::from_element(1, 2.0)), Block::Matrix(DMatrix::from_element(1, 1, -0.5))],
        )
        .unwrap();
        let post = conjugate_update(&prior, &off).unwrap();
        assert_eq!(post.block(0).as_vector().unwrap()[0], 3.0);
        assert_eq!(post.block(1).as_matrix().unwrap()[(0, 0)], -1.5);
        let same = conjugate_update(&prior, &LikelihoodOffset::zero(prior.family())).unwrap();
        assert_eq!(same, prior);
    }

    #[test]
    fn improper_gaussian_posterior_detected() {
        let prior = gaussian_to_natural(&g(&[0.0], &[1.0])).unwrap();
        let off = LikelihoodOffset::new(
            Family::Gaussian { dim: 1 },
            vec![Block::Vector(DVector::zeros(1)), Block::Matrix(DMatrix::from_element(1, 1, 1.0))],
        )
        .unwrap();
        assert!(matches!(conjugate_update(&prior, &off), Err(Error::PosteriorImproper(_))));
    }

    #[test]
    fn kalman_information_form_composition() {
        // prior N(μ,Σ), likelihood N(y; Cx, R)
        let prior = g(&[1.0, -1.0], &[2.0, 0.3, 0.3, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let r = DMatrix::from_element(1, 1, 0.5);
        let y = DVector::from_element(1, 0.7);
        let rinv = r.clone().try_inverse().unwrap();
        let off = LikelihoodOffset::new(
            Family::Gaussian { dim: 2 },
            vec![
                Block::Vector(c.transpose() * &rinv * &y),
                Block::Matrix(c.transpose() * &rinv * &c * -0.5),
            ],
        )
        .unwrap();
        let post = natural_to_gaussian(&conjugate_update(&gaussian_to_natural(&prior).unwrap(), &off).unwrap()).unwrap();
        let s = &c * &prior.cov * c.transpose() + &r;
        let k = &prior.cov * c.transpose() * s.try_inverse().unwrap();
        let mean = &prior.mean + &k * (&y - &c * &prior.mean);
        let cov = &prior.cov - &k * &c * &prior.cov;
        assert!(linalg::vec_rel(&post.mean, &mean) < 1e-12);
        assert!(frobenius_rel(&post.cov, &cov) < 1e-12);
    }

    #[test]
    fn sin_offset_values() {
        let o = sin_example_offset(0.0);
        let vals: Vec<f64> = o.blocks().iter().map(|(_, b)| b.as_scalar().unwrap()).collect();
        assert_eq!(vals, vec![-1.0 / 24.0, 0.0, 1.0, 0.0]);
        let o = sin_example_offset(3.0);
        let vals: Vec<f64> = o.blocks().iter().map(|(_, b)| b.as_scalar().unwrap()).collect();
        assert_eq!(vals, vec![-1.0 / 24.0, 0.25, 3f64.cos(), 3f64.sin()]);
        let prior = NaturalParam::new(Family::Trig, vec![Block::Scalar(-0.1), Block::Scalar(0.0), Block::Scalar(0.0), Block::Scalar(0.0)]).unwrap();
        let post = conjugate_update(&prior, &o).unwrap();
        assert_eq!(post.block(0).as_scalar(), Some(-1.0 / 24.0 - 0.1));
    }

    #[test]
    fn sin_offset_matches_likelihood_up_to_constant() {
        let y = 3.0;
        let o = sin_example_offset(y);
        let stat = SufficientStat::new(Family::Trig);
        let diff = |x: f64| {
            let t = stat.evaluate(&Point::Scalar(x)).unwrap();
            o.dot_stat(&t) - (-(y - x).powi(2) / 24.0 + (y - x).cos())
        };
        let c0 = diff(0.0);
        for x in [-7.0, -1.0, 2.5, 9.0] {
            assert!((diff(x) - c0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_standard_normal() {
        let n = normalize_scalar_density(|x| -0.5 * x * x, (-30.0, 30.0), (1 << 16) + 1).unwrap();
        assert!((n.normalizer() - (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn normalize_rejects_small_grid_and_nan() {
        assert!(matches!(
            normalize_scalar_density(|x| -x * x, (-1.0, 1.0), 1000),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            normalize_scalar_density(|x: f64| x.ln(), (-1.0, 1.0), 2049),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn sin_likelihood_is_multimodal() {
        let lik = |x: f64| (-(3.0 - x).powi(2) / 24.0 + (3.0 - x).cos()).exp();
        assert!(local_maxima(lik, -10.0, 16.0, 4001).len() >= 2);
    }

    #[test]
    fn gaussian_conjugacy_report_all_true() {
        let prior = gaussian_to_natural(&g(&[0.5], &[2.0])).unwrap();
        let r = 0.3;
        let offset = |y: f64| {
            LikelihoodOffset::new(
                Family::Gaussian { dim: 1 },
                vec![Block::Vector(DVector::from_element(1, y / r)), Block::Matrix(DMatrix::from_element(1, 1, -0.5 / r))],
            )
            .unwrap()
        };
        let y_term = |y: f64| -0.5 * y * y / r;
        let lik = ScalarLikelihood { offset: &offset, y_term: Some(&y_term) };
        let rep = check_conjugacy_scalar(&prior, &lik, 1.0, &default_probes(prior.family()));
        assert!(rep.all_hold(), "{rep:?}");
    }

    #[test]
    fn divergent_posterior_detected() {
        let prior = NaturalParam::new(Family::Trig, vec![Block::Scalar(-0.01), Block::Scalar(0.0), Block::Scalar(0.0), Block::Scalar(0.0)]).unwrap();
        let offset = |_y: f64| {
            LikelihoodOffset::new(Family::Trig, vec![Block::Scalar(0.02), Block::Scalar(0.0), Block::Scalar(0.0), Block::Scalar(0.0)]).unwrap()
        };
        let lik = ScalarLikelihood { offset: &offset, y_term: None };
        let rep = check_conjugacy_scalar(&prior, &lik, 0.0, &[0.0]);
        assert_eq!(rep.posterior_integrable_in_x, Verdict::Divergent);
    }
}
