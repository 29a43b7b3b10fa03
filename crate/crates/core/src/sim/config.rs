//! Experiment configuration, read from and written to JSON.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::randmat::{EttModel, Method, MotionModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Logarithmic,
}

/// `count` points between `min` and `max` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub scale: GridScale,
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl GridSpec {
    pub fn linear(count: usize, min: f64, max: f64) -> Self {
        Self { scale: GridScale::Linear, count, min, max }
    }

    pub fn logarithmic(count: usize, min: f64, max: f64) -> Self {
        Self { scale: GridScale::Logarithmic, count, min, max }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{what}: grid count must be ≥ 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!("{what}: need finite min ≤ max")));
        }
        if self.scale == GridScale::Logarithmic && !(self.min > 0.0) {
            return Err(Error::Config(format!("{what}: logarithmic grid needs min > 0")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                match self.scale {
                    GridScale::Linear => self.min + (self.max - self.min) * t,
                    GridScale::Logarithmic => (self.min.ln() + (self.max.ln() - self.min.ln()) * t).exp(),
                }
            })
            .enumerate()
            .map(|(i, v): (usize, f64)| match i {
                0 => self.min,
                i if i + 1 == self.count => self.max,
                _ => v,
            })
            .collect()
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{what}: expected a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

fn diag(values: &[f64]) -> Vec<Vec<f64>> {
    from_matrix(&DMatrix::from_diagonal(&DVector::from_row_slice(values)))
}

fn spd(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    linalg::checked_spd(&to_matrix(rows, what)?, what).map_err(|e| Error::Config(e.to_string()))
}

fn position_h(d: usize) -> Vec<Vec<f64>> {
    let mut h = DMatrix::zeros(d, 2 * d);
    h.view_mut((0, 0), (d, d)).fill_with_identity();
    from_matrix(&h)
}

/// `E diag(λ) Eᵀ` with orthonormal columns `e₁ = (1,1)/√2`, `e₂ = (1,−1)/√2`.
pub fn sweep_truth_extent() -> DMatrix<f64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let e = DMatrix::from_row_slice(2, 2, &[r, r, r, -r]);
    let l = DMatrix::from_diagonal(&DVector::from_row_slice(&[300.0f64.powi(2), 200.0f64.powi(2)]));
    linalg::symmetrize(&(&e * l * e.transpose()))
}

/// One-shot Monte-Carlo comparison over a grid of prior accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Scale of the kinematic prior covariance, `x ~ N(x⁰, P/α)`.
    pub alpha_grid: GridSpec,
    /// Wishart dof of the extent-mean draw, `V/(ν−2d−2) ~ W(δ, X⁰/δ)`.
    pub delta_grid: GridSpec,
    pub n_mc: usize,
    pub oracle_samples: usize,
    pub s: f64,
    pub r: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub extent0: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub nu_mean: f64,
    pub nu_min: f64,
    pub m_mean: f64,
    pub m_min: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha_grid: GridSpec::linear(40, 1.0, 50.0),
            delta_grid: GridSpec::logarithmic(40, 2.0, 1000.0),
            n_mc: 1000,
            oracle_samples: 100_000,
            s: 0.25,
            r: diag(&[100.0f64.powi(2); 2]),
            h: position_h(2),
            x0: vec![0.0, 0.0, 100.0, 100.0],
            extent0: from_matrix(&sweep_truth_extent()),
            p: diag(&[50.0f64.powi(2), 50.0f64.powi(2), 10.0f64.powi(2), 10.0f64.powi(2)]),
            nu_mean: 100.0,
            nu_min: 7.0,
            m_mean: 10.0,
            m_min: 2,
            methods: vec![Method::Ffk, Method::Ull],
            seed: 0,
        }
    }
}

/// Validated numeric form of a sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub model: EttModel,
    pub x0: DVector<f64>,
    pub extent0: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub laws: PriorLaws,
}

impl SweepConfig {
    pub fn setup(&self) -> Result<SweepSetup> {
        self.alpha_grid.validate("alpha_grid")?;
        self.delta_grid.validate("delta_grid")?;
        if self.alpha_grid.min < 1.0 {
            return Err(Error::Config("alpha_grid values must be ≥ 1".into()));
        }
        if self.delta_grid.min < 2.0 {
            return Err(Error::Config("delta_grid values must be ≥ 2".into()));
        }
        if self.n_mc == 0 {
            return Err(Error::Config("n_mc must be ≥ 1".into()));
        }
        if self.oracle_samples < crate::oracle::MIN_ORACLE_SAMPLES {
            return Err(Error::Config(format!(
                "oracle_samples must be ≥ {}",
                crate::oracle::MIN_ORACLE_SAMPLES
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        check_prior_laws(self.nu_mean, self.nu_min, self.m_mean, self.m_min, self.extent0.len())?;
        let model = EttModel::new(to_matrix(&self.h, "h")?, self.s, to_matrix(&self.r, "r")?)
            .map_err(|e| Error::Config(e.to_string()))?;
        let extent0 = spd(&self.extent0, "extent0")?;
        let p = spd(&self.p, "p")?;
        if self.x0.len() != model.state_dim() || p.nrows() != model.state_dim() || extent0.nrows() != model.meas_dim() {
            return Err(Error::Config("x0, p, extent0 and h dimensions disagree".into()));
        }
        Ok(SweepSetup {
            model,
            x0: DVector::from_row_slice(&self.x0),
            extent0,
            p,
            alphas: self.alpha_grid.values(),
            deltas: self.delta_grid.values(),
            laws: PriorLaws { nu_mean: self.nu_mean, nu_min: self.nu_min, m_mean: self.m_mean, m_min: self.m_min },
        })
    }
}

/// `ν = max(ν_min, Poisson(ν_mean))` and `m = max(m_min, Poisson(m_mean))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorLaws {
    pub nu_mean: f64,
    pub nu_min: f64,
    pub m_mean: f64,
    pub m_min: usize,
}

fn check_prior_laws(nu_mean: f64, nu_min: f64, m_mean: f64, m_min: usize, d: usize) -> Result<()> {
    if !(nu_min > 2.0 * d as f64 + 2.0) {
        return Err(Error::Config(format!("nu_min must exceed 2d + 2 = {}", 2 * d + 2)));
    }
    if !(nu_mean >= 0.0 && nu_mean.is_finite() && m_mean >= 0.0 && m_mean.is_finite()) {
        return Err(Error::Config("nu_mean and m_mean must be finite and ≥ 0".into()));
    }
    if m_min == 0 {
        return Err(Error::Config("m_min must be ≥ 1".into()));
    }
    Ok(())
}

/// A constant-turn-rate leg of the reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_s: f64,
    /// Positive turns counter-clockwise.
    pub turn_rate_deg_s: f64,
}

/// Single-target tracking Monte-Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub k_scans: usize,
    pub tau: f64,
    pub sigma_v: f64,
    pub tau0: f64,
    pub s: f64,
    pub r: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
    /// Extent eigenvalues along and across the heading.
    pub extent_eigenvalues: [f64; 2],
    pub alpha0: f64,
    pub delta0: f64,
    pub p0: Vec<Vec<f64>>,
    pub nu_mean: f64,
    pub nu_min: f64,
    pub m_mean: f64,
    pub m_min: usize,
    pub segments: Vec<Segment>,
    pub methods: Vec<Method>,
    pub n_mc: usize,
    pub seed: u64,
    /// Per-run errors above this value are replaced by it.
    pub clip: Option<f64>,
    /// Record wall-clock cycle times; when off, the column holds zeros so
    /// the output is reproducible byte for byte.
    pub timing: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        let seg = |scans: f64, rate: f64| Segment { duration_s: scans * 10.0, turn_rate_deg_s: rate };
        Self {
            k_scans: 181,
            tau: 10.0,
            sigma_v: 0.1,
            tau0: 15.0,
            s: 0.25,
            r: diag(&[20.0f64.powi(2); 2]),
            h: position_h(2),
            x1: vec![0.0, 0.0, 9.8, -9.8],
            extent_eigenvalues: [170.0f64.powi(2), 400.0f64.powi(2)],
            alpha0: 10.0,
            delta0: 5.0,
            p0: diag(&[50.0f64.powi(2), 50.0f64.powi(2), 10.0f64.powi(2), 10.0f64.powi(2)]),
            nu_mean: 10.0,
            nu_min: 7.0,
            m_mean: 10.0,
            m_min: 2,
            segments: vec![seg(50.0, 0.0), seg(20.0, 0.45), seg(40.0, 0.0), seg(20.0, -0.45), seg(51.0, 0.0)],
            methods: vec![Method::Ffk, Method::Ull],
            n_mc: 50_000,
            seed: 0,
            clip: None,
            timing: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackSetup {
    pub model: EttModel,
    pub motion: MotionModel,
    pub p0: DMatrix<f64>,
    pub laws: PriorLaws,
}

impl TrackConfig {
    pub fn setup(&self) -> Result<TrackSetup> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.k_scans == 0 {
            return Err(Error::Config("k_scans must be ≥ 1".into()));
        }
        if self.n_mc == 0 {
            return Err(Error::Config("n_mc must be ≥ 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if !(self.alpha0 >= 1.0 && self.delta0 >= 2.0) {
            return Err(Error::Config("alpha0 must be ≥ 1 and delta0 ≥ 2".into()));
        }
        if !self.extent_eigenvalues.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Config("extent_eigenvalues must be positive".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config("clip must be positive".into()));
            }
        }
        check_prior_laws(self.nu_mean, self.nu_min, self.m_mean, self.m_min, 2)?;
        if self.segments.is_empty()
            || self.segments.iter().any(|s| !(s.duration_s > 0.0) || !s.turn_rate_deg_s.is_finite())
        {
            return Err(Error::Config("segments need positive durations and finite turn rates".into()));
        }
        let total: f64 = self.segments.iter().map(|s| s.duration_s).sum();
        let horizon = self.k_scans as f64 * self.tau;
        if (total - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Config(format!(
                "segment durations sum to {total} s but k_scans·tau = {horizon} s"
            )));
        }
        let model = EttModel::new(to_matrix(&self.h, "h")?, self.s, to_matrix(&self.r, "r")?).map_err(cfg)?;
        if model.meas_dim() != 2 || model.state_dim() != 4 || self.x1.len() != 4 {
            return Err(Error::Config("tracking uses a 2-D constant-velocity state".into()));
        }
        let motion = MotionModel::constant_velocity(2, self.tau, self.sigma_v, self.tau0).map_err(cfg)?;
        let p0 = spd(&self.p0, "p0")?;
        if p0.nrows() != 4 {
            return Err(Error::Config("p0 must be 4×4".into()));
        }
        let laws = PriorLaws { nu_mean: self.nu_mean, nu_min: self.nu_min, m_mean: self.m_mean, m_min: self.m_min };
        Ok(TrackSetup { model, motion, p0, laws })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let a = GridSpec::linear(40, 1.0, 50.0).values();
        assert_eq!(a.len(), 40);
        assert_eq!(a[0], 1.0);
        assert_eq!(a[39], 50.0);
        let d = GridSpec::logarithmic(3, 2.0, 200.0).values();
        assert!((d[1] - 20.0).abs() < 1e-12);
        assert_eq!(d[2], 200.0);
        assert_eq!(GridSpec::linear(1, 3.0, 7.0).values(), vec![3.0]);
        assert!(GridSpec::linear(0, 1.0, 2.0).validate("g").is_err());
        assert!(GridSpec::logarithmic(2, 0.0, 2.0).validate("g").is_err());
    }

    #[test]
    fn sweep_truth_constants() {
        let x = sweep_truth_extent();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let e1 = DVector::from_row_slice(&[r, r]);
        let e2 = DVector::from_row_slice(&[r, -r]);
        assert!(((&x * &e1) - &e1 * 90_000.0).norm() < 1e-9);
        assert!(((&x * &e2) - &e2 * 40_000.0).norm() < 1e-9);
        let cfg = SweepConfig::default();
        assert_eq!(cfg.x0, vec![0.0, 0.0, 100.0, 100.0]);
        cfg.setup().unwrap();
    }

    #[test]
    fn defaults_roundtrip_json() {
        let s = SweepConfig::default();
        let back: SweepConfig = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        let t = TrackConfig::default();
        let back: TrackConfig = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
        t.setup().unwrap();
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let mut s = SweepConfig::default();
        s.n_mc = 0;
        assert!(matches!(s.setup(), Err(Error::Config(_))));
        let mut s = SweepConfig::default();
        s.r = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(s.setup(), Err(Error::Config(_))));
        let mut t = TrackConfig::default();
        t.segments.pop();
        assert!(matches!(t.setup(), Err(Error::Config(_))));
        assert!(serde_json::from_str::<SweepConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
