//! Worked conjugacy demonstrations: the multimodal trigonometric likelihood
//! and the four normal / inverse-gamma linearizations.

use serde::Serialize;

use crate::error::Result;
use crate::expfam::{
    self, check_conjugacy_scalar, sin_example_offset, Block, Family, LikelihoodOffset, NaturalParam, Point,
    ScalarLikelihood, SufficientStat, Verdict,
};
use crate::linearize::{self, IGammaParams, Nominal, PosteriorPropriety};

/// Prior `exp(−x²/10)` against `T(x) = (x², x, cos x, sin x)`.
pub fn trig_prior() -> NaturalParam {
    NaturalParam::new(
        Family::Trig,
        vec![Block::Scalar(-0.1), Block::Scalar(0.0), Block::Scalar(0.0), Block::Scalar(0.0)],
    )
    .expect("fixed layout")
}

fn trig_log(eta: &NaturalParam, x: f64) -> f64 {
    eta.log_unnormalized(&Point::Scalar(x)).unwrap_or(f64::NAN)
}

fn trig_offset_log(offset: &LikelihoodOffset, x: f64) -> f64 {
    let t = SufficientStat::new(Family::Trig).evaluate(&Point::Scalar(x)).expect("scalar point");
    offset.dot_stat(&t)
}

/// One grid row of the trigonometric demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct TrigRow {
    pub x: f64,
    pub prior: f64,
    pub likelihood: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrigDemo {
    pub y: f64,
    pub interval: (f64, f64),
    /// Posterior `η + λ(y)`, block by block.
    pub posterior_eta: [f64; 4],
    /// Integral of the normalized posterior on a grid twice as fine.
    pub refined_integral: f64,
    pub likelihood_maxima: Vec<f64>,
    pub rows: Vec<TrigRow>,
}

fn trapezoid(values: &[f64], a: f64, b: f64) -> f64 {
    let h = (b - a) / (values.len() - 1) as f64;
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Prior, likelihood and posterior of the trigonometric example, each
/// normalized on `interval` with `n_points` trapezoid nodes.
pub fn trig_demo(y: f64, interval: (f64, f64), n_points: usize) -> Result<TrigDemo> {
    let prior = trig_prior();
    let offset = sin_example_offset(y);
    let post = expfam::conjugate_update(&prior, &offset)?;
    let (a, b) = interval;
    let prior_d = expfam::normalize_scalar_density(|x| trig_log(&prior, x), interval, n_points)?;
    let lik_d = expfam::normalize_scalar_density(|x| trig_offset_log(&offset, x), interval, n_points)?;
    let post_d = expfam::normalize_scalar_density(|x| trig_log(&post, x), interval, n_points)?;

    let fine: Vec<f64> = expfam::uniform_grid(a, b, 2 * n_points - 1).map(|x| post_d.pdf(x)).collect();
    let refined_integral = trapezoid(&fine, a, b);
    let likelihood_maxima = expfam::local_maxima(|x| trig_offset_log(&offset, x), a, b, n_points);
    let rows = expfam::uniform_grid(a, b, n_points)
        .map(|x| TrigRow { x, prior: prior_d.pdf(x), likelihood: lik_d.pdf(x), posterior: post_d.pdf(x) })
        .collect();
    let block = |i: usize| post.block(i).as_scalar().expect("scalar block");
    Ok(TrigDemo {
        y,
        interval,
        posterior_eta: [block(0), block(1), block(2), block(3)],
        refined_integral,
        likelihood_maxima,
        rows,
    })
}

/// Integrability and posterior outcome of one normal / inverse-gamma
/// linearization.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    pub solution: u8,
    pub log_x_coefficient: f64,
    pub inv_x_coefficient: f64,
    pub flagged_y_integrable: bool,
    pub always_proper: bool,
    /// Numeric verdict on `∫ exp(ℓ(y, x)) dy` over the probe points.
    pub y_verdict: String,
    /// Posterior `(α′, β′)`, or the reason it is improper.
    pub posterior: std::result::Result<(f64, f64), String>,
}

/// One grid row: exact and approximate log-likelihoods in `x`.
#[derive(Debug, Clone, Serialize)]
pub struct IGammaRow {
    pub x: f64,
    pub exact: f64,
    pub solution1: f64,
    pub solution2: f64,
    pub solution3: f64,
    pub solution4: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IGammaDemo {
    pub nominal: f64,
    pub solutions: Vec<SolutionReport>,
    pub rows: Vec<IGammaRow>,
}

/// Exact `log N(y; 0, x + σ²)` without the `2π` term.
fn exact_loglik(x: f64, noise_var: f64, y: f64) -> f64 {
    -0.5 * linearize::normal_igamma_neg2_loglik(x, noise_var, y)
}

fn igamma_stat(x: f64) -> Vec<Block> {
    SufficientStat::new(Family::InverseGamma)
        .evaluate(&Point::Scalar(x))
        .expect("positive point")
}

/// Approximate log-likelihood of solution `k` (0-based), anchored so that
/// it equals the exact value at `x̂`.
pub fn solution_loglik(prior: &IGammaParams, noise_var: f64, nominal: Nominal, k: usize, y: f64, x: f64) -> Result<f64> {
    let xh = nominal.resolve(prior)?;
    let offsets = linearize::igamma_solution_offsets(prior, noise_var, y, nominal)?;
    let o = &offsets[k].offset;
    Ok(exact_loglik(xh, noise_var, y) + o.dot_stat(&igamma_stat(x)) - o.dot_stat(&igamma_stat(xh)))
}

/// Evaluates all four linearizations for measurement `y`.
pub fn igamma_demo(prior: &IGammaParams, noise_var: f64, y: f64, nominal: Nominal, n_points: usize) -> Result<IGammaDemo> {
    let xh = nominal.resolve(prior)?;
    let offsets = linearize::igamma_solution_offsets(prior, noise_var, y, nominal)?;
    let eta = expfam::inverse_gamma_to_natural(prior.shape, prior.scale)?;
    let probes: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 10.0, 100.0].iter().map(|f| f * xh).collect();

    let mut solutions = Vec::with_capacity(4);
    for (k, so) in offsets.iter().enumerate() {
        let offset = |yy: f64| {
            linearize::igamma_solution_offsets(prior, noise_var, yy, nominal)
                .map(|o| o[k].offset.clone())
                .unwrap_or_else(|_| LikelihoodOffset::zero(Family::InverseGamma))
        };
        // Anchoring term depending on y only.
        let y_term = |yy: f64| exact_loglik(xh, noise_var, yy) - offset(yy).dot_stat(&igamma_stat(xh));
        let lik = ScalarLikelihood { offset: &offset, y_term: Some(&y_term) };
        let report = check_conjugacy_scalar(&eta, &lik, y, &probes);
        let verdict = match report.likelihood_integrable_in_y {
            Verdict::Integrable => "integrable",
            Verdict::Divergent => "divergent",
            Verdict::Indeterminate => "indeterminate",
        };
        let posterior = linearize::igamma_posterior(prior, &so.offset)
            .map(|p| (p.shape, p.scale))
            .map_err(|e| e.to_string());
        solutions.push(SolutionReport {
            solution: so.solution,
            log_x_coefficient: so.log_x(),
            inv_x_coefficient: so.inv_x(),
            flagged_y_integrable: so.y_integrable,
            always_proper: so.posterior == PosteriorPropriety::Always,
            y_verdict: verdict.into(),
            posterior,
        });
    }

    let (a, b) = (xh / 20.0, xh * 20.0);
    let rows = (0..n_points)
        .map(|i| {
            // Log-spaced grid over [x̂/20, 20x̂].
            let x = (a.ln() + (b.ln() - a.ln()) * i as f64 / (n_points - 1) as f64).exp();
            let sol = |k| solution_loglik(prior, noise_var, nominal, k, y, x).unwrap_or(f64::NAN);
            IGammaRow { x, exact: exact_loglik(x, noise_var, y), solution1: sol(0), solution2: sol(1), solution3: sol(2), solution4: sol(3) }
        })
        .collect();
    Ok(IGammaDemo { nominal: xh, solutions, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_demo_posterior() {
        let d = trig_demo(3.0, (-10.0, 16.0), 4097).unwrap();
        assert_eq!(d.posterior_eta[0], -1.0 / 24.0 - 0.1);
        assert_eq!(d.posterior_eta[1], 0.25);
        assert!((d.refined_integral - 1.0).abs() < 1e-6);
        assert!(d.likelihood_maxima.len() >= 2);
        assert_eq!(d.rows.len(), 4097);
    }

    #[test]
    fn anchored_solutions_touch_exact_at_nominal() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let xh = Nominal::ShapeOverScale.resolve(&prior).unwrap();
        for k in 0..4 {
            let v = solution_loglik(&prior, 1.0, Nominal::ShapeOverScale, k, 1.7, xh).unwrap();
            assert!((v - exact_loglik(xh, 1.0, 1.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn igamma_verdicts() {
        let prior = IGammaParams::new(3.0, 2.0).unwrap();
        let d = igamma_demo(&prior, 1.0, 1.0, Nominal::ShapeOverScale, 101).unwrap();
        assert_eq!(d.solutions[0].y_verdict, "divergent");
        for s in &d.solutions[1..] {
            assert_eq!(s.y_verdict, "integrable", "solution {}", s.solution);
        }
        assert!(d.solutions[2].posterior.is_ok() && d.solutions[3].posterior.is_ok());
    }
}
