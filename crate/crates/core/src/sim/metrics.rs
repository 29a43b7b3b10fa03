//! Error metrics
//!
//! `E_x = (Σ‖H(xᵁ − x^ref)‖² / (d N))^{1/2}` and
//! `E_X = (Σ tr((Xᵁ − X^ref)²) / (d² N))^{1/4}`, the sums running over
//! runs (one-shot sweep) or scans (tracking).

use nalgebra::{DMatrix, DVector};

/// `‖H(x − x_ref)‖²`.
pub fn kinematic_sq_error(h: &DMatrix<f64>, x: &DVector<f64>, x_ref: &DVector<f64>) -> f64 {
    (h * (x - x_ref)).norm_squared()
}

/// `tr((X − X_ref)²)`, the squared Frobenius norm for symmetric arguments.
pub fn extent_sq_error(x: &DMatrix<f64>, x_ref: &DMatrix<f64>) -> f64 {
    let diff = x - x_ref;
    (&diff * &diff).trace()
}

/// Running sums behind `E_x` and `E_X`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub sum_x: f64,
    pub sum_extent: f64,
    pub count: usize,
}

impl ErrorAccumulator {
    pub fn push(&mut self, sq_x: f64, sq_extent: f64) {
        self.sum_x += sq_x;
        self.sum_extent += sq_extent;
        self.count += 1;
    }

    /// `E_x`; NaN when empty.
    pub fn e_x(&self, d: usize) -> f64 {
        (self.sum_x / (d * self.count) as f64).sqrt()
    }

    /// `E_X`; NaN when empty.
    pub fn e_extent(&self, d: usize) -> f64 {
        (self.sum_extent / (d * d * self.count) as f64).powf(0.25)
    }
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let x = DVector::from_row_slice(&[3.0, 4.0, 9.0, 9.0]);
        let mut acc = ErrorAccumulator::default();
        acc.push(kinematic_sq_error(&h, &x, &DVector::zeros(4)), extent_sq_error(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)));
        assert!((acc.e_x(2) - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((acc.e_x(2) - 3.5355).abs() < 1e-4);
        assert!((acc.e_extent(2) - 0.5f64.powf(0.25)).abs() < 1e-15);
        assert!((acc.e_extent(2) - 0.8409).abs() < 1e-4);
    }

    #[test]
    fn zero_iff_equal() {
        let h = DMatrix::identity(2, 2);
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        assert_eq!(kinematic_sq_error(&h, &x, &x), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(extent_sq_error(&m, &m), 0.0);
        assert!(extent_sq_error(&m, &DMatrix::identity(2, 2)) > 0.0);
        assert!(ErrorAccumulator::default().e_x(2).is_nan());
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
