//! Small dense linear-algebra helpers shared by the filters.
//!
//! Symmetric matrices are stored in full square form. Inputs are checked for
//! asymmetry and symmetrized on write.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix is rejected.
pub const ASYMMETRY_TOL: f64 = 1e-10;

/// Relative eigenvalue floor used by symmetric matrix powers.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest elementwise asymmetry relative to the largest entry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Checks squareness, finiteness and symmetry, then symmetrizes.
pub fn checked_symmetric(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    let a = asymmetry(m);
    if a > ASYMMETRY_TOL {
        return Err(Error::InvalidParameter(format!(
            "{what} is not symmetric (relative asymmetry {a:.3e})"
        )));
    }
    Ok(symmetrize(m))
}

/// Symmetric, finite and Cholesky-factorizable.
pub fn checked_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let s = checked_symmetric(m, what)?;
    if s.clone().cholesky().is_none() {
        return Err(Error::InvalidParameter(format!("{what} is not positive definite")));
    }
    Ok(s)
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && m.iter().all(|v| v.is_finite())
        && symmetrize(m).cholesky().is_some()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Solves `a x = b` for SPD `a` through a Cholesky factorization.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is numerically singular")))?;
    Ok(chol.solve(b))
}

pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is numerically singular")))?;
    Ok(chol.solve(b))
}

pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is numerically singular")))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn log_det_spd(a: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is numerically singular")))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `C⁻¹ A C⁻¹` for SPD `C`, computed with two solves.
pub fn inverse_sandwich(c: &DMatrix<f64>, a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(c)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("{what} is numerically singular")))?;
    let left = chol.solve(a);
    let both = chol.solve(&left.transpose());
    Ok(symmetrize(&both.transpose()))
}

/// `M^p` for symmetric `M` via eigendecomposition; eigenvalues below
/// `EIGEN_FLOOR · λmax` are floored to that level first.
pub fn sym_power(m: &DMatrix<f64>, p: f64, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "{what} has no positive eigenvalue (max {lmax:e})"
        )));
    }
    let floor = EIGEN_FLOOR * lmax;
    let vals = eig.eigenvalues.map(|v| v.max(floor).powf(p));
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose())))
}

/// Floors the eigenvalues of a symmetric matrix at `floor`. Returns the
/// projected matrix and whether anything changed.
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return (symmetrize(m), false);
    }
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    (symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose())), true)
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute norm when `b` vanishes.
pub fn frobenius_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    let diff = (a - b).norm();
    if nb == 0.0 {
        diff
    } else {
        diff / nb
    }
}

pub fn vec_rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let nb = b.norm();
    let diff = (a - b).norm();
    if nb == 0.0 {
        diff
    } else {
        diff / nb
    }
}

/// Cholesky factor of an SPD matrix.
pub fn cholesky_lower(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    symmetrize(a)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidParameter(format!("{what} is not positive definite")))
}
