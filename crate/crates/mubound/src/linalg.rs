//! Dense helpers shared by the solver and the oracles.

use nalgebra::linalg::Schur;

use crate::error::{MuError, Result};
use crate::{CMat, C64};

const SCHUR_EPS: f64 = f64::EPSILON;
const SCHUR_MAX_ITER: usize = 0; // 0 = nalgebra's "until convergence"

/// Complex Schur form A = Q T Q* with T upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(MuError::Invalid("matrix has non-finite entries".into()));
    }
    let s = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(MuError::EigenFailure(n))?;
    let (q, mut t) = s.unpack();
    // nalgebra leaves round-off below the diagonal; the factorization is
    // used as exactly triangular from here on.
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Eigenvalues without Schur vectors where nalgebra manages it (it gives up
/// when round-off is left below the diagonal); the full factorization
/// otherwise.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    if a.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        if let Some(ev) = a.eigenvalues() {
            return Ok(ev.iter().copied().collect());
        }
    }
    let (_, t) = schur(a)?;
    Ok(t.diagonal().iter().copied().collect())
}

pub fn spectral_radius(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Smallest singular value.
pub fn smallest_singular_value(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().min()
}
