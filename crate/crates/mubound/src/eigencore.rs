//! Target eigenvalues with consistently scaled right/left eigenvectors.
//!
//! Everything is computed from a single complex Schur factorization
//! `A = Q T Q*`: right eigenvectors of `T` by backward substitution, left
//! eigenvectors by forward substitution, both mapped back through `Q`.
//! Pairing is therefore by construction (same diagonal entry of `T`).

use crate::error::{MuError, Result};
use crate::linalg::schur;
use crate::{CMat, CVec, C64};

/// Relative eigenvalue-gap threshold below which a target is declared
/// non-simple.
pub const SIMPLICITY_TOL: f64 = 1e-10;

/// Ties between candidate eigenvalues are resolved when their objective
/// values differ by less than this (relative).
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// Unit right eigenvector, `A x = λ x`.
    pub x: CVec,
    /// Unit left eigenvector, `y* A = λ y*`.
    pub y: CVec,
}

/// Target eigenvalue with scaled eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenTriple {
    /// The objective value: λ (largest-modulus target) or ζ = 1 − λ.
    pub value: C64,
    /// The eigenvalue λ of the matrix itself.
    pub lambda: C64,
    pub x: CVec,
    pub y: CVec,
    /// s = e^{iθ} y*x > 0, with θ = arg(value).
    pub s: f64,
    /// Distance from λ to the nearest other eigenvalue (+∞ when n = 1).
    pub gap: f64,
}

impl EigenTriple {
    /// Scaled y*x (equal to s·e^{−iθ}).
    pub fn yx(&self) -> C64 {
        self.y.dotc(&self.x)
    }
}

fn backward_right(t: &CMat, k: usize, smin: f64) -> CVec {
    let n = t.nrows();
    let lam = t[(k, k)];
    let mut v = CVec::zeros(n);
    v[k] = C64::new(1.0, 0.0);
    for j in (0..k).rev() {
        let mut acc = C64::new(0.0, 0.0);
        for l in j + 1..=k {
            acc += t[(j, l)] * v[l];
        }
        let mut d = t[(j, j)] - lam;
        if d.norm() < smin {
            d = C64::new(smin, 0.0);
        }
        v[j] = -acc / d;
    }
    v
}

/// Row vector u with u T = λ u, returned as a column.
fn forward_left(t: &CMat, k: usize, smin: f64) -> CVec {
    let n = t.nrows();
    let lam = t[(k, k)];
    let mut u = CVec::zeros(n);
    u[k] = C64::new(1.0, 0.0);
    for j in k + 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for l in k..j {
            acc += u[l] * t[(l, j)];
        }
        let mut d = t[(j, j)] - lam;
        if d.norm() < smin {
            d = C64::new(smin, 0.0);
        }
        u[j] = -acc / d;
    }
    u
}

fn unit(v: CVec) -> CVec {
    let nv = v.norm();
    if nv > 0.0 {
        v.unscale(nv)
    } else {
        v
    }
}

/// Full spectrum with unit right and left eigenvectors.
pub fn eig_all(a: &CMat) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    let (q, t) = schur(a)?;
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    Ok((0..n)
        .map(|k| {
            let x = unit(&q * backward_right(&t, k, smin));
            let y = unit(&q * forward_left(&t, k, smin).conjugate());
            EigenPair { value: t[(k, k)], x, y }
        })
        .collect())
}

fn eig_single((q, t): &(CMat, CMat), k: usize) -> EigenPair {
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    EigenPair {
        value: t[(k, k)],
        x: unit(q * backward_right(t, k, smin)),
        y: unit(q * forward_left(t, k, smin).conjugate()),
    }
}

/// Rotate `y` so that e^{iθ} y*x is real and positive; returns the rotated
/// vector and that positive number. `x` keeps its phase.
pub fn scale_left(x: &CVec, y: &CVec, theta: f64) -> (CVec, f64) {
    let yx = y.dotc(x);
    let phi = theta + yx.arg();
    let y = y * C64::from_polar(1.0, phi);
    let s = (C64::from_polar(1.0, theta) * y.dotc(x)).re;
    (y, s)
}

fn arg_or_zero(v: C64) -> f64 {
    if v.norm() == 0.0 {
        0.0
    } else {
        v.arg()
    }
}

fn gap_of(values: &[C64], k: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, v)| (v - values[k]).norm())
        .fold(f64::INFINITY, f64::min)
}

fn build_triple(a: &CMat, fac: &(CMat, CMat), values: &[C64], k: usize, value: C64) -> Result<EigenTriple> {
    let gap = gap_of(values, k);
    let threshold = SIMPLICITY_TOL * a.norm();
    if gap < threshold {
        return Err(MuError::NonSimpleTarget { gap, threshold });
    }
    let pair = eig_single(fac, k);
    let (y, s) = scale_left(&pair.x, &pair.y, arg_or_zero(value));
    Ok(EigenTriple { value, lambda: pair.value, x: pair.x, y, s, gap })
}

/// Index of the best candidate under `key` (smaller is better), breaking
/// near-ties with `tie` (smaller is better).
fn select<K, T>(values: &[C64], key: K, tie: T) -> usize
where
    K: Fn(C64) -> f64,
    T: Fn(C64) -> (f64, f64, f64),
{
    let best = values.iter().map(|&v| key(v)).fold(f64::INFINITY, f64::min);
    let band = TIE_TOL * (1.0 + best.abs());
    let mut idx = None;
    for (k, &v) in values.iter().enumerate() {
        if key(v) <= best + band {
            idx = match idx {
                None => Some(k),
                Some(j) if tie(v) < tie(values[j]) => Some(k),
                keep => keep,
            };
        }
    }
    idx.expect("non-empty spectrum")
}

/// Largest-modulus eigenvalue; ties go to the largest real part, then the
/// largest imaginary part.
pub fn target_largest(a: &CMat) -> Result<EigenTriple> {
    let fac = schur(a)?;
    let values: Vec<C64> = fac.1.diagonal().iter().copied().collect();
    let k = select(&values, |v| -v.norm(), |v| (-v.re, -v.im, 0.0));
    build_triple(a, &fac, &values, k, values[k])
}

/// Eigenvalue λ of `a` closest to one; the returned value is ζ = 1 − λ.
/// Ties go to the smallest |λ|, then lexicographically smallest (Re, Im).
pub fn target_closest_to_one(a: &CMat) -> Result<EigenTriple> {
    let fac = schur(a)?;
    let values: Vec<C64> = fac.1.diagonal().iter().copied().collect();
    let one = C64::new(1.0, 0.0);
    let k = select(&values, |v| (one - v).norm(), |v| (v.norm(), v.re, v.im));
    build_triple(a, &fac, &values, k, one - values[k])
}

/// Eigenvalues of `a` sorted by decreasing modulus (ties as in
/// [`target_largest`]) with unit eigenvectors.
pub fn eig_sorted_by_modulus(a: &CMat) -> Result<Vec<EigenPair>> {
    let mut all = eig_all(a)?;
    all.sort_by(|p, q| {
        q.value
            .norm()
            .total_cmp(&p.value.norm())
            .then(q.value.re.total_cmp(&p.value.re))
            .then(q.value.im.total_cmp(&p.value.im))
    });
    Ok(all)
}

/// First-order eigenvalue derivative λ̇ = y* C₁ x / (y* x).
pub fn eig_derivative(y: &CVec, x: &CVec, c1: &CMat) -> Result<C64> {
    let yx = y.dotc(x);
    if yx.norm() < 1e-14 {
        return Err(MuError::DegeneratePair(yx.norm()));
    }
    Ok(y.dotc(&(c1 * x)) / yx)
}
