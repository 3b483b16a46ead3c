//! Independent checks that do not share code paths with the flows:
//! certificate verification, random sampling, finite differences and
//! exhaustive grids for tiny structures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blockstruct::{assemble_dense, random_unit_with, BlockKind, BlockStructure, BlockValue, FullBlock, Perturbation};
use crate::error::{MuError, Result};
use crate::linalg::{eigenvalues, spectral_norm, spectral_radius};
use crate::par::Exec;
use crate::{CMat, C64};

pub const DEFAULT_VERIFY_THRESHOLD: f64 = 1e-6;
/// Slack on ‖Δ‖₂ ≤ 1 and on scalar moduli.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;
/// |Im(1/λ)| relative to |1/λ| below which an eigenvalue counts as real.
pub const REAL_TOL: f64 = 1e-8;
/// Points per parameter in `grid_mu_tiny` (before the refinement pass).
pub const GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub eps: f64,
    /// Smallest eigenvalue modulus of I − εMΔ.
    pub singularity_residual: f64,
    pub delta_norm: f64,
    pub admissibility: bool,
    pub threshold: f64,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_best_eps: Option<f64>,
    pub notes: Vec<String>,
}

/// Check that (ε, Δ) witnesses μ_B(M) ≥ 1/ε: Δ belongs to the structure
/// with ‖Δ‖₂ ≤ 1 and I − εMΔ is singular up to `threshold`.
pub fn verify_certificate(m: &CMat, s: &BlockStructure, eps: f64, delta: &Perturbation, threshold: f64) -> VerificationReport {
    let mut notes = Vec::new();
    let fail = |notes: Vec<String>| VerificationReport {
        eps,
        singularity_residual: f64::INFINITY,
        delta_norm: f64::NAN,
        admissibility: false,
        threshold,
        verified: false,
        sampled_best_eps: None,
        notes,
    };
    if let Err(e) = s.check_dim(m.nrows()).and_then(|_| delta.conforms(s)) {
        notes.push(e.to_string());
        return fail(notes);
    }
    let d = match assemble_dense(delta, s) {
        Ok(d) => d,
        Err(e) => {
            notes.push(e.to_string());
            return fail(notes);
        }
    };
    let delta_norm = spectral_norm(&d);
    let mut admissible = delta_norm <= 1.0 + ADMISSIBILITY_TOL;
    if !admissible {
        notes.push(format!("‖Δ‖₂ = {delta_norm:.12} exceeds 1"));
    }
    for (k, v) in delta.blocks.iter().enumerate() {
        let bad = match v {
            BlockValue::Complex(c) => !c.is_finite(),
            BlockValue::Real(r) => !r.is_finite(),
            BlockValue::Full(f) => !f.to_dense().iter().all(|c| c.is_finite()),
        };
        if bad {
            admissible = false;
            notes.push(format!("block {k} is not finite"));
        }
    }
    if !(eps.is_finite() && eps > 0.0) {
        admissible = false;
        notes.push(format!("eps = {eps} is not a positive number"));
    }
    let n = m.nrows();
    let a = CMat::identity(n, n) - m * &d * C64::new(eps, 0.0);
    let residual = match eigenvalues(&a) {
        Ok(ev) => ev.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min),
        Err(e) => {
            notes.push(e.to_string());
            f64::INFINITY
        }
    };
    VerificationReport {
        eps,
        singularity_residual: residual,
        delta_norm,
        admissibility: admissible,
        threshold,
        verified: admissible && residual <= threshold,
        sampled_best_eps: None,
        notes,
    }
}

/// Largest eigenvalue of `a` that is real and positive up to `REAL_TOL`.
fn largest_real_positive(a: &CMat) -> Option<f64> {
    eigenvalues(a)
        .ok()?
        .into_iter()
        .filter(|l| l.re > 0.0 && l.im.abs() <= REAL_TOL * l.norm())
        .map(|l| l.re)
        .reduce(f64::max)
}

/// Largest real positive eigenvalue of `build(t)` over a sampled parameter
/// range: eigenvalues that are real at a sample point count directly, and
/// eigenvalues whose imaginary part changes sign between neighbouring
/// samples are followed to the real axis by bisection.
fn best_real_positive_along<F: Fn(f64) -> CMat>(ts: &[f64], build: F) -> Option<(f64, f64)> {
    let spectra: Vec<Vec<C64>> = ts.iter().map(|&t| eigenvalues(&build(t)).unwrap_or_default()).collect();
    let mut best: Option<(f64, f64)> = None;
    let offer = |best: &mut Option<(f64, f64)>, value: f64, t: f64| {
        if value > 0.0 && best.is_none_or(|(b, _)| value > b) {
            *best = Some((value, t));
        }
    };
    for (k, ev) in spectra.iter().enumerate() {
        for l in ev.iter().filter(|l| l.im.abs() <= REAL_TOL * l.norm()) {
            offer(&mut best, l.re, ts[k]);
        }
    }
    // eigenvalues at round-off level (singular M) flip the sign of their
    // imaginary part at random; they are not crossings
    let scale = spectra.iter().flatten().map(|l| l.norm()).fold(0.0, f64::max);
    for k in 1..ts.len() {
        for &l0 in &spectra[k - 1] {
            let Some(l1) = nearest(&spectra[k], l0) else { continue };
            if l0.re <= 0.0 && l1.re <= 0.0 || l0.im * l1.im >= 0.0 || l0.norm().max(l1.norm()) <= NEGLIGIBLE * scale {
                continue;
            }
            // a crossing lands near the modulus of the eigenvalue it follows;
            // ones far below the best found so far cannot win
            if best.is_some_and(|(b, _)| l0.norm().max(l1.norm()) < CROSSING_PRUNE * b) {
                continue;
            }
            let (t, l) = follow_to_real_axis(&build, (ts[k - 1], l0), (ts[k], l1));
            if l.im.abs() <= 1e-6 * l.norm() {
                offer(&mut best, l.re, t);
            }
        }
    }
    best
}

/// Illinois false position on Im λ(t) between two samples of opposite sign,
/// tracking the eigenvalue by continuity. Returns the last iterate.
fn follow_to_real_axis<F: Fn(f64) -> CMat>(build: &F, a: (f64, C64), b: (f64, C64)) -> (f64, C64) {
    let ((mut ta, mut fa), (mut tb, mut fb)) = ((a.0, a.1.im), (b.0, b.1.im));
    let (mut t, mut current) = a;
    let mut side = 0i8;
    for _ in 0..100 {
        t = (ta * fb - tb * fa) / (fb - fa);
        if !(t > ta.min(tb) && t < ta.max(tb)) {
            t = 0.5 * (ta + tb);
        }
        let Some(l) = eigenvalues(&build(t)).ok().and_then(|ev| nearest(&ev, current)) else { break };
        current = l;
        if l.im.abs() <= 1e-14 * l.norm() || (tb - ta).abs() <= 1e-15 * ta.abs().max(1.0) {
            break;
        }
        if l.im * fa > 0.0 {
            (ta, fa) = (t, l.im);
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            (tb, fb) = (t, l.im);
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    (t, current)
}

fn nearest(ev: &[C64], to: C64) -> Option<C64> {
    ev.iter().copied().min_by(|a, b| (a - to).norm().total_cmp(&(b - to).norm()))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn with_complex_phase(delta: &Perturbation, theta: f64) -> Perturbation {
    let ph = C64::from_polar(1.0, theta);
    let blocks = delta
        .blocks
        .iter()
        .map(|v| match v {
            BlockValue::Complex(c) => BlockValue::Complex(c * ph),
            BlockValue::Real(r) => BlockValue::Real(*r),
            BlockValue::Full(f) => BlockValue::Full(FullBlock::Dense(f.to_dense() * ph)),
        })
        .collect();
    Perturbation::new(blocks)
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    /// Smallest singular level found; +∞ when no sampled ray hits.
    pub best_eps: f64,
    pub best_delta: Option<Perturbation>,
    pub trials: usize,
    pub hits: usize,
}

/// Number of phases scanned per trial when real and complex blocks mix.
pub const PHASE_SWEEP: usize = 48;
/// Axis crossings followed by eigenvalues smaller than this fraction of the
/// best real value so far are skipped.
const CROSSING_PRUNE: f64 = 0.5;
/// Eigenvalues below this fraction of the largest modulus seen are noise.
const NEGLIGIBLE: f64 = 1e-10;

/// Random search over B₁: every trial draws Δ and finds the smallest ε > 0
/// with I − εMΔ singular along the ray εΔ. Without real blocks that is
/// 1/ρ(MΔ). With real blocks only real positive eigenvalues of MΔ count;
/// when complex blocks are present as well, their common phase is swept so
/// that crossings of the real axis are found instead of relying on exact
/// hits. Trial k uses ChaCha8 stream k of `seed`, so results do not depend
/// on the execution policy.
pub fn sample_lower_bound(m: &CMat, s: &BlockStructure, trials: usize, seed: u64, exec: Exec) -> Result<SampleResult> {
    s.check_dim(m.nrows())?;
    if trials == 0 {
        return Err(MuError::Invalid("trials must be at least 1".into()));
    }
    let has_complex = s.count(BlockKind::ComplexScalar) + s.count(BlockKind::ComplexFull) > 0;
    let per_trial = exec.map_range(trials, |k| -> Option<(f64, Perturbation)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let delta = random_unit_with(s, &mut rng);
        let d = assemble_dense(&delta, s).ok()?;
        let md = m * &d;
        if !s.has_real() {
            // rotate so that the dominant eigenvalue of εMΔ is exactly 1
            let top = eigenvalues(&md).ok()?.into_iter().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
            let rho = top.norm();
            return (rho > 0.0).then(|| (1.0 / rho, delta.rotated(top.conj() / rho)));
        }
        if !has_complex {
            return largest_real_positive(&md).map(|l| (1.0 / l, delta));
        }
        let ts = linspace(0.0, std::f64::consts::TAU, PHASE_SWEEP + 1);
        let build = |t: f64| m * assemble_dense(&with_complex_phase(&delta, t), s).unwrap();
        best_real_positive_along(&ts, build).map(|(l, t)| (1.0 / l, with_complex_phase(&delta, t)))
    });
    let hits = per_trial.iter().filter(|r| r.is_some()).count();
    let best = per_trial.into_iter().flatten().min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(match best {
        Some((e, d)) => SampleResult { best_eps: e, best_delta: Some(d), trials, hits },
        None => SampleResult { best_eps: f64::INFINITY, best_delta: None, trials, hits },
    })
}

/// Relative error of `analytic` against a central difference of `f` at
/// `eps` with step 1e-6·max(1, ε).
pub fn fd_check_derivative<F: FnMut(f64) -> f64>(mut f: F, eps: f64, analytic: f64) -> f64 {
    let h = 1e-6 * eps.abs().max(1.0);
    let fd = (f(eps + h) - f(eps - h)) / (2.0 * h);
    (fd - analytic).abs() / analytic.abs().max(1.0)
}

/// Ground-truth μ for structures with at most two scalar parameters and no
/// full blocks, by exhaustive search.
///
/// Complex scalars sit on the unit circle, real scalars range over
/// [−1, 1]. Without real blocks one phase is global, so the search is over
/// the remaining relative phase of ρ(MΔ). With real blocks the last
/// parameter is scanned for real positive eigenvalues of MΔ (following
/// crossings of the real axis), and any other parameter is gridded. The
/// outer grid has `GRID_POINTS` points and is refined once, with the same
/// number of points, around its best cell.
pub fn grid_mu_tiny(m: &CMat, s: &BlockStructure) -> Result<f64> {
    s.check_dim(m.nrows())?;
    if s.count(BlockKind::ComplexFull) > 0 {
        return Err(MuError::TooManyParameters("full blocks are not gridded".into()));
    }
    let params = s.len();
    if params > 2 {
        return Err(MuError::TooManyParameters(format!("{params} scalar blocks (at most 2)")));
    }
    let tau = std::f64::consts::TAU;
    let scalar = |k: usize, value: f64| match s.blocks()[k].kind {
        BlockKind::RealScalar => BlockValue::Real(value),
        _ => BlockValue::Complex(C64::from_polar(1.0, value)),
    };
    let range = |k: usize| match s.blocks()[k].kind {
        BlockKind::RealScalar => (-1.0, 1.0),
        _ => (0.0, tau),
    };
    let md = |values: &[f64]| -> CMat {
        let delta = Perturbation::new(values.iter().enumerate().map(|(k, &v)| scalar(k, v)).collect());
        m * assemble_dense(&delta, s).unwrap()
    };

    // best value of the inner search with the first parameter fixed at t
    let inner = |t: Option<f64>| -> Option<f64> {
        let last = params - 1;
        let (a, b) = range(last);
        let ts = linspace(a, b, GRID_POINTS + 1);
        match t {
            Some(t) => best_real_positive_along(&ts, |u| md(&[t, u])).map(|r| r.0),
            None => best_real_positive_along(&ts, |u| md(&[u])).map(|r| r.0),
        }
    };

    if !s.has_real() {
        if params == 1 {
            return Ok(spectral_radius(m)?);
        }
        let f = |t: f64| spectral_radius(&md(&[0.0, t])).unwrap_or(0.0);
        return Ok(refine_max(0.0, tau, f));
    }
    if params == 1 {
        return Ok(inner(None).unwrap_or(0.0));
    }
    let (a, b) = range(0);
    Ok(refine_max(a, b, |t| inner(Some(t)).unwrap_or(0.0)))
}

fn refine_max<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let coarse = linspace(a, b, GRID_POINTS + 1);
    let values: Vec<f64> = coarse.iter().map(|&t| f(t)).collect();
    let (k, &best) = values.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let h = (b - a) / GRID_POINTS as f64;
    let fine = linspace((coarse[k] - h).max(a), (coarse[k] + h).min(b), GRID_POINTS + 1);
    fine.iter().map(|&t| f(t)).fold(best, f64::max)
}
