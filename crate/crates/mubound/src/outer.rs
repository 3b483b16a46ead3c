//! The outer iteration on ε: start the inner flows from eigenvector-based
//! perturbations, then drive ε to the critical level with safeguarded
//! Newton steps, warm-starting each inner flow from the previous Δ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blockstruct::{assemble_dense, project_outer, re_inner, BlockKind, BlockStructure, BlockValue, FullBlock, Perturbation};
use crate::eigencore::{eig_sorted_by_modulus, scale_left, EigenTriple};
use crate::error::{MuError, Result};
use crate::innerflow::{integrate_to_stationary, FlowOptions, FlowResult, Mode, Termination};
use crate::linalg::spectral_norm;
use crate::oracle::{verify_certificate, VerificationReport, DEFAULT_VERIFY_THRESHOLD};
use crate::par::Exec;
use crate::{CMat, CVec, C64};

/// Block products below this make the derivative formulas unreliable.
const ASSUMPTION_TOL: f64 = 1e-12;
/// Blocks of P_B(yx*) smaller than this are treated as vanishing.
const DEGENERATE_TOL: f64 = 1e-14;
/// Attempts with a perturbed start when the target eigenvalue is not simple.
const RESTARTS: usize = 3;
/// Sign-pattern starts are added under [`StartPolicy::All`] only up to this
/// many real scalar blocks (2^k starts).
pub const MAX_CORNER_REALS: usize = 4;
/// Real scalars closer than this to ±1 in a final certificate are snapped
/// onto the bound (and the complex blocks re-flowed) when that keeps the
/// point singular.
const SNAP_TOL: f64 = 1e-5;
/// Largest relative change of ε the snapping may cost.
const POLISH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartPolicy {
    /// Flow every start at ε₀ and continue from the best one only.
    BestAtEps0,
    /// Run the whole outer iteration from every start and keep the
    /// smallest verified ε_f. With few real scalar blocks, every sign
    /// pattern of them is added as a start as well.
    All,
}

#[derive(Debug, Clone)]
pub struct OuterConfig {
    pub tol: f64,
    pub eps0: Option<f64>,
    /// Number of eigenvector starts; `None` picks max(n/5, 5) for n ≥ 5 and
    /// n otherwise.
    pub i_max: Option<usize>,
    pub max_outer: usize,
    /// Forced mode; `None` derives it from the structure.
    pub mode: Option<Mode>,
    pub starts: StartPolicy,
    /// Extra user-supplied start, flowed at ε₀ alongside the others.
    pub init_delta: Option<Perturbation>,
    pub flow: FlowOptions,
    pub exec: Exec,
    /// Seed for the perturbed restarts.
    pub seed: u64,
    pub verify_threshold: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            eps0: None,
            i_max: None,
            max_outer: 50,
            mode: None,
            starts: StartPolicy::BestAtEps0,
            init_delta: None,
            flow: outer_flow_options(),
            exec: Exec::default(),
            seed: 0,
            verify_threshold: DEFAULT_VERIFY_THRESHOLD,
        }
    }
}

/// Inner-flow settings used by the outer iteration. Tighter than the flow
/// defaults: the singularity test compares |ζ| against the outer `tol`, and
/// with h_min = 1e-8 the flow stalls around |ζ| ~ 1e-8, short of it.
pub fn outer_flow_options() -> FlowOptions {
    FlowOptions { h_min: 1e-12, tol_obj: 1e-14, tol_stat: 1e-10, ..FlowOptions::default() }
}

pub fn auto_i_max(n: usize) -> usize {
    if n >= 5 {
        (n / 5).max(5)
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Start,
    Newton,
    Bisection,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub eps: f64,
    pub objective: f64,
    pub step: StepKind,
    pub inner_steps: usize,
    pub termination: Termination,
    /// Accepted-step objective values of the inner flow at this ε.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StartReport {
    pub label: String,
    /// Objective after flowing at ε₀ (|λ| or |ζ|).
    pub objective: Option<f64>,
    pub eps_f: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub mode: Mode,
    pub eps_f: f64,
    pub delta_star: Perturbation,
    pub lower_bound: f64,
    pub residual: f64,
    pub verified: bool,
    pub history: Vec<HistoryEntry>,
    pub report: VerificationReport,
    /// Label of the start the certificate descends from.
    pub start: String,
    pub starts: Vec<StartReport>,
    pub notes: Vec<String>,
}

/// A start for the inner flow, with the indices of blocks whose projection
/// vanished and were replaced by a fixed unit value.
#[derive(Debug, Clone)]
pub struct InitialStart {
    pub delta: Perturbation,
    pub degenerate: Vec<usize>,
}

fn eigen_start(m: &CMat, index: usize) -> Result<(C64, CVec, CVec)> {
    let all = eig_sorted_by_modulus(m)?;
    let pair = all.get(index).ok_or_else(|| MuError::Invalid(format!("eigenvalue index {index} out of range")))?;
    if pair.value.norm() == 0.0 {
        return Err(MuError::ZeroSpectrum);
    }
    // χ₀ = 1/λ: scale so that e^{-i arg λ} y*x > 0
    let (y, _) = scale_left(&pair.x, &pair.y, -pair.value.arg());
    Ok((pair.value, pair.x.clone(), y))
}

fn normalize_projection(p: &Perturbation, s: &BlockStructure) -> InitialStart {
    let mut degenerate = Vec::new();
    let blocks = p
        .blocks
        .iter()
        .zip(s.blocks())
        .enumerate()
        .map(|(k, (v, b))| match v {
            BlockValue::Complex(g) if g.norm() > DEGENERATE_TOL => BlockValue::Complex(g / g.norm()),
            BlockValue::Real(g) if g.abs() > DEGENERATE_TOL => BlockValue::Real(g.signum()),
            BlockValue::Full(f) if f.frobenius() > DEGENERATE_TOL => {
                BlockValue::Full(FullBlock::Dense(f.to_dense().unscale(f.frobenius())))
            }
            _ => {
                degenerate.push(k);
                match b.kind {
                    BlockKind::ComplexScalar => BlockValue::Complex(C64::new(1.0, 0.0)),
                    BlockKind::RealScalar => BlockValue::Real(1.0),
                    BlockKind::ComplexFull => {
                        let mut e1 = CVec::zeros(b.dim);
                        e1[0] = C64::new(1.0, 0.0);
                        BlockValue::Full(FullBlock::RankOne { sigma: C64::new(1.0, 0.0), p: e1.clone(), q: e1 })
                    }
                }
            }
        })
        .collect();
    InitialStart { delta: Perturbation::new(blocks), degenerate }
}

/// Δ₀ = D·P_B(y x*) built from the eigenvectors of the `index`-th
/// largest-modulus eigenvalue of M (0-based); full blocks come out in
/// rank-1 form.
pub fn initial_perturbation(m: &CMat, s: &BlockStructure, index: usize) -> Result<InitialStart> {
    s.check_dim(m.nrows())?;
    let (_, x, y) = eigen_start(m, index)?;
    let mut start = normalize_projection(&project_outer(&y, &x, s), s);
    for ((b, r), v) in s.iter().zip(start.delta.blocks.iter_mut()) {
        if let BlockValue::Full(FullBlock::Dense(_)) = v {
            // y_b x_b* is an outer product: store it factored
            if let Some(f) = FullBlock::rank_one_from_outer(&y.rows(r.start, b.dim).into_owned(), &x.rows(r.start, b.dim).into_owned()) {
                *v = BlockValue::Full(f);
            }
        }
    }
    Ok(start)
}

/// ε₀ = |χ₀| |y*x| / (2 Re⟨y x*, Δ₀⟩), minimized over the `count` largest
/// eigenvalues; falls back to 1/‖M‖₂ when every candidate degenerates.
pub fn initial_epsilon(m: &CMat, s: &BlockStructure, count: usize) -> Result<f64> {
    s.check_dim(m.nrows())?;
    let mut best = f64::INFINITY;
    for k in 0..count.min(m.nrows()) {
        let Ok((lambda, x, y)) = eigen_start(m, k) else { continue };
        let start = initial_perturbation(m, s, k)?;
        if !start.degenerate.is_empty() {
            continue;
        }
        let d0 = assemble_dense(&start.delta, s)?;
        let denom = re_inner(&(&y * x.adjoint()), &d0);
        if denom > DEGENERATE_TOL {
            best = best.min(y.dotc(&x).norm() / (lambda.norm() * 2.0 * denom));
        }
    }
    if best.is_finite() && best > 0.0 {
        return Ok(best);
    }
    let two = spectral_norm(m);
    if two == 0.0 {
        return Err(MuError::ZeroSpectrum);
    }
    Ok(1.0 / two)
}

fn block_sums(eig: &EigenTriple, z: &CVec, s: &BlockStructure, with_real: bool) -> Result<f64> {
    let mut total = 0.0;
    for (k, (b, r)) in s.iter().enumerate() {
        let xb = eig.x.rows(r.start, b.dim);
        let zb = z.rows(r.start, b.dim);
        let term = match b.kind {
            BlockKind::ComplexScalar => zb.dotc(&xb).norm(),
            BlockKind::RealScalar => {
                if with_real {
                    total += zb.dotc(&xb).re.abs();
                }
                continue;
            }
            BlockKind::ComplexFull => zb.norm() * xb.norm(),
        };
        if term < ASSUMPTION_TOL {
            return Err(MuError::AssumptionViolated { block: k, value: term });
        }
        total += term;
    }
    let yx = eig.yx().norm();
    if yx < 1e-14 {
        return Err(MuError::DegeneratePair(yx));
    }
    Ok(total / yx)
}

/// d|λ|/dε at a stationary point of the complex-mode flow:
/// (Σᵢ |zᵢ* xᵢ| + Σⱼ ‖z_j‖ ‖x_j‖) / |y* x|.
pub fn derivative_complex(eig: &EigenTriple, z: &CVec, s: &BlockStructure) -> Result<f64> {
    block_sums(eig, z, s, false)
}

/// d|ζ|/dε at a stationary point of the mixed-mode flow:
/// −(Σ_complex |zᵢ* xᵢ| + Σ_real |Re(zₗ* xₗ)| + Σⱼ ‖z_j‖ ‖x_j‖) / |y* x|.
pub fn derivative_mixed(eig: &EigenTriple, z: &CVec, s: &BlockStructure) -> Result<f64> {
    block_sums(eig, z, s, true).map(|v| -v)
}

/// Newton step for |λ(ε)| = 1 (complex) or |ζ(ε)| = 0 (mixed). A
/// non-positive result is pulled back by halving the step until ε > 0.
pub fn newton_update(eps: f64, objective: f64, derivative: f64, mode: Mode) -> f64 {
    let mut step = match mode {
        Mode::Complex => -(objective - 1.0) / derivative,
        Mode::Mixed => -objective / derivative,
    };
    while eps + step <= 0.0 {
        step *= 0.5;
    }
    eps + step
}

fn jitter(delta: &Perturbation, rng: &mut ChaCha8Rng) -> Perturbation {
    let mut small = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-3;
    let blocks = delta
        .blocks
        .iter()
        .map(|v| match v {
            BlockValue::Complex(d) => BlockValue::Complex(d + small()),
            BlockValue::Real(d) => BlockValue::Real(d - d.signum() * small().norm()),
            BlockValue::Full(FullBlock::RankOne { sigma, p, q }) => BlockValue::Full(FullBlock::RankOne {
                sigma: *sigma,
                p: p.map(|v| v + small()),
                q: q.map(|v| v + small()),
            }),
            BlockValue::Full(FullBlock::Dense(d)) => BlockValue::Full(FullBlock::Dense(d.map(|v| v + small()))),
        })
        .collect();
    Perturbation::new(blocks).renormalized()
}

/// Inner flow with the restart policy: a non-simple target at the start
/// triggers up to `RESTARTS` retries from slightly perturbed copies.
fn flow(m: &CMat, s: &BlockStructure, eps: f64, delta: &Perturbation, mode: Mode, cfg: &OuterConfig, rng: &mut ChaCha8Rng) -> Result<FlowResult> {
    let mut current = delta.clone();
    let mut attempt = 0;
    loop {
        match integrate_to_stationary(m, s, eps, &current, mode, &cfg.flow) {
            Err(MuError::NonSimpleTarget { .. }) if attempt < RESTARTS => {
                attempt += 1;
                current = jitter(&current, rng);
            }
            other => return other,
        }
    }
}

fn entry(eps: f64, r: &FlowResult, step: StepKind) -> HistoryEntry {
    HistoryEntry {
        eps,
        objective: r.objective,
        step,
        inner_steps: r.diagnostics.accepted_steps,
        termination: r.diagnostics.termination,
        trace: r.diagnostics.trace.clone(),
    }
}

/// Candidate certificate before verification.
struct Outcome {
    eps_f: f64,
    delta: Perturbation,
    history: Vec<HistoryEntry>,
    notes: Vec<String>,
}

fn run_complex(m: &CMat, s: &BlockStructure, eps0: f64, first: FlowResult, cfg: &OuterConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mode = Mode::Complex;
    let mut eps = eps0;
    let mut state = first;
    let mut history = vec![entry(eps, &state, StepKind::Start)];
    let mut notes = Vec::new();
    let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
    for _ in 0..cfg.max_outer {
        let f = state.objective - 1.0;
        if f.abs() <= cfg.tol {
            break;
        }
        if f < 0.0 {
            lo = Some(eps);
        } else {
            hi = Some(eps);
        }
        let (mut next, mut kind) = match derivative_complex(&state.eig, &state.z, s) {
            Ok(d) => (newton_update(eps, state.objective, d, mode), StepKind::Newton),
            Err(e) => {
                notes.push(format!("derivative unavailable at eps={eps:.12}: {e}"));
                (if f < 0.0 { eps * 1.5 } else { eps / 1.5 }, StepKind::Bisection)
            }
        };
        if let (Some(l), Some(u)) = (lo, hi) {
            if next <= l || next >= u {
                next = 0.5 * (l + u);
                kind = StepKind::Bisection;
            }
        }
        let done = (next - eps).abs() < cfg.tol;
        eps = next;
        state = flow(m, s, eps, &state.delta, mode, cfg, rng)?;
        history.push(entry(eps, &state, kind));
        if done {
            break;
        }
    }
    // Rotate onto the positive real axis and rescale ε so that
    // ε_f M Δ⋆ has the eigenvalue 1 exactly.
    let lambda = state.eig.lambda;
    let rotated = state.delta.rotated(C64::from_polar(1.0, -lambda.arg()));
    Ok(Outcome { eps_f: eps / lambda.norm(), delta: rotated, history, notes })
}

fn run_mixed(m: &CMat, s: &BlockStructure, eps0: f64, first: FlowResult, cfg: &OuterConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mode = Mode::Mixed;
    let tol = cfg.tol;
    let mut eps = eps0;
    let mut state = first;
    let mut history = vec![entry(eps, &state, StepKind::Start)];
    let mut notes = Vec::new();
    let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
    let mut cert: Option<(f64, Perturbation)> = None;
    // Width of the bracket below a singular point that counts as converged.
    let gap = 10.0 * tol * eps0.max(1.0);
    let mut last_kind = StepKind::Start;
    let mut next = eps;
    for _ in 0..cfg.max_outer {
        let singular = state.objective <= tol;
        if singular {
            // ε is an upper bound for the local ε⋆
            hi = Some(eps);
            if cert.as_ref().is_none_or(|(e, _)| eps < *e) {
                cert = Some((eps, state.delta.clone()));
            }
        } else {
            lo = Some(eps);
        }
        if let (Some(l), Some(u)) = (lo, hi) {
            if u - l <= gap * (1.0 + 1e-6) {
                break;
            }
        }
        let kind;
        if singular {
            let mid = match lo {
                Some(l) => 0.5 * (l + eps),
                None => 0.5 * eps,
            };
            // Newton iterates approach ε⋆ from below, so one landing on a
            // singular point is usually just past it: probe a `gap` below
            // before falling back to halving the bracket.
            next = if last_kind == StepKind::Newton { mid.max(eps - gap) } else { mid };
            kind = StepKind::Bisection;
        } else {
            match derivative_mixed(&state.eig, &state.z, s) {
                Ok(d) if d < 0.0 => {
                    next = newton_update(eps, state.objective, d, mode);
                    kind = StepKind::Newton;
                }
                other => {
                    if let Err(e) = other {
                        notes.push(format!("derivative unavailable at eps={eps:.12}: {e}"));
                    }
                    next = eps * 1.5;
                    kind = StepKind::Bisection;
                }
            }
            if let Some(u) = hi {
                if next >= u {
                    next = 0.5 * (eps + u);
                }
            }
        }
        if (next - eps).abs() < tol {
            break;
        }
        eps = next;
        last_kind = kind;
        state = flow(m, s, eps, &state.delta, mode, cfg, rng)?;
        history.push(entry(eps, &state, kind));
    }
    // One last flow at the final iterate when it improves on the best
    // singular point seen so far.
    if cert.as_ref().is_none_or(|(e, _)| next < *e) && next != eps {
        let r = flow(m, s, next, &state.delta, mode, cfg, rng)?;
        if r.objective <= 10.0 * tol {
            history.push(entry(next, &r, StepKind::Newton));
            cert = Some((next, r.delta));
        }
    }
    match cert {
        Some((eps_f, delta)) => match polish_saturated(m, s, eps_f, &delta, cfg, rng) {
            Some((eps_p, delta_p)) => {
                notes.push(format!("real scalars snapped to ±1 (eps {eps_f:.12} -> {eps_p:.12})"));
                Ok(Outcome { eps_f: eps_p, delta: delta_p, history, notes })
            }
            None => Ok(Outcome { eps_f, delta, history, notes }),
        },
        None => {
            notes.push("no singular point reached; returning the last iterate".into());
            Ok(Outcome { eps_f: eps, delta: state.delta, history, notes })
        }
    }
}

/// Near |ζ| = 0 the descent direction is dominated by round-off, so the flow
/// can reach a singular point with real scalars a hair inside ±1. Snap
/// those onto the bound, freeze them, and redo a few Newton steps in ε
/// moving only the complex blocks. The result replaces the certificate
/// only if it is singular within `POLISH_SLACK` (relative) of `eps`.
fn polish_saturated(m: &CMat, s: &BlockStructure, eps: f64, delta: &Perturbation, cfg: &OuterConfig, rng: &mut ChaCha8Rng) -> Option<(f64, Perturbation)> {
    let mut snapped = delta.clone();
    let mut moved = false;
    for v in snapped.blocks.iter_mut() {
        if let BlockValue::Real(x) = v {
            let gap = 1.0 - x.abs();
            if gap > 0.0 && gap <= SNAP_TOL {
                *x = x.signum();
                moved = true;
            }
        }
    }
    if !moved {
        return None;
    }
    let frozen = OuterConfig { flow: FlowOptions { freeze_real: true, ..cfg.flow }, ..cfg.clone() };
    // Secant on the measured |ζ|: the frozen problem's singular level may
    // lie on either side of `eps`, so the analytic derivative's sign
    // convention does not apply. The first probe uses it for the scale.
    let mut prev = (eps, flow(m, s, eps, &snapped, Mode::Mixed, &frozen, rng).ok()?);
    if prev.1.objective <= cfg.tol {
        return Some((eps, prev.1.delta));
    }
    let d = derivative_mixed(&prev.1.eig, &prev.1.z, s).ok().filter(|d| *d < 0.0)?;
    let mut e = newton_update(eps, prev.1.objective, d, Mode::Mixed);
    for _ in 0..6 {
        if !(e > 0.0 && (e - eps).abs() <= POLISH_SLACK * eps) {
            return None;
        }
        let state = flow(m, s, e, &prev.1.delta, Mode::Mixed, &frozen, rng).ok()?;
        if state.objective <= cfg.tol {
            return Some((e, state.delta));
        }
        let slope = (state.objective - prev.1.objective) / (e - prev.0);
        if !(slope.is_finite() && slope != 0.0) {
            return None;
        }
        let next = e - state.objective / slope;
        prev = (e, state);
        e = next;
    }
    None
}

fn run_from(m: &CMat, s: &BlockStructure, mode: Mode, eps0: f64, first: FlowResult, cfg: &OuterConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    match mode {
        Mode::Complex => run_complex(m, s, eps0, first, cfg, &mut rng),
        Mode::Mixed => run_mixed(m, s, eps0, first, cfg, &mut rng),
    }
}

fn certify(m: &CMat, s: &BlockStructure, mode: Mode, o: Outcome, start: String, starts: Vec<StartReport>, cfg: &OuterConfig) -> Certificate {
    let report = verify_certificate(m, s, o.eps_f, &o.delta, cfg.verify_threshold);
    Certificate {
        mode,
        eps_f: o.eps_f,
        lower_bound: 1.0 / o.eps_f,
        residual: report.singularity_residual,
        verified: report.verified,
        delta_star: o.delta,
        history: o.history,
        report,
        start,
        starts,
        notes: o.notes,
    }
}

/// The leading eigenvector start with its real scalars moved to every other
/// corner of [−1, 1]^k. Purely real problems often have their optimum on a
/// corner the eigenvector projection does not point at.
fn corner_starts(m: &CMat, s: &BlockStructure) -> Vec<(String, Result<Perturbation>)> {
    let reals: Vec<usize> = s.blocks().iter().enumerate().filter(|(_, b)| b.kind == BlockKind::RealScalar).map(|(k, _)| k).collect();
    if reals.is_empty() || reals.len() > MAX_CORNER_REALS {
        return Vec::new();
    }
    let Ok(base) = initial_perturbation(m, s, 0) else { return Vec::new() };
    let mut out = Vec::new();
    for pattern in 0..1usize << reals.len() {
        let mut d = base.delta.clone();
        let mut label = String::from("eig1");
        for (bit, &k) in reals.iter().enumerate() {
            let sign = if pattern >> bit & 1 == 1 { -1.0 } else { 1.0 };
            d.blocks[k] = BlockValue::Real(sign);
            label.push(if sign > 0.0 { '+' } else { '-' });
        }
        if d != base.delta {
            out.push((label, Ok(d)));
        }
    }
    out
}

/// Lower bound for μ_B(M) with a verified destabilizing perturbation.
pub fn compute_lower_bound(m: &CMat, s: &BlockStructure, cfg: &OuterConfig) -> Result<Certificate> {
    if m.nrows() != m.ncols() {
        return Err(MuError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    s.check_dim(m.nrows())?;
    if cfg.tol <= 0.0 {
        return Err(MuError::Invalid("tol must be positive".into()));
    }
    let mode = cfg.mode.unwrap_or_else(|| Mode::for_structure(s));
    let n = m.nrows();
    let i_max = cfg.i_max.unwrap_or_else(|| auto_i_max(n)).clamp(1, n);
    let eps0 = match cfg.eps0 {
        Some(e) if e > 0.0 => e,
        Some(_) => return Err(MuError::Invalid("eps0 must be positive".into())),
        None => initial_epsilon(m, s, i_max)?,
    };

    let mut starts: Vec<(String, Result<Perturbation>)> = Vec::new();
    if let Some(d) = &cfg.init_delta {
        starts.push(("user".into(), d.conforms(s).map(|_| d.clone())));
    }
    for k in 0..i_max {
        starts.push((format!("eig{}", k + 1), initial_perturbation(m, s, k).map(|st| st.delta)));
    }
    if matches!(cfg.starts, StartPolicy::All) {
        starts.extend(corner_starts(m, s));
    }

    let flowed: Vec<(String, Result<FlowResult>)> = cfg.exec.map(starts, |(label, d)| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let r = d.and_then(|d| flow(m, s, eps0, &d, mode, cfg, &mut rng));
        (label, r)
    });
    let mut reports: Vec<StartReport> = flowed
        .iter()
        .map(|(label, r)| StartReport {
            label: label.clone(),
            objective: r.as_ref().ok().map(|r| r.objective),
            eps_f: None,
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    let mut ok: Vec<(usize, FlowResult)> = flowed.into_iter().enumerate().filter_map(|(k, (_, r))| r.ok().map(|r| (k, r))).collect();
    if ok.is_empty() {
        let why = reports.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>().join("; ");
        return Err(MuError::NoProgress(why));
    }

    match cfg.starts {
        StartPolicy::BestAtEps0 => {
            let best = (0..ok.len())
                .reduce(|a, b| if mode.improves(ok[b].1.objective, ok[a].1.objective) { b } else { a })
                .unwrap();
            let (k, first) = ok.swap_remove(best);
            let outcome = run_from(m, s, mode, eps0, first, cfg)?;
            reports[k].eps_f = Some(outcome.eps_f);
            let label = reports[k].label.clone();
            Ok(certify(m, s, mode, outcome, label, reports, cfg))
        }
        StartPolicy::All => {
            let runs: Vec<(usize, Result<Certificate>)> = cfg.exec.map(ok, |(k, first)| {
                let c = run_from(m, s, mode, eps0, first, cfg).map(|o| certify(m, s, mode, o, String::new(), Vec::new(), cfg));
                (k, c)
            });
            let mut best: Option<(usize, Certificate)> = None;
            for (k, c) in runs {
                match c {
                    Ok(c) => {
                        reports[k].eps_f = Some(c.eps_f);
                        let better = match &best {
                            None => true,
                            Some((_, b)) => (c.verified && !b.verified) || (c.verified == b.verified && c.eps_f < b.eps_f),
                        };
                        if better {
                            best = Some((k, c));
                        }
                    }
                    Err(e) => reports[k].error = Some(e.to_string()),
                }
            }
            let (k, mut c) = best.ok_or_else(|| MuError::NoProgress("every start failed".into()))?;
            c.start = reports[k].label.clone();
            c.starts = reports;
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockstruct::{parse_structure, random_complex_matrix};
    use crate::linalg::spectral_radius;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn i_max_rule() {
        assert_eq!(auto_i_max(3), 3);
        assert_eq!(auto_i_max(5), 5);
        assert_eq!(auto_i_max(10), 5);
        assert_eq!(auto_i_max(40), 8);
    }

    #[test]
    fn initial_perturbation_examples() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![c(2., 0.), c(1., 0.)]));
        let s = parse_structure("cs:1,cs:1").unwrap();
        let st = initial_perturbation(&m, &s, 0).unwrap();
        // P_B(y x*) has a zero second block: it is replaced by 1
        assert_eq!(st.degenerate, vec![1]);
        assert!(st.delta.unit_norm_defect() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_complex_matrix(4, &mut rng);
        let s = parse_structure("cf:4").unwrap();
        let st = initial_perturbation(&m, &s, 0).unwrap();
        assert!(st.degenerate.is_empty());
        let (_, x, y) = eigen_start(&m, 0).unwrap();
        let expect = &y * x.adjoint() / C64::new(y.norm() * x.norm(), 0.0);
        assert!((assemble_dense(&st.delta, &s).unwrap() - expect).norm() < 1e-14);
        assert!(matches!(st.delta.blocks[0], BlockValue::Full(FullBlock::RankOne { .. })));
    }

    #[test]
    fn initial_epsilon_examples() {
        let s = parse_structure("cs:1").unwrap();
        let e = initial_epsilon(&CMat::identity(1, 1), &s, 1).unwrap();
        assert!((e - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = parse_structure("cs:1,rs:1,cf:2").unwrap();
        for _ in 0..20 {
            let m = random_complex_matrix(4, &mut rng);
            let e = initial_epsilon(&m, &s, 4).unwrap();
            assert!(e.is_finite() && e > 0.0);
        }
        assert!(matches!(initial_epsilon(&CMat::zeros(1, 1), &s_one(), 1), Err(MuError::ZeroSpectrum)));
    }

    fn s_one() -> BlockStructure {
        parse_structure("cs:1").unwrap()
    }

    #[test]
    fn scalar_derivative_is_modulus() {
        let s = s_one();
        let m = CMat::from_element(1, 1, c(1.5, -2.0));
        let (eig, z) = crate::innerflow::evaluate(&m, &s, 0.3, &Perturbation::identity(&s), Mode::Complex).unwrap();
        assert!((derivative_complex(&eig, &z, &s).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn newton_examples() {
        assert_eq!(newton_update(0.3, 1.0, 2.0, Mode::Complex), 0.3);
        assert!((newton_update(0.3, 0.5, 2.0, Mode::Complex) - 0.55).abs() < 1e-15);
        assert!((newton_update(0.3, 0.2, -2.0, Mode::Mixed) - 0.4).abs() < 1e-15);
        // a step that would make ε negative is halved until it does not
        let e = newton_update(0.1, 3.0, 10.0, Mode::Complex);
        assert!(e > 0.0 && e < 0.1);
    }

    #[test]
    fn trivial_structures() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_complex_matrix(4, &mut rng);
        let cf = compute_lower_bound(&m, &parse_structure("cf:4").unwrap(), &OuterConfig::default()).unwrap();
        assert!(cf.verified);
        assert!((cf.lower_bound / spectral_norm(&m) - 1.0).abs() < 1e-8);
        let cs = compute_lower_bound(&m, &parse_structure("cs:4").unwrap(), &OuterConfig::default()).unwrap();
        assert!(cs.verified);
        assert!((cs.lower_bound / spectral_radius(&m).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_configuration() {
        let m = CMat::identity(2, 2);
        let s = parse_structure("cs:1").unwrap();
        assert!(matches!(compute_lower_bound(&m, &s, &OuterConfig::default()), Err(MuError::DimensionMismatch { .. })));
        let s = parse_structure("cs:2").unwrap();
        let cfg = OuterConfig { tol: 0.0, ..OuterConfig::default() };
        assert!(compute_lower_bound(&m, &s, &cfg).is_err());
        let cfg = OuterConfig { eps0: Some(-1.0), ..OuterConfig::default() };
        assert!(compute_lower_bound(&m, &s, &cfg).is_err());
    }
}
