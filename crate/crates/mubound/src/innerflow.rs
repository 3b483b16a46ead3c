//! Gradient systems at fixed ε.
//!
//! In complex mode the flow drives the largest-modulus eigenvalue λ of
//! εMΔ outward; in mixed mode (any real block present) it drives
//! ζ = 1 − λ, for the eigenvalue λ closest to one, towards zero. Both are
//! integrated with forward Euler, accepting a step only when the objective
//! strictly improves, and projecting back onto the unit-norm constraints
//! after every step.

use serde::Serialize;

use crate::blockstruct::{assemble_dense, re_inner, BlockKind, BlockStructure, BlockValue, FullBlock, Perturbation};
use crate::eigencore::{target_closest_to_one, target_largest, EigenTriple};
use crate::error::{MuError, Result};
use crate::{CMat, CVec, C64};

/// Directions whose unnormalized magnitude falls below this are treated as
/// vanishing (normalizer 1).
const VANISHING: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Maximize |λ| of εMΔ; structures without real blocks.
    Complex,
    /// Minimize |1 − λ| of εMΔ; structures with at least one real block.
    Mixed,
}

impl Mode {
    pub fn for_structure(s: &BlockStructure) -> Mode {
        if s.has_real() {
            Mode::Mixed
        } else {
            Mode::Complex
        }
    }

    pub fn improves(self, new: f64, old: f64) -> bool {
        match self {
            Mode::Complex => new > old,
            Mode::Mixed => new < old,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub h0: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub tol_stat: f64,
    pub tol_obj: f64,
    pub n_stall: usize,
    pub max_steps: usize,
    pub sigma_min: f64,
    /// Hold real scalar blocks fixed; only complex blocks move.
    pub freeze_real: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            h0: 0.1,
            h_max: 1.0,
            h_min: 1e-8,
            tol_stat: 1e-8,
            tol_obj: 1e-10,
            n_stall: 5,
            max_steps: 10_000,
            sigma_min: 1e-8,
            freeze_real: false,
        }
    }
}

/// The target eigenvalue for `mode` of the matrix `a` (already εMΔ).
pub fn target(a: &CMat, mode: Mode) -> Result<EigenTriple> {
    match mode {
        Mode::Complex => target_largest(a),
        Mode::Mixed => target_closest_to_one(a),
    }
}

/// Target eigen-triple of εMΔ together with z = M* y.
pub fn evaluate(m: &CMat, s: &BlockStructure, eps: f64, delta: &Perturbation, mode: Mode) -> Result<(EigenTriple, CVec)> {
    let d = assemble_dense(delta, s)?;
    let eig = target(&(m * d * C64::new(eps, 0.0)), mode)?;
    let z = m.adjoint() * &eig.y;
    Ok((eig, z))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockDirection {
    Complex(C64),
    Real(f64),
    Full(CMat),
    RankOne { sigma_dot: C64, p_dot: CVec, q_dot: CVec },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientDirection {
    pub blocks: Vec<BlockDirection>,
    /// Unnormalized magnitude per block (reciprocal of the normalizer);
    /// |Re(zₗ* xₗ)| for real blocks.
    pub magnitudes: Vec<f64>,
}

fn scalar_direction(delta: C64, x: &CVec, z: &CVec) -> (C64, f64) {
    let g = x.dotc(z);
    let w = g - (g * delta.conj()).re * delta;
    let nw = w.norm();
    (if nw > VANISHING { w / nw } else { w }, nw)
}

fn dense_direction(delta: &CMat, x: &CVec, z: &CVec) -> (CMat, f64) {
    let g = z * x.adjoint();
    let w = &g - delta * C64::new(re_inner(delta, &g), 0.0);
    let nw = w.norm();
    (if nw > VANISHING { w.unscale(nw) } else { w }, nw)
}

fn real_direction(delta: f64, x: &CVec, z: &CVec) -> (f64, f64) {
    let r = z.dotc(x).re;
    // Saturated blocks get a zero direction while the sign pushes outward.
    let w = if r > 0.0 && delta < 1.0 {
        1.0
    } else if r < 0.0 && delta > -1.0 {
        -1.0
    } else {
        0.0
    };
    (w, r.abs())
}

fn gradient(delta: &Perturbation, s: &BlockStructure, x: &CVec, z: &CVec, sigma_min: f64, freeze_real: bool) -> GradientDirection {
    let mut blocks = Vec::with_capacity(s.len());
    let mut magnitudes = Vec::with_capacity(s.len());
    for ((b, r), v) in s.iter().zip(&delta.blocks) {
        let xb = x.rows(r.start, b.dim).into_owned();
        let zb = z.rows(r.start, b.dim).into_owned();
        let (dir, mag) = match v {
            BlockValue::Complex(d) => {
                let (w, m) = scalar_direction(*d, &xb, &zb);
                (BlockDirection::Complex(w), m)
            }
            BlockValue::Real(d) => {
                let (w, m) = real_direction(*d, &xb, &zb);
                (BlockDirection::Real(if freeze_real { 0.0 } else { w }), m)
            }
            BlockValue::Full(f) => {
                let dense = f.to_dense();
                let (w, m) = dense_direction(&dense, &xb, &zb);
                match f {
                    // The factored system is rescaled by the same normalizer
                    // as the dense direction so that every block moves at a
                    // comparable speed; otherwise a block with small
                    // ‖z_j‖‖x_j‖ lags far behind the unit-speed scalars.
                    FullBlock::RankOne { sigma, p, q } => match rhs_rank1(*sigma, p, q, &xb, &zb, sigma_min) {
                        Ok((sd, pd, qd)) => {
                            let k = if m > VANISHING { 1.0 / m } else { 1.0 };
                            let (sigma_dot, p_dot, q_dot) = (sd * k, pd * C64::new(k, 0.0), qd * C64::new(k, 0.0));
                            (BlockDirection::RankOne { sigma_dot, p_dot, q_dot }, m)
                        }
                        Err(_) => (BlockDirection::Full(w), m),
                    },
                    FullBlock::Dense(_) => (BlockDirection::Full(w), m),
                }
            }
        };
        blocks.push(dir);
        magnitudes.push(mag);
    }
    GradientDirection { blocks, magnitudes }
}

/// Ascent direction for |λ|: normalized tangent directions for complex
/// scalars and full blocks (rank-1 blocks get the factored right-hand
/// side). Real blocks, if any, follow the same rule as in mixed mode.
pub fn gradient_complex(delta: &Perturbation, s: &BlockStructure, x: &CVec, z: &CVec) -> GradientDirection {
    gradient(delta, s, x, z, FlowOptions::default().sigma_min, false)
}

/// Descent direction for |ζ|. Complex blocks as in [`gradient_complex`]
/// (x, y being the eigenvectors scaled by the phase of ζ); real scalars move
/// at unit speed along sign(Re(zₗ* xₗ)) unless saturated in that direction.
pub fn gradient_mixed(delta: &Perturbation, s: &BlockStructure, x: &CVec, z: &CVec) -> GradientDirection {
    gradient(delta, s, x, z, FlowOptions::default().sigma_min, false)
}

/// Right-hand side of the rank-1 factored flow for one full block Δ = σ p q*:
/// with α = p* z and β = q* x,
/// σ̇ = i Im(α β̄ σ̄) σ, ṗ = (z − α p) β̄ / σ, q̇ = (x − β q) ᾱ / σ̄.
pub fn rhs_rank1(sigma: C64, p: &CVec, q: &CVec, x: &CVec, z: &CVec, sigma_min: f64) -> Result<(C64, CVec, CVec)> {
    if sigma.norm() < sigma_min {
        return Err(MuError::SigmaUnderflow(sigma.norm()));
    }
    let alpha = p.dotc(z);
    let beta = q.dotc(x);
    let sigma_dot = C64::new(0.0, (alpha * beta.conj() * sigma.conj()).im) * sigma;
    let p_dot = (z - p * alpha) * (beta.conj() / sigma);
    let q_dot = (x - q * beta) * (alpha.conj() / sigma.conj());
    Ok((sigma_dot, p_dot, q_dot))
}

/// Δ + h·dir, block by block, followed by renormalization onto the unit
/// constraints.
pub fn step_along(delta: &Perturbation, dir: &GradientDirection, h: f64) -> Perturbation {
    let hc = C64::new(h, 0.0);
    let blocks = delta
        .blocks
        .iter()
        .zip(&dir.blocks)
        .map(|(v, d)| match (v, d) {
            (BlockValue::Complex(x), BlockDirection::Complex(w)) => BlockValue::Complex(x + hc * w),
            (BlockValue::Real(x), BlockDirection::Real(w)) => BlockValue::Real(x + h * w),
            (BlockValue::Full(FullBlock::RankOne { sigma, p, q }), BlockDirection::RankOne { sigma_dot, p_dot, q_dot }) => {
                BlockValue::Full(FullBlock::RankOne { sigma: sigma + hc * sigma_dot, p: p + p_dot * hc, q: q + q_dot * hc })
            }
            (BlockValue::Full(f), BlockDirection::Full(w)) => BlockValue::Full(FullBlock::Dense(f.to_dense() + w * hc)),
            _ => unreachable!("direction does not match perturbation"),
        })
        .collect();
    Perturbation::new(blocks).renormalized()
}

/// ‖Δ − D·P_B(z x*)‖_F with D normalizing each block of the projection to
/// unit size. Real scalars contribute nothing when saturated in the
/// direction of Re(zₗ* xₗ); otherwise they contribute the scale-free
/// |Re(zₗ* xₗ)| / (‖zₗ‖‖xₗ‖), which vanishes at interior stationary points.
pub fn stationarity_residual(delta: &Perturbation, s: &BlockStructure, x: &CVec, z: &CVec) -> f64 {
    let mut acc = 0.0;
    for ((b, r), v) in s.iter().zip(&delta.blocks) {
        let xb = x.rows(r.start, b.dim);
        let zb = z.rows(r.start, b.dim);
        acc += match v {
            BlockValue::Complex(d) => {
                let g = xb.dotc(&zb);
                if g.norm() > VANISHING {
                    (d - g / g.norm()).norm_sqr()
                } else {
                    0.0
                }
            }
            BlockValue::Real(d) => {
                let g = zb.dotc(&xb).re;
                let saturated = (*d >= 1.0 && g >= 0.0) || (*d <= -1.0 && g <= 0.0);
                if saturated {
                    0.0
                } else {
                    (g / (zb.norm() * xb.norm() + f64::MIN_POSITIVE)).powi(2)
                }
            }
            BlockValue::Full(f) => {
                let g = &zb * xb.adjoint();
                let ng = g.norm();
                if ng > VANISHING {
                    (f.to_dense() - g.unscale(ng)).norm_squared()
                } else {
                    0.0
                }
            }
        };
    }
    acc.sqrt()
}

/// State of one inner integration.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub eps: f64,
    pub delta: Perturbation,
    pub eig: EigenTriple,
    pub z: CVec,
    pub h: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub objective: f64,
}

impl FlowState {
    pub fn new(m: &CMat, s: &BlockStructure, eps: f64, delta: Perturbation, mode: Mode, h0: f64) -> Result<Self> {
        let (eig, z) = evaluate(m, s, eps, &delta, mode)?;
        let objective = eig.value.norm();
        Ok(Self { eps, delta, eig, z, h: h0, accepted_steps: 0, rejected_steps: 0, objective })
    }

    pub fn direction(&self, s: &BlockStructure, opts: &FlowOptions) -> GradientDirection {
        gradient(&self.delta, s, &self.eig.x, &self.z, opts.sigma_min, opts.freeze_real)
    }

    pub fn stationarity(&self, s: &BlockStructure) -> f64 {
        stationarity_residual(&self.delta, s, &self.eig.x, &self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// Step size fell below `h_min` without an improving proposal.
    Underflow,
}

/// One monotone Euler step: halve h until Δ + h·dir improves the
/// objective (then grow h by 1.25 up to `h_max`), or report underflow.
/// Proposals whose target eigenvalue is not simple count as rejections.
pub fn euler_step(state: &mut FlowState, m: &CMat, s: &BlockStructure, mode: Mode, opts: &FlowOptions) -> Result<StepOutcome> {
    let dir = state.direction(s, opts);
    while state.h >= opts.h_min {
        let proposal = step_along(&state.delta, &dir, state.h);
        match evaluate(m, s, state.eps, &proposal, mode) {
            Ok((eig, z)) if mode.improves(eig.value.norm(), state.objective) => {
                state.objective = eig.value.norm();
                state.delta = proposal;
                state.eig = eig;
                state.z = z;
                state.accepted_steps += 1;
                state.h = (1.25 * state.h).min(opts.h_max);
                return Ok(StepOutcome::Accepted);
            }
            Ok(_) | Err(MuError::NonSimpleTarget { .. }) => {
                state.rejected_steps += 1;
                state.h *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(StepOutcome::Underflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stationary,
    Stalled,
    StepUnderflow,
    MaxSteps,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
    pub stationarity: f64,
    /// Objective at the start and after every accepted step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub delta: Perturbation,
    pub eig: EigenTriple,
    pub z: CVec,
    pub objective: f64,
    pub diagnostics: FlowDiagnostics,
}

/// Integrate from `delta0` (renormalized first) until the stationarity
/// residual drops below `tol_stat`, the objective stalls for `n_stall`
/// accepted steps, the step size underflows, or `max_steps` is reached.
pub fn integrate_to_stationary(
    m: &CMat,
    s: &BlockStructure,
    eps: f64,
    delta0: &Perturbation,
    mode: Mode,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    delta0.conforms(s)?;
    let mut st = FlowState::new(m, s, eps, delta0.renormalized(), mode, opts.h0)?;
    let mut trace = vec![st.objective];
    let mut stall = 0;
    let termination = loop {
        if st.stationarity(s) <= opts.tol_stat {
            break Termination::Stationary;
        }
        if st.accepted_steps >= opts.max_steps {
            break Termination::MaxSteps;
        }
        let before = st.objective;
        if euler_step(&mut st, m, s, mode, opts)? == StepOutcome::Underflow {
            break Termination::StepUnderflow;
        }
        trace.push(st.objective);
        if (st.objective - before).abs() < opts.tol_obj {
            stall += 1;
            if stall >= opts.n_stall {
                break Termination::Stalled;
            }
        } else {
            stall = 0;
        }
    };
    let diagnostics = FlowDiagnostics {
        accepted_steps: st.accepted_steps,
        rejected_steps: st.rejected_steps,
        termination,
        stationarity: st.stationarity(s),
        trace,
    };
    Ok(FlowResult { objective: st.objective, delta: st.delta, eig: st.eig, z: st.z, diagnostics })
}

/// Number of complex-scalar, real-scalar and full blocks, in that order.
pub fn block_counts(s: &BlockStructure) -> (usize, usize, usize) {
    (s.count(BlockKind::ComplexScalar), s.count(BlockKind::RealScalar), s.count(BlockKind::ComplexFull))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockstruct::{parse_structure, random_complex_matrix, random_unit_perturbation, random_vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn aligned_scalar_has_no_direction() {
        let s = parse_structure("cs:1").unwrap();
        let x = CVec::from_vec(vec![c(0.6, 0.8)]);
        let z = CVec::from_vec(vec![c(-1.0, 2.0)]);
        let g = x.dotc(&z);
        let delta = Perturbation::new(vec![BlockValue::Complex(g / g.norm())]);
        let dir = gradient_complex(&delta, &s, &x, &z);
        assert_eq!(dir.blocks[0], BlockDirection::Complex(c(0.0, 0.0)));
        assert!(stationarity_residual(&delta, &s, &x, &z) < 1e-15);
    }

    #[test]
    fn aligned_full_block_is_fixed() {
        let s = parse_structure("cf:2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vector(2, &mut rng);
        let z = random_vector(2, &mut rng);
        let g = &z * x.adjoint();
        let delta = Perturbation::new(vec![BlockValue::Full(FullBlock::Dense(g.unscale(g.norm())))]);
        match &gradient_complex(&delta, &s, &x, &z).blocks[0] {
            BlockDirection::Full(w) => assert!(w.norm() < 1e-14),
            _ => unreachable!(),
        }
        let r1 = Perturbation::new(vec![FullBlock::rank_one_from_outer(&z, &x).map(BlockValue::Full).unwrap()]);
        match &gradient_complex(&r1, &s, &x, &z).blocks[0] {
            BlockDirection::RankOne { sigma_dot, p_dot, q_dot } => {
                assert!(sigma_dot.norm() < 1e-14 && p_dot.norm() < 1e-14 && q_dot.norm() < 1e-14)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn real_block_rules() {
        let s = parse_structure("rs:1").unwrap();
        let x = CVec::from_vec(vec![c(1.0, 0.0)]);
        let pos = CVec::from_vec(vec![c(2.0, 1.0)]);
        let neg = CVec::from_vec(vec![c(-2.0, 1.0)]);
        let at = |d: f64, z: &CVec| gradient_mixed(&Perturbation::new(vec![BlockValue::Real(d)]), &s, &x, z).blocks[0].clone();
        assert_eq!(at(1.0, &pos), BlockDirection::Real(0.0));
        assert_eq!(at(0.5, &neg), BlockDirection::Real(-1.0));
        assert_eq!(at(-1.0, &neg), BlockDirection::Real(0.0));
        assert_eq!(at(-1.0, &pos), BlockDirection::Real(1.0));
    }

    /// Random state and direction at a random admissible point.
    fn random_state(s: &BlockStructure, seed: u64) -> (Perturbation, CVec, CVec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_unit_perturbation(s, seed);
        (d, random_vector(s.n(), &mut rng), random_vector(s.n(), &mut rng))
    }

    #[test]
    fn directions_are_tangent() {
        let s = parse_structure("cs:1,cf:2,cs:2,rs:1,cf:3").unwrap();
        for seed in 0..100 {
            let (d, x, z) = random_state(&s, seed);
            let dd = d.densified();
            for (delta, dir) in [(&d, gradient_mixed(&d, &s, &x, &z)), (&dd, gradient_complex(&dd, &s, &x, &z))] {
                for (v, w) in delta.blocks.iter().zip(&dir.blocks) {
                    match (v, w) {
                        (BlockValue::Complex(a), BlockDirection::Complex(b)) => assert!((a.conj() * b).re.abs() < 1e-12),
                        (BlockValue::Full(f), BlockDirection::Full(b)) => assert!(re_inner(&f.to_dense(), b).abs() < 1e-12),
                        (BlockValue::Full(FullBlock::RankOne { sigma, p, q }), BlockDirection::RankOne { sigma_dot, p_dot, q_dot }) => {
                            assert!((sigma.conj() * sigma_dot).re.abs() < 1e-12);
                            assert!(p.dotc(p_dot).norm() < 1e-12 && q.dotc(q_dot).norm() < 1e-12);
                        }
                        (BlockValue::Real(_), BlockDirection::Real(_)) => {}
                        _ => panic!("mismatched block"),
                    }
                }
            }
        }
    }

    #[test]
    fn rank_one_rhs_matches_projected_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let s = parse_structure("cf:4").unwrap();
            let d = random_unit_perturbation(&s, rng.random_range(0..u64::MAX));
            let (sigma, p, q) = match &d.blocks[0] {
                BlockValue::Full(FullBlock::RankOne { sigma, p, q }) => (*sigma, p.clone(), q.clone()),
                _ => unreachable!(),
            };
            let x = random_vector(4, &mut rng);
            let z = random_vector(4, &mut rng);
            let (sd, pd, qd) = rhs_rank1(sigma, &p, &q, &x, &z, 1e-8).unwrap();
            let expanded = &p * q.adjoint() * sd + &pd * q.adjoint() * sigma + &p * qd.adjoint() * sigma;
            let delta = &p * q.adjoint() * sigma;
            let g = &z * x.adjoint();
            let zt = &g - &delta * C64::new(re_inner(&delta, &g), 0.0);
            let id = CMat::identity(4, 4);
            let projected = &zt - (&id - &p * p.adjoint()) * &zt * (&id - &q * q.adjoint());
            assert!((expanded - projected).norm() < 1e-10);
            assert!((sigma.conj() * sd).re.abs() < 1e-14);
        }
    }

    #[test]
    fn rank_one_rhs_underflow() {
        let p = CVec::from_vec(vec![c(1., 0.)]);
        assert!(matches!(rhs_rank1(c(1e-9, 0.), &p, &p, &p, &p, 1e-8), Err(MuError::SigmaUnderflow(_))));
    }

    #[test]
    fn halving_after_rejections() {
        // Saturated real scalar pushed outward: every proposal reproduces the
        // current point and is rejected.
        let s = parse_structure("rs:1").unwrap();
        let m = CMat::from_element(1, 1, c(2.0, 0.0));
        let at = |h_min: f64| {
            let opts = FlowOptions { h_min, ..FlowOptions::default() };
            let mut st = FlowState::new(&m, &s, 0.25, Perturbation::identity(&s), Mode::Mixed, opts.h0).unwrap();
            assert_eq!(euler_step(&mut st, &m, &s, Mode::Mixed, &opts).unwrap(), StepOutcome::Underflow);
            st
        };
        let st = at(0.1 / 8.0 + 1e-12);
        assert_eq!((st.rejected_steps, st.h), (3, 0.1 / 8.0));
        let st = at(0.1 / 8.0);
        assert_eq!(st.rejected_steps, 4);
    }

    #[test]
    fn flows_are_monotone_and_norm_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (k, text) in ["cs:1,cf:2,cs:2", "rs:1,cs:2,cf:2", "cf:5", "rs:2,rs:1,cs:2"].iter().enumerate() {
            let s = parse_structure(text).unwrap();
            let m = random_complex_matrix(5, &mut rng);
            let mode = Mode::for_structure(&s);
            let opts = FlowOptions { max_steps: 300, ..FlowOptions::default() };
            let mut st = FlowState::new(&m, &s, 0.3, random_unit_perturbation(&s, k as u64).renormalized(), mode, opts.h0).unwrap();
            for _ in 0..300 {
                let before = st.objective;
                if euler_step(&mut st, &m, &s, mode, &opts).unwrap() == StepOutcome::Underflow {
                    break;
                }
                assert!(mode.improves(st.objective, before));
                assert!(st.delta.unit_norm_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_only_fixed_points_align_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = parse_structure("cs:1,cs:2,cs:1").unwrap();
        let m = random_complex_matrix(4, &mut rng);
        let r = integrate_to_stationary(&m, &s, 1.0, &Perturbation::identity(&s), Mode::Complex, &FlowOptions::default()).unwrap();
        for ((b, rg), v) in s.iter().zip(&r.delta.blocks) {
            let g = r.eig.x.rows(rg.start, b.dim).dotc(&r.z.rows(rg.start, b.dim));
            if let BlockValue::Complex(d) = v {
                // The stall test stops once |λ| changes by < 1e-10 per step;
                // near a quadratic maximum that pins the angles to ~1e-5.
                assert!((d.arg() - g.arg()).sin().abs() < 1e-5);
                assert!((*d - g / g.norm()).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn full_block_flow_reaches_two_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_complex_matrix(4, &mut rng);
        let s = parse_structure("cf:4").unwrap();
        let r = integrate_to_stationary(&m, &s, 1.0, &random_unit_perturbation(&s, 1), Mode::Complex, &FlowOptions::default()).unwrap();
        let two_norm = crate::linalg::spectral_norm(&m);
        assert!((r.objective - two_norm).abs() < 1e-8 * two_norm);
        assert!(r.diagnostics.trace.windows(2).all(|w| w[1] > w[0]));
    }
}
