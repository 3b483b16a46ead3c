//! Structural properties on random instances: tangency of the flow
//! directions, norm conservation, derivative formulas against finite
//! differences, rank-1 against dense flows, trivial reductions and
//! homogeneity.

mod common;

use common::*;
use mubound::blockstruct::{assemble_dense, project_outer, random_complex_matrix, random_unit_perturbation, BlockValue};
use mubound::innerflow::{evaluate, gradient_complex, gradient_mixed, integrate_to_stationary, step_along, Mode};
use mubound::linalg::{spectral_norm, spectral_radius};
use mubound::oracle::{verify_certificate, DEFAULT_VERIFY_THRESHOLD};
use mubound::outer::{compute_lower_bound, initial_perturbation, OuterConfig};
use mubound::{CMat, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn structure_text(blocks: &[(u8, usize)]) -> String {
    blocks
        .iter()
        .map(|&(k, d)| format!("{}:{d}", ["cs", "rs", "cf"][k as usize]))
        .collect::<Vec<_>>()
        .join(",")
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn directions_are_tangent_and_steps_keep_unit_norms(
        blocks in prop::collection::vec((0u8..3, 1usize..4), 1..5),
        seed in any::<u64>(),
        eps in 0.05f64..2.0,
        h in 1e-6f64..1.0,
        rank_one in any::<bool>(),
    ) {
        let s = structure(&structure_text(&blocks));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_complex_matrix(s.n(), &mut rng);
        let mut delta = random_unit_perturbation(&s, seed ^ 1);
        if !rank_one {
            delta = delta.densified();
        }
        let mode = Mode::for_structure(&s);
        let Ok((eig, z)) = evaluate(&m, &s, eps, &delta, mode) else { return Ok(()) };
        let dir = match mode {
            Mode::Complex => gradient_complex(&delta, &s, &eig.x, &z),
            Mode::Mixed => gradient_mixed(&delta, &s, &eig.x, &z),
        };
        // P_B(z x*) never vanishes at a state with a simple nonzero target
        let pz = assemble_dense(&project_outer(&z, &eig.x, &s), &s).unwrap();
        prop_assert!(eig.lambda.norm() == 0.0 || pz.norm() > 0.0);
        prop_assert!(tangency_defect(&delta, &dir.blocks) <= 1e-12);
        let next = step_along(&delta, &dir, h);
        prop_assert!(next.unit_norm_defect() <= 1e-12);
        prop_assert!(next.conforms(&s).is_ok());
    }
}

#[test]
fn derivative_formulas_match_finite_differences() {
    let mut rng = rng(71);
    for mode in [Mode::Complex, Mode::Mixed] {
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 10 {
            attempts += 1;
            assert!(attempts < 60, "too few converged instances for {mode:?}");
            let inst = random_instance(&mut rng, mode);
            let Some(err) = derivative_error(&inst) else { continue };
            assert!(err <= 1e-4, "{mode:?} {}: relative error {err:.2e}", inst.s);
            checked += 1;
        }
    }
}

#[test]
fn rank_one_and_dense_flows_agree() {
    let mut rng = rng(72);
    let pool = ["cf:3", "cs:1,cf:2", "rs:1,cf:2", "cf:2,cf:2", "cs:1,rs:1,cf:3"];
    let opts = tight();
    for k in 0..20 {
        let s = structure(pool[k % pool.len()]);
        let m = random_complex_matrix(s.n(), &mut rng);
        let mode = Mode::for_structure(&s);
        let eps = 0.5 / spectral_norm(&m);
        let d0 = initial_perturbation(&m, &s, 0).unwrap().delta;
        let a = integrate_to_stationary(&m, &s, eps, &d0, mode, &opts).unwrap();
        let b = integrate_to_stationary(&m, &s, eps, &d0.densified(), mode, &opts).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-6, "{s}: {} vs {}", a.objective, b.objective);
    }
}

#[test]
fn trivial_structures_reduce_to_norm_and_radius() {
    let mut rng = rng(73);
    for k in 0..20 {
        let n = 2 + k % 5;
        let m = random_complex_matrix(n, &mut rng);
        let cfg = OuterConfig::default();
        let full = compute_lower_bound(&m, &structure(&format!("cf:{n}")), &cfg).unwrap();
        assert!(rel(full.lower_bound, spectral_norm(&m)) <= 1e-8, "cf:{n}: {} vs {}", full.lower_bound, spectral_norm(&m));
        assert!(full.verified);
        let scalar = compute_lower_bound(&m, &structure(&format!("cs:{n}")), &cfg).unwrap();
        assert!(rel(scalar.lower_bound, spectral_radius(&m).unwrap()) <= 1e-8);
        assert!(scalar.verified);
    }
}

#[test]
fn lower_bound_is_positively_homogeneous() {
    let mut rng = rng(74);
    for (text, alpha) in [("cs:1,cs:1,cf:2", 2.5), ("rs:1,cs:2,cf:1", 0.3), ("rs:2,cf:2", 7.0)] {
        let s = structure(text);
        let m = random_complex_matrix(s.n(), &mut rng);
        let cfg = OuterConfig::default();
        let a = compute_lower_bound(&m, &s, &cfg).unwrap();
        let b = compute_lower_bound(&(&m * C64::new(alpha, 0.0)), &s, &cfg).unwrap();
        assert!(rel(b.lower_bound, alpha * a.lower_bound) <= 1e-8, "{text}: {} vs {}", b.lower_bound, alpha * a.lower_bound);
    }
}

#[test]
fn emitted_certificates_verify() {
    let mut rng = rng(75);
    let pool = ["cs:1,cf:2", "rs:1,cs:1,cf:2", "rs:2,cs:1", "cs:2,cs:2", "rs:1,rs:1,cf:3"];
    for k in 0..10 {
        let s = structure(pool[k % pool.len()]);
        let m: CMat = random_complex_matrix(s.n(), &mut rng);
        let c = compute_lower_bound(&m, &s, &OuterConfig::default()).unwrap();
        let r = verify_certificate(&m, &s, c.eps_f, &c.delta_star, DEFAULT_VERIFY_THRESHOLD);
        assert_eq!(r.verified, c.verified);
        assert!(c.verified, "{s}: residual {:.2e}, notes {:?}", c.residual, c.notes);
        assert!(c.delta_star.unit_norm_defect() <= 1e-10);
    }
}

/// Complex-scalar maximizers are fixed points of the angle equations:
/// rotating any single δᵢ either way cannot increase |λ|.
#[test]
fn scalar_maximizers_are_angle_fixed_points() {
    let mut rng = rng(76);
    let opts = tight();
    for text in ["cs:1,cs:1,cs:1", "cs:2,cs:1", "cs:1,cs:1,cs:2,cs:1"] {
        let s = structure(text);
        let m = random_complex_matrix(s.n(), &mut rng);
        let eps = 1.0 / spectral_norm(&m);
        let d0 = initial_perturbation(&m, &s, 0).unwrap().delta;
        let r = integrate_to_stationary(&m, &s, eps, &d0, Mode::Complex, &opts).unwrap();
        assert!(r.diagnostics.trace.windows(2).all(|w| w[1] >= w[0]));
        for i in 0..s.len() {
            for theta in [1e-3, -1e-3] {
                let mut d = r.delta.clone();
                if let BlockValue::Complex(x) = &mut d.blocks[i] {
                    *x *= C64::from_polar(1.0, theta);
                }
                let (e, _) = evaluate(&m, &s, eps, &d, Mode::Complex).unwrap();
                assert!(e.lambda.norm() <= r.objective * (1.0 + 1e-10), "{text}: block {i} rotated by {theta} improves");
            }
        }
    }
}
