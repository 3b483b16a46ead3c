//! Regression matrices with their published structures, reference values
//! and the extremal perturbations printed alongside them.
//!
//! The same matrices ship as JSON under `crates/mubound/fixtures/` for the
//! command-line tool; a test keeps the two copies in sync.

use crate::blockstruct::{BlockValue, FullBlock, Perturbation};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub structure: &'static str,
    pub matrix: CMat,
}

/// A perturbation printed together with the level ε at which it is claimed
/// to make I − εMΔ singular.
#[derive(Debug, Clone)]
pub struct PrintedPoint {
    pub eps: f64,
    pub delta: Perturbation,
}

fn to_matrix<const N: usize>(rows: &[[(f64, f64); N]; N]) -> CMat {
    CMat::from_fn(N, N, |i, j| C64::new(rows[i][j].0, rows[i][j].1))
}

fn cvec(v: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&(re, im)| C64::new(re, im)))
}

fn rvec(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&re| C64::new(re, 0.0)))
}

fn phase(theta: f64) -> BlockValue {
    BlockValue::Complex(C64::from_polar(1.0, theta))
}

fn dense<const N: usize>(rows: &[[(f64, f64); N]; N]) -> BlockValue {
    BlockValue::Full(FullBlock::Dense(to_matrix(rows)))
}

fn outer(p: CVec, q: CVec) -> BlockValue {
    BlockValue::Full(FullBlock::RankOne { sigma: C64::new(1.0, 0.0), p, q })
}

/// 3×3, `rs:2,cf:1`; lower bound 2.2459865301.
pub const MIXED_3X3_BOUND: f64 = 2.2459865301;
pub const MIXED_3X3_EPS: f64 = 0.445238645;
/// 5×5, `cs:1,cs:1,cf:2,cs:1`; lower bound 4.484405922 (upper bound 4.48638).
pub const COMPLEX_5X5_BOUND: f64 = 4.484405922;
pub const COMPLEX_5X5_EPS: f64 = 0.222994978;
/// 5×5, `rs:1,rs:1,cs:1,cs:2`; lower bound 3.300239739, believed exact.
pub const MIXED_5X5_BOUND: f64 = 3.300239739;
pub const MIXED_5X5_EPS: f64 = 0.30300829;
/// 5×5 with entries in {0, ±1/2, ±i, ...}, `rs:3,cf:2`.
pub const HALVES_5X5_EPS0: f64 = 0.321154624817;
pub const HALVES_5X5_ITERATES: [f64; 4] = [0.321154624817, 0.475935094375, 0.475938192593, 0.475938192594];
pub const HALVES_5X5_ZETA0: f64 = 0.325206140643;
pub const HALVES_5X5_BOUND: f64 = 2.101113160408110;
/// 10×10 real, `rs:1,rs:1,cs:1,cs:2,cf:5`.
pub const REAL_10X10_EPS0: f64 = 0.201123467713;
pub const REAL_10X10_ITERATES: [f64; 3] = [0.201123467713, 0.227979361395, 0.227979361429];
pub const REAL_10X10_BOUND: f64 = 4.38636196596;
/// 10×10, `cf:2,rs:4,rs:4`, restarted at ε₀ = 0.23 from a suboptimal point.
pub const COMBO_10X10_EPS0: f64 = 0.23;
pub const COMBO_10X10_ZETA0: f64 = 0.0202192609;
pub const COMBO_10X10_BOUND: f64 = 4.259161456;
pub const COMBO_10X10_EPS: f64 = 0.23478601;

pub fn mixed_3x3() -> Fixture {
    Fixture { name: "mixed_3x3", structure: "rs:2,cf:1", matrix: to_matrix(&MIXED_3X3) }
}

pub fn complex_5x5() -> Fixture {
    Fixture { name: "complex_5x5", structure: "cs:1,cs:1,cf:2,cs:1", matrix: to_matrix(&COMPLEX_5X5) }
}

pub fn mixed_5x5() -> Fixture {
    Fixture { name: "mixed_5x5", structure: "rs:1,rs:1,cs:1,cs:2", matrix: to_matrix(&MIXED_5X5) }
}

pub fn halves_5x5() -> Fixture {
    Fixture { name: "halves_5x5", structure: "rs:3,cf:2", matrix: to_matrix(&HALVES_5X5) }
}

pub fn real_10x10() -> Fixture {
    Fixture { name: "real_10x10", structure: "rs:1,rs:1,cs:1,cs:2,cf:5", matrix: to_matrix(&REAL_10X10) }
}

pub fn combo_10x10() -> Fixture {
    Fixture { name: "combo_10x10", structure: "cf:2,rs:4,rs:4", matrix: to_matrix(&COMBO_10X10) }
}

pub fn all() -> Vec<Fixture> {
    vec![mixed_3x3(), complex_5x5(), mixed_5x5(), halves_5x5(), real_10x10(), combo_10x10()]
}

pub fn mixed_3x3_extremal() -> PrintedPoint {
    PrintedPoint {
        eps: MIXED_3X3_EPS,
        delta: Perturbation::new(vec![BlockValue::Real(-1.0), dense(&[[(-0.989237164, -0.146320991)]])]),
    }
}

pub fn complex_5x5_extremal() -> PrintedPoint {
    let u1 = cvec(&[(0.15703326, 0.85130227), (0.29626531, -0.40354908)]);
    let v1 = cvec(&[(0.68793173, 0.0), (0.28357426, 0.66808351)]);
    PrintedPoint {
        eps: COMPLEX_5X5_EPS,
        delta: Perturbation::new(vec![phase(-2.49033999), phase(1.24640446), outer(u1, v1), phase(-1.72494213)]),
    }
}

pub fn mixed_5x5_extremal() -> PrintedPoint {
    PrintedPoint {
        eps: MIXED_5X5_EPS,
        delta: Perturbation::new(vec![BlockValue::Real(-1.0), BlockValue::Real(1.0), phase(-0.91357833), phase(-2.076961991)]),
    }
}

/// The real scalar is printed as +1; only −1 makes the matrix singular
/// (residual ~6e-11 against ~0.2 with +1), so it is stored as −1.
pub fn halves_5x5_extremal() -> PrintedPoint {
    PrintedPoint {
        eps: HALVES_5X5_ITERATES[3],
        delta: Perturbation::new(vec![
            BlockValue::Real(-1.0),
            dense(&[
                [(0.8414902738, -0.0310321080), (-0.0774400898, 0.4310267415)],
                [(0.2196113059, 0.1726644616), (-0.1120620799, 0.0924665133)],
            ]),
        ]),
    }
}

pub fn real_10x10_extremal() -> PrintedPoint {
    let u = rvec(&[0.85457765, -0.04668806, -0.28462457, 0.41144779, 0.13121292]);
    let v = rvec(&[0.15895464, 0.22255005, -0.28570067, 0.49433879, 0.77408603]);
    PrintedPoint {
        eps: REAL_10X10_ITERATES[2],
        delta: Perturbation::new(vec![
            BlockValue::Real(-1.0),
            BlockValue::Real(1.0),
            BlockValue::Complex(C64::new(-1.0, 0.0)),
            BlockValue::Complex(C64::new(-1.0, 0.0)),
            outer(u, v),
        ]),
    }
}

/// Starting point produced by an external upper/lower bound tool.
pub fn real_10x10_external() -> PrintedPoint {
    let u = rvec(&[0.93916167, 0.06094908, -0.22409849, 0.25285464, -0.01024501]);
    let v = rvec(&[0.21233474, 0.27182946, -0.57210258, 0.41515717, 0.61754828]);
    PrintedPoint {
        eps: 0.23674574,
        delta: Perturbation::new(vec![
            BlockValue::Real(-1.0),
            BlockValue::Real(-1.0),
            BlockValue::Complex(C64::new(-1.0, 0.0)),
            BlockValue::Complex(C64::new(1.0, 0.0)),
            outer(u, v),
        ]),
    }
}

/// Suboptimal point from an external tool: real scalars strictly inside
/// (-1, 1), so it cannot be a local extremizer.
pub fn combo_10x10_external() -> PrintedPoint {
    PrintedPoint {
        eps: 0.532790989,
        delta: Perturbation::new(vec![
            dense(&[
                [(0.01622800, -0.44875053), (0.33074886, -0.68259094)],
                [(-0.10388720, -0.21700229), (-0.01277064, -0.40618809)],
            ]),
            BlockValue::Real(0.37144260),
            BlockValue::Real(-0.25823740),
        ]),
    }
}

/// The printed final perturbation. It is singular at ε ≈ 0.2350000040,
/// not at the printed ε* = 0.23478601, so `eps` here is the former.
pub fn combo_10x10_extremal() -> PrintedPoint {
    PrintedPoint {
        eps: 0.2350000040,
        delta: Perturbation::new(vec![
            dense(&[
                [(0.44211256, -0.19582232), (0.38904261, -0.75366740)],
                [(0.04777399, -0.09593068), (-0.04015431, -0.18364087)],
            ]),
            BlockValue::Real(-1.0),
            BlockValue::Real(-1.0),
        ]),
    }
}

const MIXED_3X3: [[(f64, f64); 3]; 3] = [
    [(-1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)],
    [(-1.0, 1.0), (-1.0, 0.0), (0.0, 1.0)],
    [(0.0, 1.0), (-1.0, -1.0), (1.0, -1.0)],
];

const COMPLEX_5X5: [[(f64, f64); 5]; 5] = [
    [(-0.1, -0.55), (-0.57, -1.59), (-1.34, -1.7), (0.04, 0.49), (-0.18, 0.19)],
    [(-1.48, -2.17), (0.58, 1.17), (0.05, 0.53), (0.11, -0.42), (0.26, 1.19)],
    [(-0.53, 0.59), (0.78, -1.48), (0.15, 0.0), (-0.25, 1.46), (0.33, 1.32)],
    [(0.24, 0.79), (-0.12, -0.65), (1.79, -0.09), (-0.63, 1.39), (-0.88, 0.1)],
    [(-2.03, 1.33), (-1.22, -0.22), (0.45, -1.49), (0.94, -0.13), (-1.02, 2.33)],
];

const MIXED_5X5: [[(f64, f64); 5]; 5] = [
    [(-1.54, -1.28), (-0.56, 0.57), (-0.03, -0.63), (-0.64, -0.55), (0.46, -0.22)],
    [(-1.08, 1.91), (1.16, -0.08), (-0.41, -0.13), (0.04, -0.06), (-0.01, -0.71)],
    [(0.11, -2.16), (0.53, 0.79), (-0.33, 0.26), (0.44, 0.02), (0.2, 0.96)],
    [(0.52, 0.29), (2.38, 0.09), (-0.03, 0.06), (0.01, 1.12), (0.51, -0.77)],
    [(-1.3, 0.34), (-1.72, 0.14), (1.02, 1.34), (0.35, -0.75), (0.48, 0.04)],
];

const HALVES_5X5: [[(f64, f64); 5]; 5] = [
    [(0.0, 1.0), (0.5, -0.5), (1.0, 0.0), (1.0, 0.0), (0.5, 0.0)],
    [(0.5, 0.0), (-0.5, 0.0), (0.0, 1.0), (0.0, 1.0), (0.5, -0.5)],
    [(0.0, 1.0), (1.0, -0.5), (1.0, 0.0), (0.5, 0.0), (0.0, 0.0)],
    [(-0.5, 0.0), (0.5, 1.0), (-0.5, 0.5), (1.0, 0.5), (0.5, -0.5)],
    [(0.5, 1.0), (0.5, 0.5), (0.0, 0.0), (-0.5, -0.5), (0.5, -0.5)],
];

const REAL_10X10: [[(f64, f64); 10]; 10] = [
    [(-0.43, 0.0), (0.9, 0.0), (-0.61, 0.0), (1.03, 0.0), (0.98, 0.0), (2.0, 0.0), (0.05, 0.0), (0.14, 0.0), (0.86, 0.0), (0.02, 0.0)],
    [(-0.17, 0.0), (-1.84, 0.0), (-1.22, 0.0), (-0.35, 0.0), (-0.3, 0.0), (0.95, 0.0), (1.75, 0.0), (-1.64, 0.0), (0.11, 0.0), (-0.05, 0.0)],
    [(-0.22, 0.0), (0.07, 0.0), (0.32, 0.0), (1.01, 0.0), (1.14, 0.0), (-0.43, 0.0), (0.16, 0.0), (-0.76, 0.0), (0.4, 0.0), (1.7, 0.0)],
    [(0.54, 0.0), (0.04, 0.0), (-1.34, 0.0), (0.63, 0.0), (-0.53, 0.0), (0.65, 0.0), (-1.24, 0.0), (-0.82, 0.0), (0.88, 0.0), (-0.51, 0.0)],
    [(0.39, 0.0), (2.23, 0.0), (-1.03, 0.0), (-0.21, 0.0), (0.97, 0.0), (-0.36, 0.0), (-2.19, 0.0), (0.52, 0.0), (0.18, 0.0), (0.0, 0.0)],
    [(0.75, 0.0), (-0.07, 0.0), (1.33, 0.0), (-0.87, 0.0), (-0.52, 0.0), (0.71, 0.0), (-0.33, 0.0), (-0.01, 0.0), (0.55, 0.0), (0.92, 0.0)],
    [(1.78, 0.0), (-0.51, 0.0), (-0.42, 0.0), (-1.04, 0.0), (0.18, 0.0), (1.42, 0.0), (0.71, 0.0), (-1.16, 0.0), (0.68, 0.0), (0.15, 0.0)],
    [(1.22, 0.0), (0.24, 0.0), (-0.14, 0.0), (-0.27, 0.0), (0.97, 0.0), (-1.6, 0.0), (0.32, 0.0), (-0.01, 0.0), (1.17, 0.0), (1.4, 0.0)],
    [(-1.28, 0.0), (0.25, 0.0), (0.9, 0.0), (-0.44, 0.0), (-0.41, 0.0), (1.03, 0.0), (0.41, 0.0), (-0.69, 0.0), (0.48, 0.0), (1.03, 0.0)],
    [(-2.33, 0.0), (0.07, 0.0), (-0.3, 0.0), (-0.41, 0.0), (-0.44, 0.0), (1.46, 0.0), (-0.58, 0.0), (-0.67, 0.0), (1.41, 0.0), (0.29, 0.0)],
];

const COMBO_10X10: [[(f64, f64); 10]; 10] = [
    [(-1.0, 1.0), (0.0, 0.0), (-1.0, -2.0), (-1.0, 0.0), (1.0, 0.0), (0.0, -2.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0), (2.0, -1.0)],
    [(0.0, 1.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (0.0, -1.0), (2.0, 0.0)],
    [(0.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, -2.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (-2.0, -1.0)],
    [(0.0, 1.0), (-4.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (-1.0, 2.0), (0.0, -1.0), (0.0, 2.0), (3.0, -1.0)],
    [(0.0, 0.0), (0.0, -1.0), (-1.0, 1.0), (0.0, 2.0), (-1.0, 2.0), (-2.0, 2.0), (1.0, 1.0), (2.0, -1.0), (1.0, 1.0), (1.0, -1.0)],
    [(-2.0, 0.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (0.0, -1.0), (0.0, -2.0), (0.0, -1.0), (-1.0, -1.0), (-1.0, -1.0), (0.0, 0.0)],
    [(1.0, 0.0), (1.0, -1.0), (1.0, -1.0), (0.0, 0.0), (-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 2.0)],
    [(-1.0, 0.0), (0.0, 2.0), (-2.0, 1.0), (1.0, 0.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0), (1.0, 1.0), (0.0, -2.0), (1.0, -1.0)],
    [(-1.0, -2.0), (0.0, -1.0), (-1.0, 1.0), (-1.0, -2.0), (0.0, 1.0), (0.0, 0.0), (-1.0, -1.0), (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
    [(0.0, -2.0), (0.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (0.0, -1.0), (0.0, 0.0), (0.0, 1.0), (-2.0, -1.0), (0.0, 0.0), (0.0, 1.0)],
];
