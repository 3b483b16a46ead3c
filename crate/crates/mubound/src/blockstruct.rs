//! Perturbation structures, block-diagonal perturbations and the
//! Frobenius-orthogonal projection onto a structure.
//!
//! A structure is written in a small DSL: a comma-separated list of
//! `cs:<r>` (repeated complex scalar `δ I_r`), `rs:<r>` (repeated real
//! scalar) and `cf:<m>` (full complex `m × m` block). Block order is
//! preserved exactly as written.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MuError, Result};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    ComplexScalar,
    RealScalar,
    ComplexFull,
}

impl BlockKind {
    fn tag(self) -> &'static str {
        match self {
            BlockKind::ComplexScalar => "cs",
            BlockKind::RealScalar => "rs",
            BlockKind::ComplexFull => "cf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    blocks: Vec<BlockSpec>,
    offsets: Vec<usize>,
    n: usize,
}

impl BlockStructure {
    pub fn new(blocks: Vec<BlockSpec>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(MuError::EmptyStructure);
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut n = 0;
        for b in &blocks {
            if b.dim == 0 {
                return Err(MuError::MalformedToken(format!("{}:0", b.kind.tag())));
            }
            offsets.push(n);
            n += b.dim;
        }
        Ok(Self { blocks, offsets, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Row/column range occupied by block `k`.
    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k] + self.blocks[k].dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockSpec, Range<usize>)> + '_ {
        (0..self.blocks.len()).map(move |k| (self.blocks[k], self.range(k)))
    }

    pub fn count(&self, kind: BlockKind) -> usize {
        self.blocks.iter().filter(|b| b.kind == kind).count()
    }

    pub fn has_real(&self) -> bool {
        self.count(BlockKind::RealScalar) > 0
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(MuError::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }
}

impl FromStr for BlockStructure {
    type Err = MuError;

    fn from_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(MuError::EmptyStructure);
        }
        let mut blocks = Vec::new();
        for raw in text.split(',') {
            let token = raw.trim();
            let bad = || MuError::MalformedToken(token.to_string());
            let (tag, dim) = token.split_once(':').ok_or_else(bad)?;
            let kind = match tag.trim() {
                "cs" => BlockKind::ComplexScalar,
                "rs" => BlockKind::RealScalar,
                "cf" => BlockKind::ComplexFull,
                _ => return Err(bad()),
            };
            let dim: usize = dim.trim().parse().map_err(|_| bad())?;
            if dim == 0 {
                return Err(bad());
            }
            blocks.push(BlockSpec { kind, dim });
        }
        BlockStructure::new(blocks)
    }
}

/// Parse the structure DSL, e.g. `"rs:2,cf:1"`.
pub fn parse_structure(text: &str) -> Result<BlockStructure> {
    text.parse()
}

impl fmt::Display for BlockStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", b.kind.tag(), b.dim)?;
        }
        Ok(())
    }
}

/// A full complex block, either factored as `σ p q*` or stored densely.
#[derive(Debug, Clone, PartialEq)]
pub enum FullBlock {
    RankOne { sigma: C64, p: CVec, q: CVec },
    Dense(CMat),
}

impl FullBlock {
    pub fn dim(&self) -> usize {
        match self {
            FullBlock::RankOne { p, .. } => p.len(),
            FullBlock::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            FullBlock::RankOne { sigma, p, q } => p * q.adjoint() * *sigma,
            FullBlock::Dense(m) => m.clone(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        match self {
            FullBlock::RankOne { sigma, p, q } => sigma.norm() * p.norm() * q.norm(),
            FullBlock::Dense(m) => m.norm(),
        }
    }

    /// Rank-1 factorization of `c` itself when it is an outer product; used
    /// for blocks that are known to be rank one by construction.
    pub fn rank_one_from_outer(u: &CVec, v: &CVec) -> Option<FullBlock> {
        let (nu, nv) = (u.norm(), v.norm());
        if nu == 0.0 || nv == 0.0 {
            return None;
        }
        Some(FullBlock::RankOne {
            sigma: C64::new(1.0, 0.0),
            p: u.unscale(nu),
            q: v.unscale(nv),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Complex(C64),
    Real(f64),
    Full(FullBlock),
}

/// Block-diagonal perturbation stored block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub blocks: Vec<BlockValue>,
}

impl Perturbation {
    pub fn new(blocks: Vec<BlockValue>) -> Self {
        Self { blocks }
    }

    /// All scalar blocks equal to one and full blocks equal to the identity.
    pub fn identity(s: &BlockStructure) -> Self {
        let blocks = s
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::ComplexScalar => BlockValue::Complex(C64::new(1.0, 0.0)),
                BlockKind::RealScalar => BlockValue::Real(1.0),
                BlockKind::ComplexFull => BlockValue::Full(FullBlock::Dense(CMat::identity(b.dim, b.dim))),
            })
            .collect();
        Self { blocks }
    }

    pub fn zero(s: &BlockStructure) -> Self {
        let blocks = s
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::ComplexScalar => BlockValue::Complex(C64::new(0.0, 0.0)),
                BlockKind::RealScalar => BlockValue::Real(0.0),
                BlockKind::ComplexFull => BlockValue::Full(FullBlock::Dense(CMat::zeros(b.dim, b.dim))),
            })
            .collect();
        Self { blocks }
    }

    /// Check that the block values match the kinds and dimensions of `s`.
    pub fn conforms(&self, s: &BlockStructure) -> Result<()> {
        if self.blocks.len() != s.len() {
            return Err(MuError::DimensionMismatch { expected: s.len(), found: self.blocks.len() });
        }
        for (v, b) in self.blocks.iter().zip(s.blocks()) {
            let ok = match (v, b.kind) {
                (BlockValue::Complex(_), BlockKind::ComplexScalar) => true,
                (BlockValue::Real(_), BlockKind::RealScalar) => true,
                (BlockValue::Full(f), BlockKind::ComplexFull) => {
                    if f.dim() != b.dim {
                        return Err(MuError::DimensionMismatch { expected: b.dim, found: f.dim() });
                    }
                    match f {
                        FullBlock::RankOne { q, .. } => q.len() == b.dim,
                        FullBlock::Dense(m) => m.ncols() == b.dim,
                    }
                }
                _ => false,
            };
            if !ok {
                return Err(MuError::Invalid(format!("block value does not match `{}`", s)));
            }
        }
        Ok(())
    }

    /// Re-impose the unit-ball constraints: complex scalars to unit modulus,
    /// full blocks to unit Frobenius norm, real scalars clamped to [-1, 1].
    /// Vanishing blocks are left untouched.
    pub fn renormalized(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|v| match v {
                BlockValue::Complex(d) => {
                    let r = d.norm();
                    BlockValue::Complex(if r > 0.0 { d / r } else { *d })
                }
                BlockValue::Real(d) => BlockValue::Real(d.clamp(-1.0, 1.0)),
                BlockValue::Full(FullBlock::RankOne { sigma, p, q }) => {
                    let (s, np, nq) = (sigma.norm(), p.norm(), q.norm());
                    BlockValue::Full(FullBlock::RankOne {
                        sigma: if s > 0.0 { sigma / s } else { *sigma },
                        p: if np > 0.0 { p.unscale(np) } else { p.clone() },
                        q: if nq > 0.0 { q.unscale(nq) } else { q.clone() },
                    })
                }
                BlockValue::Full(FullBlock::Dense(m)) => {
                    let f = m.norm();
                    BlockValue::Full(FullBlock::Dense(if f > 0.0 { m.unscale(f) } else { m.clone() }))
                }
            })
            .collect();
        Self { blocks }
    }

    /// Block-wise membership in the unit ball of the structure: |δ| ≤ 1 for
    /// scalars, ‖Δⱼ‖_F ≤ 1 for full blocks, up to `tol`.
    pub fn within_unit_ball(&self, tol: f64) -> bool {
        self.blocks.iter().all(|v| match v {
            BlockValue::Complex(d) => d.norm() <= 1.0 + tol,
            BlockValue::Real(d) => d.abs() <= 1.0 + tol,
            BlockValue::Full(f) => f.frobenius() <= 1.0 + tol,
        })
    }

    /// Largest deviation of any block magnitude from exactly one; real
    /// scalars in the interior count as zero deviation.
    pub fn unit_norm_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|v| match v {
                BlockValue::Complex(d) => (d.norm() - 1.0).abs(),
                BlockValue::Real(d) => (d.abs() - 1.0).max(0.0),
                BlockValue::Full(FullBlock::RankOne { sigma, p, q }) => (sigma.norm() - 1.0)
                    .abs()
                    .max((p.norm() - 1.0).abs())
                    .max((q.norm() - 1.0).abs()),
                BlockValue::Full(FullBlock::Dense(m)) => (m.norm() - 1.0).abs(),
            })
            .fold(0.0, f64::max)
    }

    /// Multiply every complex block by the unit phase `phase`. Real scalars
    /// are left alone; callers only use this on purely complex structures.
    pub fn rotated(&self, phase: C64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|v| match v {
                BlockValue::Complex(d) => BlockValue::Complex(d * phase),
                BlockValue::Real(d) => BlockValue::Real(*d),
                BlockValue::Full(FullBlock::RankOne { sigma, p, q }) => {
                    BlockValue::Full(FullBlock::RankOne { sigma: sigma * phase, p: p.clone(), q: q.clone() })
                }
                BlockValue::Full(FullBlock::Dense(m)) => BlockValue::Full(FullBlock::Dense(m * phase)),
            })
            .collect();
        Self { blocks }
    }

    /// Replace rank-1 full blocks with their dense expansion.
    pub fn densified(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|v| match v {
                BlockValue::Full(f) => BlockValue::Full(FullBlock::Dense(f.to_dense())),
                other => other.clone(),
            })
            .collect();
        Self { blocks }
    }
}

/// Expand a perturbation into its dense block-diagonal matrix.
pub fn assemble_dense(delta: &Perturbation, s: &BlockStructure) -> Result<CMat> {
    delta.conforms(s)?;
    let mut out = CMat::zeros(s.n(), s.n());
    for ((b, r), v) in s.iter().zip(&delta.blocks) {
        match v {
            BlockValue::Complex(d) => {
                for i in r {
                    out[(i, i)] = *d;
                }
            }
            BlockValue::Real(d) => {
                for i in r {
                    out[(i, i)] = C64::new(*d, 0.0);
                }
            }
            BlockValue::Full(f) => {
                out.view_mut((r.start, r.start), (b.dim, b.dim)).copy_from(&f.to_dense());
            }
        }
    }
    Ok(out)
}

/// Frobenius-orthogonal projection of `c` onto the structure (real part of
/// the inner product): trace/r for complex scalars, Re(trace)/r for real
/// scalars and the diagonal sub-block for full blocks.
pub fn project_onto_b(c: &CMat, s: &BlockStructure) -> Result<Perturbation> {
    if c.nrows() != s.n() || c.ncols() != s.n() {
        return Err(MuError::DimensionMismatch { expected: s.n(), found: c.nrows().max(c.ncols()) });
    }
    let blocks = s
        .iter()
        .map(|(b, r)| {
            let sub = c.view((r.start, r.start), (b.dim, b.dim));
            match b.kind {
                BlockKind::ComplexScalar => BlockValue::Complex(sub.trace() / b.dim as f64),
                BlockKind::RealScalar => BlockValue::Real(sub.trace().re / b.dim as f64),
                BlockKind::ComplexFull => BlockValue::Full(FullBlock::Dense(sub.into_owned())),
            }
        })
        .collect();
    Ok(Perturbation { blocks })
}

/// Projection of the outer product `u v*` without forming the n×n matrix;
/// full blocks come back in rank-1 form (σ = ‖uⱼ‖‖vⱼ‖ folded into p).
pub fn project_outer(u: &CVec, v: &CVec, s: &BlockStructure) -> Perturbation {
    let blocks = s
        .iter()
        .map(|(b, r)| {
            let ub = u.rows(r.start, b.dim);
            let vb = v.rows(r.start, b.dim);
            // trace(u_b v_b*) = v_b* u_b
            let tr = vb.dotc(&ub);
            match b.kind {
                BlockKind::ComplexScalar => BlockValue::Complex(tr / b.dim as f64),
                BlockKind::RealScalar => BlockValue::Real(tr.re / b.dim as f64),
                BlockKind::ComplexFull => BlockValue::Full(FullBlock::Dense(ub * vb.adjoint())),
            }
        })
        .collect();
    Perturbation { blocks }
}

/// Real Frobenius inner product Re⟨A, B⟩ = Re trace(A* B) of two dense matrices.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn random_unit_vector<R: Rng>(m: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_fn(m, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let nv = v.norm();
        if nv > 1e-300 {
            return v.unscale(nv);
        }
    }
}

fn random_phase<R: Rng>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Draw a random admissible perturbation from `rng`: unit complex scalars,
/// real scalars uniform on [-1.25, 1.25] clamped to [-1, 1] (so the
/// endpoints carry positive mass), and rank-1 full blocks with Haar unit
/// factors.
pub fn random_unit_with<R: Rng>(s: &BlockStructure, rng: &mut R) -> Perturbation {
    let blocks = s
        .blocks()
        .iter()
        .map(|b| match b.kind {
            BlockKind::ComplexScalar => BlockValue::Complex(random_phase(rng)),
            BlockKind::RealScalar => BlockValue::Real(rng.random_range(-1.25..=1.25f64).clamp(-1.0, 1.0)),
            BlockKind::ComplexFull => BlockValue::Full(FullBlock::RankOne {
                sigma: random_phase(rng),
                p: random_unit_vector(b.dim, rng),
                q: random_unit_vector(b.dim, rng),
            }),
        })
        .collect();
    Perturbation { blocks }
}

pub fn random_unit_perturbation(s: &BlockStructure, seed: u64) -> Perturbation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unit_with(s, &mut rng)
}

/// Random complex matrix with standard normal real and imaginary parts.
pub fn random_complex_matrix<R: Rng>(n: usize, rng: &mut R) -> CMat {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Random real matrix (zero imaginary part) with standard normal entries.
pub fn random_real_matrix<R: Rng>(n: usize, rng: &mut R) -> CMat {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), 0.0))
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> CVec {
    DVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn parses_and_prints() {
        let s = parse_structure("rs:2,cf:1").unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.blocks()[0], BlockSpec { kind: BlockKind::RealScalar, dim: 2 });
        assert_eq!(s.to_string(), "rs:2,cf:1");

        let s = parse_structure("cf:4").unwrap();
        assert_eq!((s.n(), s.len()), (4, 1));

        let s = parse_structure(" cs:1, cs:1,cf:2 ,cs:1").unwrap();
        assert_eq!(s.n(), 5);
        assert_eq!(s.range(2), 2..4);
        assert_eq!(s.range(3), 4..5);
    }

    #[test]
    fn rejects_bad_tokens() {
        assert_eq!(parse_structure("xx:3"), Err(MuError::MalformedToken("xx:3".into())));
        assert!(matches!(parse_structure("cs:0"), Err(MuError::MalformedToken(_))));
        assert!(matches!(parse_structure("cs:-1"), Err(MuError::MalformedToken(_))));
        assert!(matches!(parse_structure("cs"), Err(MuError::MalformedToken(_))));
        assert_eq!(parse_structure(""), Err(MuError::EmptyStructure));
        assert!(matches!(parse_structure("cs:1,"), Err(MuError::MalformedToken(_))));
    }

    #[test]
    fn projection_of_small_examples() {
        let s = parse_structure("cs:2").unwrap();
        let cm = CMat::from_row_slice(2, 2, &[c(1., 0.), c(5., 0.), c(7., 0.), c(3., 0.)]);
        let p = project_onto_b(&cm, &s).unwrap();
        assert_eq!(p.blocks[0], BlockValue::Complex(c(2.0, 0.0)));

        let s = parse_structure("rs:1").unwrap();
        let p = project_onto_b(&CMat::from_element(1, 1, c(1., 2.)), &s).unwrap();
        assert_eq!(p.blocks[0], BlockValue::Real(1.0));

        let s = parse_structure("cs:1").unwrap();
        assert!(project_onto_b(&CMat::zeros(2, 2), &s).is_err());
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let s = parse_structure("cs:1,cs:1,cf:2,cs:1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cm = random_complex_matrix(5, &mut rng);
        let p = project_onto_b(&cm, &s).unwrap();
        let pd = assemble_dense(&p, &s).unwrap();
        let pp = project_onto_b(&pd, &s).unwrap();
        assert!((assemble_dense(&pp, &s).unwrap() - &pd).norm() < 1e-14);

        let resid = &cm - &pd;
        for k in 0..20 {
            let b = assemble_dense(&random_unit_perturbation(&s, k).densified(), &s).unwrap();
            assert!(re_inner(&resid, &b).abs() < 1e-12);
        }

        // mixed structure: residual is orthogonal to real members only
        let s = parse_structure("rs:2,cf:1,cs:2").unwrap();
        let p = project_onto_b(&cm, &s).unwrap();
        let resid = &cm - assemble_dense(&p, &s).unwrap();
        for k in 0..20 {
            let b = assemble_dense(&random_unit_perturbation(&s, 100 + k), &s).unwrap();
            assert!(re_inner(&resid, &b).abs() < 1e-12);
        }
    }

    #[test]
    fn outer_projection_matches_dense() {
        let s = parse_structure("cs:2,rs:1,cf:2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_vector(5, &mut rng);
        let v = random_vector(5, &mut rng);
        let a = assemble_dense(&project_outer(&u, &v, &s), &s).unwrap();
        let b = assemble_dense(&project_onto_b(&(&u * v.adjoint()), &s).unwrap(), &s).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn assembly_examples() {
        let s = parse_structure("rs:2,cf:1").unwrap();
        let d = Perturbation::new(vec![
            BlockValue::Real(-1.0),
            BlockValue::Full(FullBlock::Dense(CMat::from_element(1, 1, c(-0.989237164, -0.146320991)))),
        ]);
        let a = assemble_dense(&d, &s).unwrap();
        assert_eq!(a[(0, 0)], c(-1.0, 0.0));
        assert_eq!(a[(1, 1)], c(-1.0, 0.0));
        assert_eq!(a[(2, 2)], c(-0.989237164, -0.146320991));
        assert_eq!(a[(0, 2)], c(0.0, 0.0));

        let s = parse_structure("cs:2,rs:1,cf:2").unwrap();
        assert_eq!(assemble_dense(&Perturbation::identity(&s), &s).unwrap(), CMat::identity(5, 5));

        let s = parse_structure("cf:2").unwrap();
        let e1 = CVec::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let e2 = CVec::from_vec(vec![c(0., 0.), c(1., 0.)]);
        let d = Perturbation::new(vec![BlockValue::Full(FullBlock::RankOne { sigma: c(1., 0.), p: e1, q: e2 })]);
        let a = assemble_dense(&d, &s).unwrap();
        assert_eq!(a, CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]));
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let s = parse_structure("cs:1,cf:3,rs:2").unwrap();
        let d = random_unit_perturbation(&s, 11).densified();
        let a = assemble_dense(&d, &s).unwrap();
        assert_eq!(project_onto_b(&a, &s).unwrap(), d);
    }

    #[test]
    fn conformance_checks() {
        let s = parse_structure("cs:1,cf:2").unwrap();
        let bad = Perturbation::new(vec![BlockValue::Real(0.5), BlockValue::Full(FullBlock::Dense(CMat::zeros(2, 2)))]);
        assert!(assemble_dense(&bad, &s).is_err());
        let short = Perturbation::new(vec![BlockValue::Complex(c(1., 0.))]);
        assert!(assemble_dense(&short, &s).is_err());
        let wrong = Perturbation::new(vec![BlockValue::Complex(c(1., 0.)), BlockValue::Full(FullBlock::Dense(CMat::zeros(3, 3)))]);
        assert!(matches!(assemble_dense(&wrong, &s), Err(MuError::DimensionMismatch { .. })));
    }

    #[test]
    fn random_perturbations() {
        let s = parse_structure("cs:1").unwrap();
        for seed in 0..10 {
            match &random_unit_perturbation(&s, seed).blocks[0] {
                BlockValue::Complex(d) => assert_relative_eq!(d.norm(), 1.0, epsilon = 1e-15),
                _ => unreachable!(),
            }
        }
        let s = parse_structure("rs:2,cf:1,cs:2,cf:3").unwrap();
        assert_eq!(random_unit_perturbation(&s, 42), random_unit_perturbation(&s, 42));
        assert_ne!(random_unit_perturbation(&s, 42), random_unit_perturbation(&s, 43));

        let s = parse_structure("rs:2,cf:1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut saturated = 0;
        for _ in 0..1000 {
            let d = random_unit_with(&s, &mut rng);
            if let BlockValue::Real(r) = d.blocks[0] {
                if r.abs() == 1.0 {
                    saturated += 1;
                }
            }
            assert!(spectral_norm(&assemble_dense(&d, &s).unwrap()) <= 1.0 + 1e-12);
        }
        assert!(saturated > 0);
    }

    #[test]
    fn renormalization_and_defects() {
        let s = parse_structure("cs:1,rs:1,cf:2").unwrap();
        let d = Perturbation::new(vec![
            BlockValue::Complex(c(3., 4.)),
            BlockValue::Real(-2.5),
            BlockValue::Full(FullBlock::Dense(CMat::from_element(2, 2, c(1., 1.)))),
        ]);
        assert!(!d.within_unit_ball(1e-12));
        let r = d.renormalized();
        assert!(r.within_unit_ball(1e-12));
        assert!(r.unit_norm_defect() < 1e-15);
        assert_eq!(r.blocks[1], BlockValue::Real(-1.0));
        assert!(spectral_norm(&assemble_dense(&r, &s).unwrap()) <= 1.0 + 1e-12);
    }
}
