//! JSON formats: matrices, perturbations and certificates.
//!
//! Complex numbers are `{"re": x, "im": y}`. A matrix file is
//! `{"n": n, "re": [[...]], "im": [[...]]}` with `im` optional for real
//! matrices. Rank-1 full blocks carry `sigma`, `p`, `q` and a redundant
//! `dense` expansion so that certificates can be checked without this crate.

use serde::{Deserialize, Serialize};

use crate::blockstruct::{BlockKind, BlockStructure, BlockValue, FullBlock, Perturbation};
use crate::error::{MuError, Result};
use crate::innerflow::Mode;
use crate::oracle::VerificationReport;
use crate::outer::{Certificate, HistoryEntry, StartReport};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(c: C64) -> Self {
        Cx { re: c.re, im: c.im }
    }
}

impl From<Cx> for C64 {
    fn from(c: Cx) -> Self {
        C64::new(c.re, c.im)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixDoc {
    n: usize,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

fn bad(msg: impl Into<String>) -> MuError {
    MuError::Invalid(msg.into())
}

pub fn parse_matrix(text: &str) -> Result<CMat> {
    let doc: MatrixDoc = serde_json::from_str(text).map_err(|e| bad(format!("matrix JSON: {e}")))?;
    let n = doc.n;
    if n == 0 {
        return Err(bad("matrix must be at least 1×1"));
    }
    let check = |rows: &Vec<Vec<f64>>, what: &str| -> Result<()> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(bad(format!("matrix '{what}' part is not {n}×{n}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad(format!("matrix '{what}' part has non-finite entries")));
        }
        Ok(())
    };
    check(&doc.re, "re")?;
    if let Some(im) = &doc.im {
        check(im, "im")?;
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(doc.re[i][j], doc.im.as_ref().map_or(0.0, |im| im[i][j]))))
}

pub fn matrix_to_json(m: &CMat) -> String {
    let n = m.nrows();
    let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
    let real = m.iter().all(|c| c.im == 0.0);
    let im = (!real).then(|| (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect());
    serde_json::to_string(&MatrixDoc { n, re, im }).expect("matrix serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BlockDoc {
    #[serde(rename = "cs")]
    ComplexScalar { value: Cx },
    #[serde(rename = "rs")]
    RealScalar { value: f64 },
    #[serde(rename = "cf")]
    Full {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Cx>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Cx>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<Cx>>,
        dense: Vec<Vec<Cx>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaDoc {
    pub structure: String,
    pub blocks: Vec<BlockDoc>,
}

fn vec_doc(v: &CVec) -> Vec<Cx> {
    v.iter().map(|&c| c.into()).collect()
}

fn dense_doc(m: &CMat) -> Vec<Vec<Cx>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

pub fn delta_doc(delta: &Perturbation, s: &BlockStructure) -> DeltaDoc {
    let blocks = delta
        .blocks
        .iter()
        .map(|v| match v {
            BlockValue::Complex(c) => BlockDoc::ComplexScalar { value: (*c).into() },
            BlockValue::Real(r) => BlockDoc::RealScalar { value: *r },
            BlockValue::Full(f) => {
                let dense = dense_doc(&f.to_dense());
                match f {
                    FullBlock::RankOne { sigma, p, q } => {
                        BlockDoc::Full { sigma: Some((*sigma).into()), p: Some(vec_doc(p)), q: Some(vec_doc(q)), dense }
                    }
                    FullBlock::Dense(_) => BlockDoc::Full { sigma: None, p: None, q: None, dense },
                }
            }
        })
        .collect();
    DeltaDoc { structure: s.to_string(), blocks }
}

/// Rebuild a perturbation, preferring the factored form of full blocks.
pub fn delta_from_doc(doc: &DeltaDoc) -> Result<(BlockStructure, Perturbation)> {
    let s: BlockStructure = doc.structure.parse()?;
    if doc.blocks.len() != s.len() {
        return Err(MuError::DimensionMismatch { expected: s.len(), found: doc.blocks.len() });
    }
    let mut blocks = Vec::with_capacity(s.len());
    for (k, (b, spec)) in doc.blocks.iter().zip(s.blocks()).enumerate() {
        let value = match (b, spec.kind) {
            (BlockDoc::ComplexScalar { value }, BlockKind::ComplexScalar) => BlockValue::Complex((*value).into()),
            (BlockDoc::RealScalar { value }, BlockKind::RealScalar) => BlockValue::Real(*value),
            (BlockDoc::Full { sigma, p, q, dense }, BlockKind::ComplexFull) => {
                let to_vec = |v: &Vec<Cx>| CVec::from_iterator(v.len(), v.iter().map(|&c| C64::from(c)));
                match (sigma, p, q) {
                    (Some(sg), Some(p), Some(q)) if p.len() == spec.dim && q.len() == spec.dim => {
                        BlockValue::Full(FullBlock::RankOne { sigma: (*sg).into(), p: to_vec(p), q: to_vec(q) })
                    }
                    _ => {
                        let d = spec.dim;
                        if dense.len() != d || dense.iter().any(|r| r.len() != d) {
                            return Err(bad(format!("block {k}: dense part is not {d}×{d}")));
                        }
                        BlockValue::Full(FullBlock::Dense(CMat::from_fn(d, d, |i, j| dense[i][j].into())))
                    }
                }
            }
            _ => return Err(bad(format!("block {k}: kind does not match structure '{}'", doc.structure))),
        };
        blocks.push(value);
    }
    let delta = Perturbation::new(blocks);
    delta.conforms(&s)?;
    Ok((s, delta))
}

pub fn parse_delta(text: &str) -> Result<(BlockStructure, Perturbation)> {
    let doc: DeltaDoc = serde_json::from_str(text).map_err(|e| bad(format!("perturbation JSON: {e}")))?;
    delta_from_doc(&doc)
}

pub fn delta_to_json(delta: &Perturbation, s: &BlockStructure) -> String {
    serde_json::to_string_pretty(&delta_doc(delta, s)).expect("perturbation serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryDoc {
    pub eps: f64,
    pub objective: f64,
    pub step: String,
    pub inner_steps: usize,
    pub termination: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub lower_bound: f64,
    pub eps_f: f64,
    pub residual: f64,
    pub verified: bool,
    pub mode: String,
    pub delta: DeltaDoc,
    pub history: Vec<HistoryDoc>,
    #[serde(default)]
    pub start: String,
    #[serde(default)]
    pub starts: Vec<serde_json::Value>,
    #[serde(default)]
    pub verification: Option<serde_json::Value>,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn history_doc(h: &HistoryEntry) -> HistoryDoc {
    HistoryDoc { eps: h.eps, objective: h.objective, step: tag(&h.step), inner_steps: h.inner_steps, termination: tag(&h.termination) }
}

fn start_value(r: &StartReport) -> serde_json::Value {
    serde_json::to_value(r).unwrap_or_default()
}

pub fn certificate_doc(c: &Certificate, s: &BlockStructure) -> CertificateDoc {
    CertificateDoc {
        lower_bound: c.lower_bound,
        eps_f: c.eps_f,
        residual: c.residual,
        verified: c.verified,
        mode: tag(&c.mode),
        delta: delta_doc(&c.delta_star, s),
        history: c.history.iter().map(history_doc).collect(),
        start: c.start.clone(),
        starts: c.starts.iter().map(start_value).collect(),
        verification: serde_json::to_value(&c.report).ok(),
        notes: c.notes.clone(),
    }
}

pub fn certificate_to_json(c: &Certificate, s: &BlockStructure) -> String {
    serde_json::to_string_pretty(&certificate_doc(c, s)).expect("certificate serializes")
}

/// What a `verify` input file contains: a bare perturbation, or a whole
/// certificate that also supplies ε.
pub enum DeltaInput {
    Bare(BlockStructure, Perturbation),
    Certificate { structure: BlockStructure, delta: Perturbation, eps_f: f64 },
}

pub fn parse_delta_or_certificate(text: &str) -> Result<DeltaInput> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(format!("JSON: {e}")))?;
    if value.get("delta").is_some() {
        let doc: CertificateDoc = serde_json::from_value(value).map_err(|e| bad(format!("certificate JSON: {e}")))?;
        let (structure, delta) = delta_from_doc(&doc.delta)?;
        Ok(DeltaInput::Certificate { structure, delta, eps_f: doc.eps_f })
    } else {
        let doc: DeltaDoc = serde_json::from_value(value).map_err(|e| bad(format!("perturbation JSON: {e}")))?;
        let (s, d) = delta_from_doc(&doc)?;
        Ok(DeltaInput::Bare(s, d))
    }
}

pub fn report_to_json(r: &VerificationReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

pub fn mode_name(m: Mode) -> String {
    tag(&m)
}
