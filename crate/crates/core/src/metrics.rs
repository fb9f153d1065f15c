//! Structure and weight prediction scores. Every metric first rescales the
//! estimate to trace `N`, so all of them are invariant to positive scaling.

use serde::{Deserialize, Serialize};

use crate::error::{GlenError, Result};
use crate::graph::{normalize_trace, LaplacianMatrix};

pub const EDGE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub nmi: f64,
    pub re_l: f64,
    pub re_edge_l1: f64,
    pub re_edge_l2: f64,
    pub re_deg_l1: f64,
    pub re_deg_l2: f64,
}

/// Predicted edges over the strict upper triangle (row-major), after trace
/// normalization; an all-zero estimate predicts nothing.
pub fn binarize_edges(l_hat: &LaplacianMatrix, threshold: f64) -> Vec<bool> {
    match normalize_trace(l_hat) {
        Ok(l) => l.edge_weights().into_iter().map(|w| w > threshold).collect(),
        Err(_) => vec![false; l_hat.n_nodes() * l_hat.n_nodes().saturating_sub(1) / 2],
    }
}

fn check_lengths(pred: &[bool], truth: &[bool]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(GlenError::Dimension(format!(
            "prediction has {} slots but truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// `(precision, recall, F)`.
pub fn structure_metrics(pred: &[bool], truth: &[bool]) -> Result<(f64, f64, f64)> {
    check_lengths(pred, truth)?;
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let n_pred = pred.iter().filter(|p| **p).count() as f64;
    let n_true = truth.iter().filter(|t| **t).count() as f64;
    let precision = if n_pred > 0.0 { tp / n_pred } else { 0.0 };
    let recall = if n_true > 0.0 { tp / n_true } else { 0.0 };
    let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok((precision, recall, f))
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Mutual information of the 2×2 contingency table, normalized by the
/// geometric mean of the marginal entropies.
pub fn nmi_binary(pred: &[bool], truth: &[bool]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Err(GlenError::Empty("nmi needs at least one slot".into()));
    }
    let n = pred.len() as f64;
    let mut table = [[0.0f64; 2]; 2];
    for (p, t) in pred.iter().zip(truth) {
        table[*p as usize][*t as usize] += 1.0;
    }
    let joint: Vec<f64> = table.iter().flatten().map(|c| c / n).collect();
    let pa = [joint[0] + joint[1], joint[2] + joint[3]];
    let pb = [joint[0] + joint[2], joint[1] + joint[3]];
    let (ha, hb) = (entropy(&pa), entropy(&pb));
    if ha == 0.0 || hb == 0.0 {
        return Ok(if pred == truth { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let pj = joint[2 * a + b];
            if pj > 0.0 {
                mi += pj * (pj / (pa[a] * pb[b])).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

fn rel(diff: impl Iterator<Item = (f64, f64)>, p: u8) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in diff {
        if p == 1 {
            num += (a - b).abs();
            den += b.abs();
        } else {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if p == 1 {
        (num, den)
    } else {
        (num.sqrt(), den.sqrt())
    }
}

fn ratio((num, den): (f64, f64), what: &str) -> Result<f64> {
    if den == 0.0 {
        return Err(GlenError::Statistic(format!("ground truth {what} has zero norm")));
    }
    Ok(num / den)
}

/// `(RE_L, RE_edge ℓ1, RE_edge ℓ2, RE_deg ℓ1, RE_deg ℓ2)` after normalizing
/// both Laplacians to trace `N`.
pub fn relative_errors(l_hat: &LaplacianMatrix, l0: &LaplacianMatrix) -> Result<(f64, f64, f64, f64, f64)> {
    if l_hat.n_nodes() != l0.n_nodes() {
        return Err(GlenError::Dimension("estimate and ground truth sizes differ".into()));
    }
    let a = normalize_trace(l_hat)?;
    let b = normalize_trace(l0)?;
    let pairs = |x: &LaplacianMatrix, y: &LaplacianMatrix| {
        x.matrix().iter().copied().zip(y.matrix().iter().copied()).collect::<Vec<_>>()
    };
    let re_l = ratio(rel(pairs(&a, &b).into_iter(), 2), "laplacian")?;
    let (ea, eb) = (a.edge_weights(), b.edge_weights());
    let edges = || ea.iter().copied().zip(eb.iter().copied());
    let (da, db) = (a.degrees(), b.degrees());
    let degs = || da.iter().copied().zip(db.iter().copied());
    Ok((
        re_l,
        ratio(rel(edges(), 1), "edge vector")?,
        ratio(rel(edges(), 2), "edge vector")?,
        ratio(rel(degs(), 1), "degree vector")?,
        ratio(rel(degs(), 2), "degree vector")?,
    ))
}

/// Full report of `l_hat` against the generating Laplacian.
pub fn evaluate(l_hat: &LaplacianMatrix, l0: &LaplacianMatrix) -> Result<EvalReport> {
    let pred = binarize_edges(l_hat, EDGE_THRESHOLD);
    let truth = binarize_edges(l0, EDGE_THRESHOLD);
    let (precision, recall, f_score) = structure_metrics(&pred, &truth)?;
    let nmi = nmi_binary(&pred, &truth)?;
    let (re_l, re_edge_l1, re_edge_l2, re_deg_l1, re_deg_l2) = relative_errors(l_hat, l0)?;
    Ok(EvalReport { precision, recall, f_score, nmi, re_l, re_edge_l1, re_edge_l2, re_deg_l1, re_deg_l2 })
}
