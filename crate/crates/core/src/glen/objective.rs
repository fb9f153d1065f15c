use nalgebra::DMatrix;

use super::{GlenConfig, GlenState};
use crate::cgl::log_pdet;
use crate::error::{GlenError, Result};
use crate::expfam::Cumulant;
use crate::graph::quadratic_form;

/// Composite objective monitored by the alternating loop (see the module docs).
pub fn glen_objective(state: &GlenState, x: &DMatrix<f64>, cfg: &GlenConfig) -> Result<f64> {
    let (n, m) = x.shape();
    if state.y.shape() != (n, m) || state.mu.len() != n || state.l.n_nodes() != n {
        return Err(GlenError::Dimension(format!(
            "state is {:?} with {} offsets for data {n}x{m}",
            state.y.shape(),
            state.mu.len()
        )));
    }
    let part = cfg.partition()?;
    let fid = fidelity(&part, cfg, x, &state.y, &state.mu)?;
    let tv = if cfg.gamma > 0.0 { cfg.gamma * temporal_energy(&state.y, cfg) } else { 0.0 };
    Ok(fid + tv + graph_term(state, cfg)?)
}

pub(crate) fn fidelity<C: Cumulant>(
    part: &C,
    cfg: &GlenConfig,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mu: &[f64],
) -> Result<f64> {
    let (n, m) = x.shape();
    let mut total = 0.0;
    for j in 0..m {
        for i in 0..n {
            let eta = y[(i, j)] + mu[i];
            if !cfg.family.in_domain(eta) {
                return Err(GlenError::ObjectiveDomain { row: i, col: j, eta });
            }
            total += -eta * x[(i, j)] + part.value(eta);
        }
    }
    Ok(total)
}

/// `Tr(Y L_T Yᵀ)`, i.e. the sum over temporal edges of `w ‖y_j − y_k‖²`.
pub(crate) fn temporal_energy(y: &DMatrix<f64>, cfg: &GlenConfig) -> f64 {
    let m = y.ncols();
    let mut total = 0.0;
    for j in 0..m {
        let (_, nbrs) = cfg.temporal_graph.coupling(j, m);
        for (k, w) in nbrs {
            if k > j {
                total += w * (y.column(j) - y.column(k)).norm_squared();
            }
        }
    }
    total
}

/// `(β/2)[Tr(YᵀLY) + M α ‖L∘H‖₁ − M log det(L+J) (+ M λ Tr L)]`.
pub(crate) fn graph_term(state: &GlenState, cfg: &GlenConfig) -> Result<f64> {
    let m = state.y.ncols() as f64;
    let Some(ld) = log_pdet(&state.l) else {
        return Ok(f64::INFINITY);
    };
    let smooth = quadratic_form(&state.l, &state.y)?;
    // |H_ij| = 1 everywhere for the type-1 design
    let l1 = state.l.matrix().abs().sum();
    let vi = cfg.vi_lambda().map_or(0.0, |lambda| m * lambda * state.l.trace());
    Ok(0.5 * cfg.beta * (smooth + m * cfg.alpha * l1 - m * ld + vi))
}
