//! The alternating estimator.
//!
//! State is `(L, Y, μ)` with the gauge constraint `Yᵀ1 = 0`. One outer
//! iteration runs, in order, the L-step (CGL on the statistic of `Y`), a
//! Y-sweep (equality-constrained damped Newton per column) and the μ-step
//! (intercept-only GLM per node), then records the composite objective
//!
//! ```text
//! J = Σ_ij [−(Y_ij + μ_i) X_ij + A(Y_ij + μ_i)] + γ Tr(Y L_T Yᵀ)
//!     + (β/2) [Tr(Yᵀ L Y) + M α ‖L ∘ H‖₁ − M log det(L + 11ᵀ/N)]
//! ```
//!
//! Each block is a descent step on `J`, so the recorded trace is monotone.
//! The variational variant replaces `A` by its expectation under
//! `N(Y_ij, λ)` and adds `(β/2) M λ Tr(L)`.

mod objective;
mod run;
mod ystep;

#[cfg(test)]
mod tests;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cgl::CglOptions;
use crate::error::{GlenError, Result};
use crate::expfam::{Cumulant, ExponentialFamily};
use crate::graph::LaplacianMatrix;
use crate::variational::VariationalCumulant;

pub use objective::glen_objective;
pub use run::{
    denoised_means, gaussian_closed_form_y, initialize, l_step, mu_step, recenter_step, run_glen, y_step,
};
pub use ystep::{constrained_newton_direction, y_step_gradient, y_step_hessian};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variant {
    Map,
    Vi {
        #[serde(default = "default_vi_lambda")]
        lambda: f64,
    },
}

fn default_vi_lambda() -> f64 {
    0.5
}

impl Variant {
    pub fn vi() -> Self {
        Variant::Vi { lambda: default_vi_lambda() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalGraph {
    Path,
    Ring,
}

impl TemporalGraph {
    /// Degree of time step `j` and its weighted neighbours.
    pub(crate) fn coupling(self, j: usize, m: usize) -> (f64, Vec<(usize, f64)>) {
        match (self, m) {
            (_, 0 | 1) => (0.0, Vec::new()),
            (TemporalGraph::Ring, 2) => (2.0, vec![(1 - j, 2.0)]),
            (TemporalGraph::Ring, _) => (2.0, vec![((j + m - 1) % m, 1.0), ((j + 1) % m, 1.0)]),
            (TemporalGraph::Path, _) => {
                let mut nb = Vec::with_capacity(2);
                if j > 0 {
                    nb.push((j - 1, 1.0));
                }
                if j + 1 < m {
                    nb.push((j + 1, 1.0));
                }
                (nb.len() as f64, nb)
            }
        }
    }
}

/// Order in which the Y-step visits columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Columns solved independently (and in parallel); only valid for `γ = 0`.
    Independent,
    /// Left-to-right with neighbours at their current values.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlenConfig {
    pub family: ExponentialFamily,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub variant: Variant,
    pub temporal_graph: TemporalGraph,
    pub sweep: SweepOrder,
    pub outer_max_iter: usize,
    pub outer_rel_tol: f64,
    pub newton_max_iter: usize,
    pub newton_grad_tol: f64,
    pub armijo_c: f64,
    pub min_step: f64,
    pub lstep: CglOptions,
}

impl Default for GlenConfig {
    fn default() -> Self {
        Self {
            family: ExponentialFamily::Poisson,
            alpha: 0.01,
            beta: 1.0,
            gamma: 0.0,
            variant: Variant::Map,
            temporal_graph: TemporalGraph::Path,
            sweep: SweepOrder::Independent,
            outer_max_iter: 50,
            outer_rel_tol: 1e-5,
            newton_max_iter: 50,
            newton_grad_tol: 1e-6,
            armijo_c: 1e-4,
            min_step: 1e-10,
            lstep: CglOptions::default(),
        }
    }
}

impl GlenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(GlenError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GlenError::Config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(GlenError::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if let Variant::Vi { lambda } = self.variant {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(GlenError::Config(format!("variational variance must be positive, got {lambda}")));
            }
        }
        if self.newton_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(GlenError::Config("iteration caps must be positive".into()));
        }
        Ok(())
    }

    /// Whether the Y-step must run as a sequential sweep.
    pub fn sequential(&self) -> bool {
        self.gamma > 0.0 || self.sweep == SweepOrder::GaussSeidel
    }

    pub(crate) fn vi_lambda(&self) -> Option<f64> {
        match self.variant {
            Variant::Map => None,
            Variant::Vi { lambda } => Some(lambda),
        }
    }

    pub(crate) fn partition(&self) -> Result<Partition> {
        Ok(match self.variant {
            Variant::Map => Partition::Plain(self.family),
            Variant::Vi { lambda } => Partition::Smoothed(VariationalCumulant::new(self.family, lambda)?),
        })
    }
}

/// Log-partition used in the fidelity term: the family's own, or its
/// variational expectation.
#[derive(Debug, Clone)]
pub enum Partition {
    Plain(ExponentialFamily),
    Smoothed(VariationalCumulant),
}

impl Cumulant for Partition {
    fn value(&self, eta: f64) -> f64 {
        match self {
            Partition::Plain(f) => f.value(eta),
            Partition::Smoothed(v) => v.value(eta),
        }
    }
    fn mean(&self, eta: f64) -> f64 {
        match self {
            Partition::Plain(f) => f.mean(eta),
            Partition::Smoothed(v) => v.mean(eta),
        }
    }
    fn variance(&self, eta: f64) -> f64 {
        match self {
            Partition::Plain(f) => f.variance(eta),
            Partition::Smoothed(v) => v.variance(eta),
        }
    }
    fn upper_bound(&self) -> f64 {
        match self {
            Partition::Plain(f) => f.upper_bound(),
            Partition::Smoothed(v) => v.upper_bound(),
        }
    }
    fn offset_closed_form(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            Partition::Plain(f) => f.offset_closed_form(x, y),
            Partition::Smoothed(v) => v.offset_closed_form(x, y),
        }
    }
}

/// Counters collected while fitting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest `|1ᵀ Y_{·j}|` seen after any Y update.
    pub max_constraint_violation: f64,
    /// Column solves whose line search underflowed.
    pub stalled_columns: usize,
    /// Column solves that fell back to the projected gradient.
    pub gradient_fallbacks: usize,
    /// Row fits that ended at the parameter cap.
    pub saturated_rows: usize,
    /// L-steps that stopped at their iteration cap.
    pub lstep_unconverged: usize,
    /// Largest relative increase between consecutive trace entries.
    pub max_relative_increase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlenState {
    pub l: LaplacianMatrix,
    /// Smooth representation (the variational means for the VI variant).
    pub y: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl GlenState {
    pub fn n_nodes(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_signals(&self) -> usize {
        self.y.ncols()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }

    /// `max_j |1ᵀ Y_{·j}|`.
    pub fn constraint_violation(&self) -> f64 {
        self.y.column_iter().map(|c| c.sum().abs()).fold(0.0, f64::max)
    }

    /// Rejects states whose columns are not centred.
    pub fn check_constraint(&self) -> Result<()> {
        let v = self.constraint_violation();
        if v > 1e-6 * (1.0 + self.y.amax()) {
            return Err(GlenError::Config(format!("column-sum constraint violated by {v}")));
        }
        Ok(())
    }
}
