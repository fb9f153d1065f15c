//! Graph Laplacian learning from signals observed through exponential-family
//! noise.
//!
//! The estimator alternates between a Laplacian update (a combinatorial
//! graph Laplacian problem on the current smooth representation), an
//! equality-constrained Newton update of the smooth representation, and a
//! per-node intercept fit. Variational and time-vertex variants share the
//! same machinery.

pub mod bench;
pub mod cgl;
pub mod error;
pub mod expfam;
pub mod generators;
pub mod glen;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod signal;
pub mod variational;

pub use cgl::{solve_cgl, CglOptions, CglProblem, CglSolution};
pub use error::{GlenError, Result};
pub use expfam::{Cumulant, ExponentialFamily};
pub use generators::{GraphModel, GraphModelSpec};
pub use glen::{run_glen, GlenConfig, GlenState, Variant};
pub use graph::{LaplacianMatrix, WeightedGraph};
pub use metrics::EvalReport;
