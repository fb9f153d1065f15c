//! Expected log-partition under an isotropic Gaussian `q(y) = N(ȳ, λ I)`.
//!
//! Poisson and Gaussian have exact expressions; the logistic families use
//! Gauss–Hermite quadrature. The smoothed function is itself a valid
//! [`Cumulant`], so the MAP machinery (Newton Y-step, offset GLM) runs
//! unchanged on it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{GlenError, Result};
use crate::expfam::{poisson_offset, sigmoid, softplus, Cumulant, ExponentialFamily};

pub const QUADRATURE_NODES: usize = 20;

/// Probabilists' Gauss–Hermite rule: `E[f(Z)], Z ~ N(0,1) ≈ Σ w_i f(z_i)`.
/// Nodes come from the Golub–Welsch eigenproblem of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[derive(Debug, Clone)]
pub struct VariationalCumulant {
    family: ExponentialFamily,
    lambda: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl VariationalCumulant {
    pub fn new(family: ExponentialFamily, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(GlenError::Config(format!("variational variance must be positive, got {lambda}")));
        }
        let (nodes, weights) = match family {
            ExponentialFamily::Poisson | ExponentialFamily::Gaussian => (Vec::new(), Vec::new()),
            ExponentialFamily::Bernoulli | ExponentialFamily::Binomial { .. } => {
                let (z, w) = gauss_hermite(QUADRATURE_NODES);
                (z.into_iter().map(|v| v * lambda.sqrt()).collect(), w)
            }
            ExponentialFamily::NegativeBinomial { .. } => {
                return Err(GlenError::Unsupported(
                    "variational expectation for the negative binomial family".into(),
                ))
            }
        };
        Ok(Self { family, lambda, nodes, weights })
    }

    pub fn family(&self) -> ExponentialFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn quad(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }

    fn count(&self) -> f64 {
        match self.family {
            ExponentialFamily::Binomial { n } => n as f64,
            _ => 1.0,
        }
    }
}

impl Cumulant for VariationalCumulant {
    fn value(&self, eta: f64) -> f64 {
        match self.family {
            ExponentialFamily::Poisson => (eta + 0.5 * self.lambda).exp(),
            ExponentialFamily::Gaussian => 0.5 * eta * eta + 0.5 * self.lambda,
            _ => self.count() * self.quad(|z| softplus(eta + z)),
        }
    }

    fn mean(&self, eta: f64) -> f64 {
        match self.family {
            ExponentialFamily::Poisson => (eta + 0.5 * self.lambda).exp(),
            ExponentialFamily::Gaussian => eta,
            _ => self.count() * self.quad(|z| sigmoid(eta + z)),
        }
    }

    fn variance(&self, eta: f64) -> f64 {
        match self.family {
            ExponentialFamily::Poisson => (eta + 0.5 * self.lambda).exp(),
            ExponentialFamily::Gaussian => 1.0,
            _ => self.count()
                * self.quad(|z| {
                    let s = sigmoid(eta + z);
                    s * (1.0 - s)
                }),
        }
    }

    fn offset_closed_form(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self.family {
            ExponentialFamily::Poisson => Some(poisson_offset(x, y, 0.5 * self.lambda)),
            ExponentialFamily::Gaussian => self.family.offset_closed_form(x, y),
            _ => None,
        }
    }
}

/// `E_q A(y + μ)` for `q = N(0, λ)` around the natural parameter `y + μ`.
pub fn vi_expected_log_partition(
    family: ExponentialFamily,
    y: f64,
    mu: f64,
    lambda: f64,
) -> Result<f64> {
    Ok(VariationalCumulant::new(family, lambda)?.value(y + mu))
}
