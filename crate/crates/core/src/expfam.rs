//! One-parameter exponential families in natural-parameter form.
//!
//! A family is described by its log-partition `A(η)` and the two derivatives
//! `A′` (the mean, i.e. the inverse link) and `A″` (the variance). The
//! [`Cumulant`] trait abstracts over those three functions so that the same
//! Newton code drives both the plain likelihood and its Gaussian-smoothed
//! variational counterpart.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GlenError, Result};

/// Bound on `|η|` enforced by every optimizer in the crate.
pub const ETA_CAP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ExponentialFamily {
    /// Unit-variance normal with identity link.
    Gaussian,
    Bernoulli,
    Binomial { n: u32 },
    Poisson,
    /// Failure count with fixed `r`; natural parameter is `log p` and must be negative.
    NegativeBinomial { r: f64 },
}

impl fmt::Display for ExponentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentialFamily::Gaussian => write!(f, "gaussian"),
            ExponentialFamily::Bernoulli => write!(f, "bernoulli"),
            ExponentialFamily::Binomial { n } => write!(f, "binomial:{n}"),
            ExponentialFamily::Poisson => write!(f, "poisson"),
            ExponentialFamily::NegativeBinomial { r } => write!(f, "negbinomial:{r}"),
        }
    }
}

impl FromStr for ExponentialFamily {
    type Err = GlenError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || GlenError::Config(format!("unknown family tag '{s}'"));
        match (head.trim().to_ascii_lowercase().as_str(), arg) {
            ("gaussian", None) => Ok(Self::Gaussian),
            ("bernoulli", None) => Ok(Self::Bernoulli),
            ("poisson", None) => Ok(Self::Poisson),
            ("binomial", Some(a)) => {
                let n: u32 = a.trim().parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(GlenError::Config("binomial n must be positive".into()));
                }
                Ok(Self::Binomial { n })
            }
            ("negbinomial", Some(a)) => {
                let r: f64 = a.trim().parse().map_err(|_| bad())?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(GlenError::Config("negbinomial r must be positive".into()));
                }
                Ok(Self::NegativeBinomial { r })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ExponentialFamily {
    type Error = GlenError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ExponentialFamily> for String {
    fn from(f: ExponentialFamily) -> String {
        f.to_string()
    }
}

/// `log(1 + e^η)` without overflow.
pub fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Logistic function.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// The three cumulant functions an optimizer needs. Implementations return
/// `+∞`/NaN outside the natural domain rather than erroring; callers that
/// need diagnostics should go through [`ExponentialFamily::log_partition`].
pub trait Cumulant: Sync {
    fn value(&self, eta: f64) -> f64;
    fn mean(&self, eta: f64) -> f64;
    fn variance(&self, eta: f64) -> f64;

    /// Largest admissible natural parameter (exclusive when finite and the
    /// domain is open).
    fn upper_bound(&self) -> f64 {
        f64::INFINITY
    }

    /// Closed-form minimizer of the intercept-only objective, when one exists.
    fn offset_closed_form(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }
}

impl ExponentialFamily {
    pub fn in_domain(&self, eta: f64) -> bool {
        match self {
            ExponentialFamily::NegativeBinomial { .. } => eta < 0.0,
            _ => eta.is_finite(),
        }
    }

    fn check_domain(&self, eta: f64) -> Result<()> {
        if self.in_domain(eta) {
            Ok(())
        } else {
            Err(GlenError::Domain { family: self.to_string(), eta })
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        let count = x >= 0.0 && x.fract() == 0.0 && x.is_finite();
        match self {
            ExponentialFamily::Gaussian => x.is_finite(),
            ExponentialFamily::Bernoulli => x == 0.0 || x == 1.0,
            ExponentialFamily::Binomial { n } => count && x <= *n as f64,
            ExponentialFamily::Poisson | ExponentialFamily::NegativeBinomial { .. } => count,
        }
    }

    pub fn check_support(&self, x: f64) -> Result<()> {
        if self.in_support(x) {
            Ok(())
        } else {
            Err(GlenError::Support { family: self.to_string(), value: x })
        }
    }

    pub fn log_partition(&self, eta: f64) -> Result<f64> {
        self.check_domain(eta)?;
        Ok(self.value(eta))
    }

    /// `(A′(η), A″(η))`.
    pub fn mean_and_variance(&self, eta: f64) -> Result<(f64, f64)> {
        self.check_domain(eta)?;
        Ok((self.mean(eta), self.variance(eta)))
    }

    /// `log k(x)`, the base measure.
    pub fn log_base_measure(&self, x: f64) -> f64 {
        match self {
            ExponentialFamily::Gaussian => -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            ExponentialFamily::Bernoulli => 0.0,
            ExponentialFamily::Binomial { n } => {
                let n = *n as f64;
                ln_gamma(n + 1.0) - ln_gamma(x + 1.0) - ln_gamma(n - x + 1.0)
            }
            ExponentialFamily::Poisson => -ln_gamma(x + 1.0),
            ExponentialFamily::NegativeBinomial { r } => {
                ln_gamma(x + r) - ln_gamma(*r) - ln_gamma(x + 1.0)
            }
        }
    }

    /// Negative log-likelihood `−ηx + A(η)`, optionally including `−log k(x)`.
    pub fn nll(&self, x: f64, eta: f64, include_base_measure: bool) -> Result<f64> {
        self.check_support(x)?;
        let a = self.log_partition(eta)?;
        let base = if include_base_measure { -self.log_base_measure(x) } else { 0.0 };
        Ok(-eta * x + a + base)
    }

    /// One draw at natural parameter `η`. Count families return integral values.
    pub fn sample<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> Result<f64> {
        self.check_domain(eta)?;
        let dist_err = |e: &dyn fmt::Display| GlenError::Domain {
            family: format!("{self} ({e})"),
            eta,
        };
        Ok(match self {
            ExponentialFamily::Gaussian => eta + rng.sample::<f64, _>(StandardNormal),
            ExponentialFamily::Bernoulli => f64::from(u8::from(rng.random::<f64>() < sigmoid(eta))),
            ExponentialFamily::Binomial { n } => {
                let d = Binomial::new(u64::from(*n), sigmoid(eta)).map_err(|e| dist_err(&e))?;
                d.sample(rng) as f64
            }
            ExponentialFamily::Poisson => {
                let d = Poisson::new(eta.exp()).map_err(|e| dist_err(&e))?;
                d.sample(rng)
            }
            ExponentialFamily::NegativeBinomial { r } => {
                let p = eta.exp();
                let g = Gamma::new(*r, p / (1.0 - p)).map_err(|e| dist_err(&e))?;
                let rate: f64 = g.sample(rng);
                if rate <= 0.0 {
                    0.0
                } else {
                    Poisson::new(rate).map_err(|e| dist_err(&e))?.sample(rng)
                }
            }
        })
    }
}

impl Cumulant for ExponentialFamily {
    fn value(&self, eta: f64) -> f64 {
        match self {
            ExponentialFamily::Gaussian => 0.5 * eta * eta,
            ExponentialFamily::Bernoulli => softplus(eta),
            ExponentialFamily::Binomial { n } => *n as f64 * softplus(eta),
            ExponentialFamily::Poisson => eta.exp(),
            ExponentialFamily::NegativeBinomial { r } => {
                if eta < 0.0 {
                    -r * (-eta.exp()).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn mean(&self, eta: f64) -> f64 {
        match self {
            ExponentialFamily::Gaussian => eta,
            ExponentialFamily::Bernoulli => sigmoid(eta),
            ExponentialFamily::Binomial { n } => *n as f64 * sigmoid(eta),
            ExponentialFamily::Poisson => eta.exp(),
            ExponentialFamily::NegativeBinomial { r } => {
                let e = eta.exp();
                r * e / (1.0 - e)
            }
        }
    }

    fn variance(&self, eta: f64) -> f64 {
        match self {
            ExponentialFamily::Gaussian => 1.0,
            ExponentialFamily::Bernoulli => {
                let s = sigmoid(eta);
                s * (1.0 - s)
            }
            ExponentialFamily::Binomial { n } => {
                let s = sigmoid(eta);
                *n as f64 * s * (1.0 - s)
            }
            ExponentialFamily::Poisson => eta.exp(),
            ExponentialFamily::NegativeBinomial { r } => {
                let e = eta.exp();
                r * e / ((1.0 - e) * (1.0 - e))
            }
        }
    }

    fn upper_bound(&self) -> f64 {
        match self {
            ExponentialFamily::NegativeBinomial { .. } => 0.0,
            _ => f64::INFINITY,
        }
    }

    fn offset_closed_form(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            ExponentialFamily::Poisson => Some(poisson_offset(x, y, 0.0)),
            ExponentialFamily::Gaussian => {
                let m = x.len() as f64;
                Some(x.iter().zip(y).map(|(a, b)| a - b).sum::<f64>() / m)
            }
            _ => None,
        }
    }
}

/// `log(Σx / Σ e^{y + shift})`, `-∞` when every count is zero.
pub(crate) fn poisson_offset(x: &[f64], y: &[f64], shift: f64) -> f64 {
    let sx: f64 = x.iter().sum();
    if sx <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = ymax + y.iter().map(|v| (v - ymax).exp()).sum::<f64>().ln();
    sx.ln() - lse - shift
}

/// Result of an intercept-only GLM fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetFit {
    pub mu: f64,
    /// The optimum lies at (or beyond) the parameter cap.
    pub saturated: bool,
    pub iterations: usize,
}

/// Admissible interval for `μ` such that every `μ + y_j` respects the
/// natural-parameter cap and the family domain.
fn offset_bounds<C: Cumulant + ?Sized>(cum: &C, y: &[f64]) -> (f64, f64) {
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (-ETA_CAP).max(-ETA_CAP - ymin);
    let mut hi = ETA_CAP.min(ETA_CAP - ymax);
    let ub = cum.upper_bound();
    if ub.is_finite() {
        // open domain: stay strictly inside
        hi = hi.min(ub - ymax - 1e-9);
    }
    if lo > hi {
        let mid = 0.5 * (lo + hi);
        return (mid, mid);
    }
    (lo, hi)
}

fn score<C: Cumulant + ?Sized>(cum: &C, x: &[f64], y: &[f64], mu: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for (xj, yj) in x.iter().zip(y) {
        g += cum.mean(mu + yj) - xj;
        h += cum.variance(mu + yj);
    }
    (g, h)
}

/// Intercept-only fit: `argmin_μ Σ_j −(μ + y_j) x_j + A(μ + y_j)`, using a
/// closed form when the cumulant provides one and safeguarded Newton
/// otherwise.
pub fn fit_scalar_offset_glm<C: Cumulant + ?Sized>(
    cum: &C,
    x: &[f64],
    y: &[f64],
    mu_init: f64,
) -> Result<OffsetFit> {
    if x.len() != y.len() || x.is_empty() {
        return Err(GlenError::Dimension(format!(
            "offset fit needs equal nonempty rows, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(mu) = cum.offset_closed_form(x, y) {
        let (lo, hi) = offset_bounds(cum, y);
        let clamped = mu.clamp(lo, hi);
        return Ok(OffsetFit { mu: clamped, saturated: clamped != mu, iterations: 0 });
    }
    fit_scalar_offset_newton(cum, x, y, mu_init)
}

/// The Newton route of [`fit_scalar_offset_glm`], available for every cumulant.
pub fn fit_scalar_offset_newton<C: Cumulant + ?Sized>(
    cum: &C,
    x: &[f64],
    y: &[f64],
    mu_init: f64,
) -> Result<OffsetFit> {
    if x.len() != y.len() || x.is_empty() {
        return Err(GlenError::Dimension("offset fit needs equal nonempty rows".into()));
    }
    let (lo, hi) = offset_bounds(cum, y);
    let (g_lo, _) = score(cum, x, y, lo);
    if g_lo >= 0.0 {
        return Ok(OffsetFit { mu: lo, saturated: true, iterations: 0 });
    }
    let (g_hi, _) = score(cum, x, y, hi);
    if g_hi <= 0.0 {
        return Ok(OffsetFit { mu: hi, saturated: true, iterations: 0 });
    }
    let scale: f64 = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let (mut a, mut b) = (lo, hi);
    let mut mu = if mu_init.is_finite() { mu_init.clamp(lo, hi) } else { 0.5 * (lo + hi) };
    for it in 1..=200 {
        let (g, h) = score(cum, x, y, mu);
        if g.abs() <= 1e-12 * scale {
            return Ok(OffsetFit { mu, saturated: false, iterations: it });
        }
        if g < 0.0 {
            a = mu;
        } else {
            b = mu;
        }
        let newton = mu - g / h;
        let next = if h > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - mu).abs() <= 1e-15 * (1.0 + mu.abs()) || b - a <= 1e-15 * (1.0 + mu.abs()) {
            return Ok(OffsetFit { mu: next, saturated: false, iterations: it });
        }
        mu = next;
    }
    Ok(OffsetFit { mu, saturated: false, iterations: 200 })
}
