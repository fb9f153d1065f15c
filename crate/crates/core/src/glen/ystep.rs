//! Per-column equality-constrained Newton solver for the Y-step.
//!
//! Column `j` minimizes
//! `Σ_i [−(y_i + μ_i) x_i + A(y_i + μ_i)] + (β/2) yᵀLy + γ d_j ‖y‖² + cᵀy`
//! subject to `1ᵀy = 0`, where `d_j` is the temporal degree and
//! `c = −2γ Σ_k w_jk y_k` collects the (frozen) temporal neighbours.

use nalgebra::{DMatrix, DVector};

use super::{GlenConfig, GlenState};
use crate::error::{GlenError, Result};
use crate::expfam::{Cumulant, ExponentialFamily, ETA_CAP};
use crate::linalg::{chol_solve, cholesky_in_place};

/// Frozen temporal coupling of one column.
#[derive(Debug, Clone, Default)]
pub(crate) struct Temporal {
    /// `γ d_j`.
    pub quad: f64,
    /// `−2γ Σ_k w_jk y_k`.
    pub lin: Vec<f64>,
}

impl Temporal {
    pub(crate) fn for_column(y: &DMatrix<f64>, cfg: &GlenConfig, j: usize) -> Option<Self> {
        if cfg.gamma == 0.0 {
            return None;
        }
        let n = y.nrows();
        let (d, nbrs) = cfg.temporal_graph.coupling(j, y.ncols());
        let mut lin = vec![0.0; n];
        for (k, w) in nbrs {
            for (i, v) in lin.iter_mut().enumerate() {
                *v -= 2.0 * cfg.gamma * w * y[(i, k)];
            }
        }
        Some(Self { quad: cfg.gamma * d, lin })
    }
}

/// Read-only data for one column solve. `l` is the Laplacian as a flat
/// symmetric buffer (so row- and column-major agree).
pub(crate) struct Column<'a, C: Cumulant + ?Sized> {
    pub cum: &'a C,
    pub family: ExponentialFamily,
    pub l: &'a [f64],
    pub beta: f64,
    pub x: &'a [f64],
    pub mu: &'a [f64],
    pub temporal: Option<&'a Temporal>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct ColumnOutcome {
    pub stalled: bool,
    pub fallback: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Scratch buffers reused across columns.
pub(crate) struct ColumnWork {
    n: usize,
    g: Vec<f64>,
    h: Vec<f64>,
    hdiag: Vec<f64>,
    v: Vec<f64>,
    ones: Vec<f64>,
    ly: Vec<f64>,
    lv: Vec<f64>,
    trial: Vec<f64>,
}

impl ColumnWork {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            g: vec![0.0; n],
            h: vec![0.0; n * n],
            hdiag: vec![0.0; n],
            v: vec![0.0; n],
            ones: vec![0.0; n],
            ly: vec![0.0; n],
            lv: vec![0.0; n],
            trial: vec![0.0; n],
        }
    }
}

fn matvec(l: &[f64], n: usize, y: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..(i + 1) * n];
        out[i] = row.iter().zip(y).map(|(a, b)| a * b).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<C: Cumulant + ?Sized> Column<'_, C> {
    /// Fidelity part, `+∞` if any natural parameter leaves the capped domain.
    fn fidelity(&self, y: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((yi, mi), xi) in y.iter().zip(self.mu).zip(self.x) {
            let eta = yi + mi;
            if !(eta.abs() <= ETA_CAP) || !self.family.in_domain(eta) {
                return f64::INFINITY;
            }
            s += -eta * xi + self.cum.value(eta);
        }
        s
    }

    /// Full per-column objective (for tests and diagnostics).
    pub(crate) fn objective(&self, y: &[f64], work: &mut ColumnWork) -> f64 {
        let n = y.len();
        matvec(self.l, n, y, &mut work.ly);
        let mut f = self.fidelity(y) + 0.5 * self.beta * dot(y, &work.ly);
        if let Some(t) = self.temporal {
            f += t.quad * dot(y, y) + dot(&t.lin, y);
        }
        f
    }

    /// Gradient into `work.g` and Hessian diagonal of `A''` into `work.hdiag`;
    /// expects `work.ly = L y`.
    fn derivatives(&self, y: &[f64], work: &mut ColumnWork) {
        for i in 0..y.len() {
            let eta = y[i] + self.mu[i];
            work.g[i] = -self.x[i] + self.cum.mean(eta) + self.beta * work.ly[i];
            work.hdiag[i] = self.cum.variance(eta);
        }
        if let Some(t) = self.temporal {
            for i in 0..y.len() {
                work.g[i] += 2.0 * t.quad * y[i] + t.lin[i];
                work.hdiag[i] += 2.0 * t.quad;
            }
        }
    }

    pub(crate) fn gradient(&self, y: &[f64], work: &mut ColumnWork) -> Vec<f64> {
        matvec(self.l, y.len(), y, &mut work.ly);
        self.derivatives(y, work);
        work.g.clone()
    }

    pub(crate) fn hessian(&self, y: &[f64], work: &mut ColumnWork) -> Vec<f64> {
        matvec(self.l, y.len(), y, &mut work.ly);
        self.derivatives(y, work);
        let n = y.len();
        let mut h: Vec<f64> = self.l.iter().map(|v| self.beta * v).collect();
        for i in 0..n {
            h[i * n + i] += work.hdiag[i];
        }
        h
    }

    /// Damped Newton on one column, updating `y` in place.
    pub(crate) fn solve(&self, y: &mut [f64], cfg: &GlenConfig, work: &mut ColumnWork) -> ColumnOutcome {
        let n = work.n;
        let mut out = ColumnOutcome::default();
        let mut f = self.objective(y, work);
        if !f.is_finite() {
            out.stalled = true;
            return out;
        }
        for it in 0..cfg.newton_max_iter {
            // objective() left L y in work.ly
            self.derivatives(y, work);
            let gmean = work.g.iter().sum::<f64>() / n as f64;
            let pg = work.g.iter().map(|g| (g - gmean).abs()).fold(0.0, f64::max);
            if pg <= cfg.newton_grad_tol {
                out.converged = true;
                out.iterations = it;
                return out;
            }
            for (k, (h, l)) in work.h.iter_mut().zip(self.l).enumerate() {
                *h = self.beta * l;
                if k % (n + 1) == 0 {
                    *h += work.hdiag[k / (n + 1)];
                }
            }
            if !newton_direction_flat(&mut work.h, &work.g, n, &mut work.v, &mut work.ones) {
                out.fallback = true;
                let hm = DMatrix::from_fn(n, n, |i, k| {
                    self.beta * self.l[i * n + k] + if i == k { work.hdiag[i] } else { 0.0 }
                });
                match constrained_newton_direction(&hm, &DVector::from_column_slice(&work.g)) {
                    Ok((v, _)) => work.v.copy_from_slice(v.as_slice()),
                    Err(_) => {
                        for (v, g) in work.v.iter_mut().zip(&work.g) {
                            *v = -(g - gmean);
                        }
                    }
                }
            }
            // keep the direction exactly in the constraint subspace
            let vmean = work.v.iter().sum::<f64>() / n as f64;
            work.v.iter_mut().for_each(|v| *v -= vmean);

            let slope = dot(&work.g, &work.v);
            if !(slope < 0.0) {
                out.converged = pg <= cfg.newton_grad_tol;
                out.iterations = it;
                return out;
            }
            // quadratic pieces along the ray are exact polynomials in t
            matvec(self.l, n, &work.v, &mut work.lv);
            let yly = dot(y, &work.ly);
            let vly = dot(&work.v, &work.ly);
            let vlv = dot(&work.v, &work.lv);
            let (yy, yv, vv, cy, cv) = match self.temporal {
                Some(t) => (dot(y, y), dot(y, &work.v), dot(&work.v, &work.v), dot(&t.lin, y), dot(&t.lin, &work.v)),
                None => (0.0, 0.0, 0.0, 0.0, 0.0),
            };
            let tq = self.temporal.map_or(0.0, |t| t.quad);
            let mut t = 1.0;
            let accepted = loop {
                for i in 0..n {
                    work.trial[i] = y[i] + t * work.v[i];
                }
                let mut ft = self.fidelity(&work.trial);
                if ft.is_finite() {
                    ft += 0.5 * self.beta * (yly + 2.0 * t * vly + t * t * vlv);
                    if self.temporal.is_some() {
                        ft += tq * (yy + 2.0 * t * yv + t * t * vv) + cy + t * cv;
                    }
                    if ft <= f + cfg.armijo_c * t * slope {
                        break Some(ft);
                    }
                }
                t *= 0.5;
                if t < cfg.min_step {
                    break None;
                }
            };
            out.iterations = it + 1;
            match accepted {
                Some(ft) => {
                    y.copy_from_slice(&work.trial);
                    f = ft;
                    matvec(self.l, n, y, &mut work.ly);
                }
                None => {
                    out.stalled = true;
                    return out;
                }
            }
        }
        self.derivatives(y, work);
        let gmean = work.g.iter().sum::<f64>() / n as f64;
        out.converged = work.g.iter().all(|g| (g - gmean).abs() <= cfg.newton_grad_tol);
        out
    }
}

/// KKT direction via Cholesky of the Hessian, which is overwritten.
/// `v = −H⁻¹(g + w1)` with `w = −1ᵀH⁻¹g / 1ᵀH⁻¹1`.
fn newton_direction_flat(h: &mut [f64], g: &[f64], n: usize, v: &mut [f64], hinv1: &mut [f64]) -> bool {
    if !cholesky_in_place(h, n) {
        return false;
    }
    v.copy_from_slice(g);
    chol_solve(h, n, v);
    hinv1.fill(1.0);
    chol_solve(h, n, hinv1);
    let denom: f64 = hinv1.iter().sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return false;
    }
    let w = -v.iter().sum::<f64>() / denom;
    for (vi, hi) in v.iter_mut().zip(hinv1.iter()) {
        *vi = -(*vi + w * hi);
    }
    v.iter().all(|x| x.is_finite())
}

/// Solves `[[H, 1], [1ᵀ, 0]] [v; w] = [−g; 0]`.
pub fn constrained_newton_direction(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = gradient.len();
    if hessian.shape() != (n, n) {
        return Err(GlenError::Dimension(format!(
            "hessian is {:?} but gradient has length {n}",
            hessian.shape()
        )));
    }
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(hessian);
    for i in 0..n {
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        rhs[i] = -gradient[i];
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(GlenError::SingularKkt)?;
    Ok((sol.rows(0, n).into_owned(), sol[n]))
}

pub(crate) fn column_view<'a, C: Cumulant>(
    cum: &'a C,
    state: &'a GlenState,
    x: &'a [f64],
    cfg: &GlenConfig,
    temporal: Option<&'a Temporal>,
) -> Column<'a, C> {
    Column { cum, family: cfg.family, l: state.l.matrix().as_slice(), beta: cfg.beta, x, mu: &state.mu, temporal }
}

fn check_column(state: &GlenState, j: usize) -> Result<()> {
    if j >= state.y.ncols() {
        return Err(GlenError::Dimension(format!("column {j} out of range for {} signals", state.y.ncols())));
    }
    Ok(())
}

/// Gradient of the per-column objective at the current state.
pub fn y_step_gradient(state: &GlenState, x: &DMatrix<f64>, cfg: &GlenConfig, j: usize) -> Result<DVector<f64>> {
    check_column(state, j)?;
    if x.shape() != state.y.shape() {
        return Err(GlenError::Dimension("data and state shapes differ".into()));
    }
    let part = cfg.partition()?;
    let temporal = Temporal::for_column(&state.y, cfg, j);
    let n = state.n_nodes();
    let col = column_view(&part, state, &x.as_slice()[j * n..(j + 1) * n], cfg, temporal.as_ref());
    let mut work = ColumnWork::new(n);
    Ok(DVector::from_vec(col.gradient(&state.y.as_slice()[j * n..(j + 1) * n], &mut work)))
}

/// Hessian of the per-column objective at the current state.
pub fn y_step_hessian(state: &GlenState, cfg: &GlenConfig, j: usize) -> Result<DMatrix<f64>> {
    check_column(state, j)?;
    let n = state.n_nodes();
    let part = cfg.partition()?;
    let temporal = Temporal::for_column(&state.y, cfg, j);
    // the Hessian does not depend on the data
    let zeros = vec![0.0; n];
    let col = column_view(&part, state, &zeros, cfg, temporal.as_ref());
    let mut work = ColumnWork::new(n);
    let h = col.hessian(&state.y.as_slice()[j * n..(j + 1) * n], &mut work);
    Ok(DMatrix::from_row_slice(n, n, &h))
}

