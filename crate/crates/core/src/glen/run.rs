use nalgebra::DMatrix;
use rayon::prelude::*;

use super::objective::glen_objective;
use super::ystep::{column_view, ColumnOutcome, ColumnWork, Temporal};
use super::{GlenConfig, GlenState, Partition};
use crate::cgl::{empirical_statistic, solve_cgl_from, vi_statistic, CglProblem};
use crate::error::{GlenError, Result};
use crate::expfam::{fit_scalar_offset_glm, Cumulant, ExponentialFamily};
use crate::graph::{build_laplacian, LaplacianMatrix, WeightedGraph};

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_data(x: &DMatrix<f64>, family: ExponentialFamily) -> Result<()> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(GlenError::Empty(format!("need at least 2 nodes and 1 signal, got {}x{}", x.nrows(), x.ncols())));
    }
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !family.in_support(x[(i, j)]) {
                return Err(GlenError::Parse {
                    row: i,
                    col: j,
                    msg: format!("{} is outside the {family} support", x[(i, j)]),
                });
            }
        }
    }
    Ok(())
}

fn complete_graph(n: usize) -> LaplacianMatrix {
    let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / n as f64 });
    build_laplacian(&WeightedGraph::new(w).expect("uniform weights are valid"))
}

fn center_columns(y: &mut DMatrix<f64>) {
    for mut c in y.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
}

/// Moment-matched starting point: `μ` from row averages, `Y` from the
/// entrywise transformed data, centred per column.
pub fn initialize(x: &DMatrix<f64>, cfg: &GlenConfig) -> Result<GlenState> {
    check_data(x, cfg.family)?;
    let (n, m) = x.shape();
    let mf = m as f64;
    if x.iter().all(|v| *v == x[(0, 0)]) && cfg.family != ExponentialFamily::Gaussian {
        return Err(GlenError::Initialization(format!(
            "every observation equals {}; the {} likelihood has no finite optimum",
            x[(0, 0)],
            cfg.family
        )));
    }
    let rowmean: Vec<f64> = x.row_iter().map(|r| r.sum() / mf).collect();
    let (mu, mut y): (Vec<f64>, DMatrix<f64>) = match cfg.family {
        ExponentialFamily::Gaussian => {
            let y = DMatrix::from_fn(n, m, |i, j| x[(i, j)] - rowmean[i]);
            (rowmean, y)
        }
        ExponentialFamily::Poisson => {
            let mu: Vec<f64> = rowmean.iter().map(|r| r.max(0.5 / mf).ln()).collect();
            let y = DMatrix::from_fn(n, m, |i, j| (x[(i, j)] + 1.0).ln() - mu[i]);
            (mu, y)
        }
        ExponentialFamily::Bernoulli | ExponentialFamily::Binomial { .. } => {
            let trials = match cfg.family {
                ExponentialFamily::Binomial { n } => n as f64,
                _ => 1.0,
            };
            let mu: Vec<f64> = rowmean.iter().map(|r| logit((r * mf + 0.5) / (trials * mf + 1.0))).collect();
            let y = DMatrix::from_fn(n, m, |i, j| logit((x[(i, j)] + 0.5) / (trials + 1.0)) - mu[i]);
            (mu, y)
        }
        ExponentialFamily::NegativeBinomial { r } => {
            let nat = |mean: f64| (mean / (r + mean)).ln();
            let mu: Vec<f64> = rowmean.iter().map(|v| nat(v.max(0.5 / mf))).collect();
            let y = DMatrix::from_fn(n, m, |i, j| nat(x[(i, j)] + 0.5) - mu[i]);
            (mu, y)
        }
    };
    center_columns(&mut y);
    let inside = |y: &DMatrix<f64>| {
        (0..m).all(|j| (0..n).all(|i| cfg.family.in_domain(y[(i, j)] + mu[i]) && (y[(i, j)] + mu[i]).abs() < 30.0))
    };
    if !inside(&y) {
        y.fill(0.0);
        if !inside(&y) {
            return Err(GlenError::Initialization("row offsets fall outside the natural domain".into()));
        }
    }
    Ok(GlenState {
        l: complete_graph(n),
        y,
        mu,
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    })
}

/// CGL on the statistic of the current `Y`, warm-started from the current `L`.
pub fn l_step(state: &mut GlenState, cfg: &GlenConfig) -> Result<()> {
    let s = match cfg.vi_lambda() {
        None => empirical_statistic(&state.y),
        Some(lambda) => vi_statistic(&state.y, lambda),
    };
    let problem = CglProblem::new(s, cfg.alpha)?;
    let sol = solve_cgl_from(&problem, Some(&state.l), cfg.lstep)?;
    if !sol.converged {
        state.diagnostics.lstep_unconverged += 1;
    }
    state.l = sol.laplacian;
    Ok(())
}

fn record(state: &mut GlenState, outcomes: &[ColumnOutcome]) {
    for o in outcomes {
        state.diagnostics.stalled_columns += o.stalled as usize;
        state.diagnostics.gradient_fallbacks += o.fallback as usize;
    }
    let v = state.constraint_violation();
    state.diagnostics.max_constraint_violation = state.diagnostics.max_constraint_violation.max(v);
}

/// One Newton sweep over all columns (parallel when they are independent,
/// left to right otherwise).
pub fn y_step(state: &mut GlenState, x: &DMatrix<f64>, cfg: &GlenConfig) -> Result<()> {
    if x.shape() != state.y.shape() {
        return Err(GlenError::Dimension("data and state shapes differ".into()));
    }
    let part = cfg.partition()?;
    let (n, m) = x.shape();
    let mut y = std::mem::replace(&mut state.y, DMatrix::zeros(0, 0));
    let outcomes: Vec<ColumnOutcome> = if cfg.sequential() {
        let mut work = ColumnWork::new(n);
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let temporal = Temporal::for_column(&y, cfg, j);
            let mut col = y.column(j).clone_owned();
            let view = column_view(&part, state, &x.as_slice()[j * n..(j + 1) * n], cfg, temporal.as_ref());
            out.push(view.solve(col.as_mut_slice(), cfg, &mut work));
            y.set_column(j, &col);
        }
        out
    } else {
        let state_ref = &*state;
        y.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .map_init(
                || ColumnWork::new(n),
                |work, (j, col)| {
                    let view = column_view(&part, state_ref, &x.as_slice()[j * n..(j + 1) * n], cfg, None);
                    view.solve(col, cfg, work)
                },
            )
            .collect()
    };
    state.y = y;
    record(state, &outcomes);
    Ok(())
}

fn row_objective<C: Cumulant>(part: &C, x: &[f64], y: &[f64], mu: f64) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| -(mu + yi) * xi + part.value(mu + yi)).sum()
}

/// Intercept-only GLM per node with `Y` as the fixed offset.
pub fn mu_step(state: &mut GlenState, x: &DMatrix<f64>, cfg: &GlenConfig) -> Result<()> {
    if x.shape() != state.y.shape() {
        return Err(GlenError::Dimension("data and state shapes differ".into()));
    }
    let part: Partition = cfg.partition()?;
    for i in 0..x.nrows() {
        let xr: Vec<f64> = x.row(i).iter().copied().collect();
        let yr: Vec<f64> = state.y.row(i).iter().copied().collect();
        let fit = fit_scalar_offset_glm(&part, &xr, &yr, state.mu[i])?;
        let old = row_objective(&part, &xr, &yr, state.mu[i]);
        let new = row_objective(&part, &xr, &yr, fit.mu);
        if fit.saturated {
            state.diagnostics.saturated_rows += 1;
        }
        if new <= old || !old.is_finite() {
            state.mu[i] = fit.mu;
        }
    }
    Ok(())
}

/// Moves the row means of `Y` into `μ`.
///
/// The likelihood only sees `Y + μ1ᵀ` and the temporal term is blind to
/// per-row constants, so among all shifts `Y − c1ᵀ`, `μ + c` that keep the
/// column sums at zero the objective changes only through the smoothness
/// term, which `c = rowmean(Y)` minimizes exactly.
pub fn recenter_step(state: &mut GlenState) {
    let m = state.n_signals() as f64;
    for (i, mut row) in state.y.row_iter_mut().enumerate() {
        let c = row.sum() / m;
        row.add_scalar_mut(-c);
        state.mu[i] += c;
    }
}

/// Alternating minimization: L-step, Y-sweep, μ-step and recentring, then
/// the objective.
pub fn run_glen(x: &DMatrix<f64>, cfg: &GlenConfig) -> Result<GlenState> {
    cfg.validate()?;
    cfg.partition()?;
    let mut state = initialize(x, cfg)?;
    recenter_step(&mut state);
    for it in 1..=cfg.outer_max_iter {
        l_step(&mut state, cfg)?;
        y_step(&mut state, x, cfg)?;
        mu_step(&mut state, x, cfg)?;
        recenter_step(&mut state);
        let f = glen_objective(&state, x, cfg)?;
        state.iterations = it;
        if let Some(&prev) = state.objective_trace.last() {
            let rel = (f - prev) / prev.abs().max(1e-300);
            state.diagnostics.max_relative_increase = state.diagnostics.max_relative_increase.max(rel);
            state.objective_trace.push(f);
            if (f - prev).abs() <= cfg.outer_rel_tol * prev.abs() {
                state.converged = true;
                break;
            }
        } else {
            state.objective_trace.push(f);
        }
    }
    Ok(state)
}

/// Centred Tikhonov filter `(I + βL)⁻¹ (X − μ1ᵀ − 1·colmean)`, the exact
/// Y-step for the Gaussian family.
pub fn gaussian_closed_form_y(x: &DMatrix<f64>, mu: &[f64], l: &LaplacianMatrix, beta: f64) -> Result<DMatrix<f64>> {
    let (n, m) = x.shape();
    if mu.len() != n || l.n_nodes() != n {
        return Err(GlenError::Dimension("offset or laplacian size does not match the data".into()));
    }
    let mut r = DMatrix::from_fn(n, m, |i, j| x[(i, j)] - mu[i]);
    center_columns(&mut r);
    let a = DMatrix::identity(n, n) + l.matrix() * beta;
    let chol = a.cholesky().ok_or_else(|| GlenError::Config(format!("I + βL is not positive definite for beta {beta}")))?;
    Ok(chol.solve(&r))
}

/// Entrywise mean `A′(Y + μ1ᵀ)` of the fitted natural parameters.
pub fn denoised_means(state: &GlenState, family: ExponentialFamily) -> DMatrix<f64> {
    DMatrix::from_fn(state.n_nodes(), state.n_signals(), |i, j| family.mean(state.y[(i, j)] + state.mu[i]))
}
