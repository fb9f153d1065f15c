use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;
use crate::generators::{sample_random_graph, GraphModel, GraphModelSpec};
use crate::graph::{build_laplacian, normalize_trace};
use crate::rng::{Purpose, RngStream};
use crate::signal::{sample_observations, sample_smooth, sqrt_pinv_filter};

const FAMILIES: [ExponentialFamily; 5] = [
    ExponentialFamily::Gaussian,
    ExponentialFamily::Bernoulli,
    ExponentialFamily::Binomial { n: 4 },
    ExponentialFamily::Poisson,
    ExponentialFamily::NegativeBinomial { r: 3.0 },
];

fn random_laplacian(seed: u64, n: usize) -> LaplacianMatrix {
    let spec = GraphModelSpec::new(GraphModel::ErdosRenyi { p: 0.5 }, n);
    let mut rng = RngStream::new(seed, 0, Purpose::Topology).rng(0);
    normalize_trace(&build_laplacian(&sample_random_graph(&spec, &mut rng).unwrap())).unwrap()
}

fn centered(n: usize, m: usize, seed: u64, scale: f64) -> DMatrix<f64> {
    let mut rng = RngStream::new(seed, 0, Purpose::Custom).rng(0);
    let mut y = DMatrix::from_fn(n, m, |_, _| scale * (rng.random::<f64>() - 0.5));
    for mut c in y.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    y
}

/// Random state and data with natural parameters safely inside each family's domain.
fn instance(family: ExponentialFamily, n: usize, m: usize, seed: u64) -> (GlenState, DMatrix<f64>) {
    let l = random_laplacian(seed, n);
    let y = centered(n, m, seed + 100, 1.0);
    let base = if matches!(family, ExponentialFamily::NegativeBinomial { .. }) { -1.5 } else { 0.3 };
    let mu: Vec<f64> = (0..n).map(|i| base + 0.1 * (i as f64 - 2.0).sin()).collect();
    let x = sample_observations(family, &y, &mu, &RngStream::new(seed, 0, Purpose::Noise)).unwrap();
    let state = GlenState {
        l,
        y,
        mu,
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    };
    (state, x)
}

fn configs(family: ExponentialFamily) -> Vec<GlenConfig> {
    let base = GlenConfig { family, alpha: 0.05, beta: 1.7, ..Default::default() };
    let mut out = vec![base.clone(), GlenConfig { gamma: 0.6, ..base.clone() }];
    out.push(GlenConfig { gamma: 0.4, temporal_graph: TemporalGraph::Ring, ..base.clone() });
    if !matches!(family, ExponentialFamily::NegativeBinomial { .. }) {
        out.push(GlenConfig { variant: Variant::vi(), ..base.clone() });
        out.push(GlenConfig { variant: Variant::Vi { lambda: 0.3 }, gamma: 0.5, ..base });
    }
    out
}

#[test]
fn gradient_matches_central_differences() {
    for (k, family) in FAMILIES.into_iter().enumerate() {
        let (state, x) = instance(family, 6, 5, 10 + k as u64);
        for cfg in configs(family) {
            for j in [0, 2, 4] {
                let g = y_step_gradient(&state, &x, &cfg, j).unwrap();
                for i in 0..6 {
                    let h = 1e-5;
                    let mut plus = state.clone();
                    plus.y[(i, j)] += h;
                    let mut minus = state.clone();
                    minus.y[(i, j)] -= h;
                    let fd = (glen_objective(&plus, &x, &cfg).unwrap() - glen_objective(&minus, &x, &cfg).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{family} {cfg:?}: {fd} vs {}", g[i]);
                }
            }
        }
    }
}

#[test]
fn hessian_matches_gradient_differences() {
    for (k, family) in FAMILIES.into_iter().enumerate() {
        let (state, x) = instance(family, 5, 4, 20 + k as u64);
        for cfg in configs(family) {
            for j in [0, 1, 3] {
                let hess = y_step_hessian(&state, &cfg, j).unwrap();
                assert!((&hess - hess.transpose()).amax() < 1e-14);
                for i in 0..5 {
                    let h = 1e-5;
                    let mut plus = state.clone();
                    plus.y[(i, j)] += h;
                    let mut minus = state.clone();
                    minus.y[(i, j)] -= h;
                    let fd = (y_step_gradient(&plus, &x, &cfg, j).unwrap() - y_step_gradient(&minus, &x, &cfg, j).unwrap())
                        / (2.0 * h);
                    let col = hess.column(i);
                    assert!((fd - col).amax() <= 1e-4 * (1.0 + col.amax()), "{family} {cfg:?}");
                }
            }
        }
    }
}

#[test]
fn gaussian_derivatives_are_normal_equations() {
    let (state, x) = instance(ExponentialFamily::Gaussian, 6, 3, 3);
    let cfg = GlenConfig { family: ExponentialFamily::Gaussian, beta: 2.5, ..Default::default() };
    let a = DMatrix::identity(6, 6) + state.l.matrix() * 2.5;
    let mu = DVector::from_vec(state.mu.clone());
    for j in 0..3 {
        let g = y_step_gradient(&state, &x, &cfg, j).unwrap();
        let expected = &a * state.y.column(j) - (x.column(j) - &mu);
        assert!((g - expected).amax() < 1e-12);
        assert!((y_step_hessian(&state, &cfg, j).unwrap() - &a).amax() < 1e-14);
    }
    // Poisson at zero natural parameter has unit curvature
    let mut p = state.clone();
    p.y.fill(0.0);
    p.mu.fill(0.0);
    let cfg = GlenConfig { beta: 2.5, ..Default::default() };
    assert!((y_step_hessian(&p, &cfg, 0).unwrap() - &a).amax() < 1e-14);
}

#[test]
fn kkt_direction_examples() {
    let g = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    let (v, w) = constrained_newton_direction(&DMatrix::identity(4, 4), &g).unwrap();
    let mean = g.mean();
    assert!((&v - (-&g).add_scalar(mean)).amax() < 1e-14);
    assert!((w + mean).abs() < 1e-14);

    let (v, w) = constrained_newton_direction(&DMatrix::identity(4, 4), &DVector::from_element(4, 2.5)).unwrap();
    assert!(v.amax() < 1e-14);
    assert!((w + 2.5).abs() < 1e-14);

    let mut rng = RngStream::new(5, 0, Purpose::Custom).rng(0);
    for _ in 0..20 {
        let b = DMatrix::from_fn(7, 7, |_, _| rng.random::<f64>() - 0.5);
        let h = &b * b.transpose() + DMatrix::identity(7, 7) * 0.1;
        let g = DVector::from_fn(7, |_, _| rng.random::<f64>() - 0.5);
        let (v, w) = constrained_newton_direction(&h, &g).unwrap();
        assert!(v.sum().abs() <= 1e-9 * v.norm());
        let r = &h * &v + DVector::from_element(7, w) + &g;
        assert!(r.norm() <= 1e-8 * g.norm());
    }
    // singular KKT
    assert!(matches!(
        constrained_newton_direction(&DMatrix::zeros(3, 3), &DVector::zeros(3)),
        Err(GlenError::SingularKkt)
    ));
}

#[test]
fn gaussian_y_step_is_tikhonov_filter() {
    for seed in 0..5 {
        let (mut state, x) = instance(ExponentialFamily::Gaussian, 8, 6, 40 + seed);
        let cfg = GlenConfig { family: ExponentialFamily::Gaussian, beta: 0.8 + seed as f64, ..Default::default() };
        let expected = gaussian_closed_form_y(&x, &state.mu, &state.l, cfg.beta).unwrap();
        y_step(&mut state, &x, &cfg).unwrap();
        assert!((&state.y - &expected).amax() < 1e-8);
        assert!(state.constraint_violation() < 1e-12);
    }
}

#[test]
fn closed_form_limits() {
    let (state, x) = instance(ExponentialFamily::Gaussian, 5, 4, 1);
    let y0 = gaussian_closed_form_y(&x, &state.mu, &state.l, 0.0).unwrap();
    let mut r = DMatrix::from_fn(5, 4, |i, j| x[(i, j)] - state.mu[i]);
    for mut c in r.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    assert!((&y0 - &r).amax() < 1e-12);
    let big = gaussian_closed_form_y(&x, &state.mu, &state.l, 1e9).unwrap();
    assert!(big.amax() < 1e-6);
    for c in y0.column_iter().chain(big.column_iter()) {
        assert!(c.sum().abs() < 1e-10);
    }
}

#[test]
fn poisson_stationary_point_is_kept() {
    let n = 6;
    let l = random_laplacian(2, n);
    let mu = vec![4f64.ln(); n];
    let x = DMatrix::from_element(n, 7, 4.0);
    let mut state = GlenState {
        l,
        y: DMatrix::zeros(n, 7),
        mu,
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    };
    let cfg = GlenConfig::default();
    assert!(y_step_gradient(&state, &x, &cfg, 0).unwrap().amax() < 1e-12);
    y_step(&mut state, &x, &cfg).unwrap();
    assert_eq!(state.y, DMatrix::zeros(n, 7));
}

#[test]
fn y_step_descends_per_column() {
    for family in FAMILIES {
        let (state, x) = instance(family, 7, 6, 77);
        for cfg in configs(family) {
            let mut next = state.clone();
            let before = glen_objective(&state, &x, &cfg).unwrap();
            y_step(&mut next, &x, &cfg).unwrap();
            let after = glen_objective(&next, &x, &cfg).unwrap();
            assert!(after <= before + 1e-10 * before.abs(), "{family}: {after} > {before}");
            assert!(next.constraint_violation() <= 1e-10);
            if cfg.gamma == 0.0 {
                for j in 0..6 {
                    let g = y_step_gradient(&next, &x, &cfg, j).unwrap();
                    let pg = g.add_scalar(-g.mean()).amax();
                    assert!(pg <= cfg.newton_grad_tol, "{family}: projected gradient {pg}");
                }
            }
        }
    }
}

#[test]
fn mu_step_examples() {
    let n = 4;
    let x = DMatrix::from_fn(n, 5, |i, j| ((i + 1) * (j % 3)) as f64);
    let mut state = GlenState {
        l: random_laplacian(1, n),
        y: DMatrix::zeros(n, 5),
        mu: vec![0.0; n],
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    };
    mu_step(&mut state, &x, &GlenConfig::default()).unwrap();
    for i in 0..n {
        let mean = x.row(i).sum() / 5.0;
        assert!((state.mu[i] - mean.ln()).abs() < 1e-12);
    }
    // stationarity with a nonzero offset
    let (mut st, xp) = instance(ExponentialFamily::Poisson, 6, 8, 2);
    mu_step(&mut st, &xp, &GlenConfig::default()).unwrap();
    for i in 0..6 {
        let resid: f64 = (0..8).map(|j| xp[(i, j)] - (st.mu[i] + st.y[(i, j)]).exp()).sum();
        assert!(resid.abs() <= 1e-8 * xp.row(i).sum().max(1.0));
    }
    // balanced Bernoulli rows
    let xb = DMatrix::from_fn(3, 6, |i, j| ((i + j) % 2) as f64);
    let mut sb = state.clone();
    sb.l = random_laplacian(1, 3);
    sb.y = DMatrix::zeros(3, 6);
    sb.mu = vec![0.7; 3];
    let cfg = GlenConfig { family: ExponentialFamily::Bernoulli, ..Default::default() };
    mu_step(&mut sb, &xb, &cfg).unwrap();
    assert!(sb.mu.iter().all(|m| m.abs() < 1e-10));
}

#[test]
fn objective_examples() {
    let n = 4;
    let m = 3;
    let mut state = GlenState {
        l: random_laplacian(9, n),
        y: DMatrix::zeros(n, m),
        mu: vec![0.0; n],
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    };
    let x = DMatrix::zeros(n, m);
    let cfg = GlenConfig { beta: 1e-12, ..Default::default() };
    let f = glen_objective(&state, &x, &cfg).unwrap();
    assert!((f - (n * m) as f64).abs() < 1e-9);

    // Gaussian fidelity is ½‖X − Y‖² minus a data-only constant
    let g = GlenConfig { family: ExponentialFamily::Gaussian, beta: 1e-14, ..Default::default() };
    let xg = DMatrix::from_fn(n, m, |i, j| (i as f64) - (j as f64) * 0.5);
    state.y = centered(n, m, 3, 2.0);
    let f = glen_objective(&state, &xg, &g).unwrap();
    let half = 0.5 * (&xg - &state.y).norm_squared() - 0.5 * xg.norm_squared();
    assert!((f - half).abs() < 1e-9);

    // a shifted column violates the gauge constraint
    let mut shifted = state.clone();
    shifted.y.column_mut(1).add_scalar_mut(0.3);
    assert!(state.check_constraint().is_ok());
    assert!(shifted.check_constraint().is_err());

    // negative binomial requires negative natural parameters
    let nb = GlenConfig { family: ExponentialFamily::NegativeBinomial { r: 2.0 }, ..Default::default() };
    let zero = GlenState { y: DMatrix::zeros(n, m), ..state.clone() };
    assert!(matches!(glen_objective(&zero, &x, &nb), Err(GlenError::ObjectiveDomain { .. })));
}

#[test]
fn denoised_means_examples() {
    let n = 3;
    let state = GlenState {
        l: random_laplacian(4, n),
        y: DMatrix::zeros(n, 2),
        mu: vec![4f64.ln(); n],
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        diagnostics: Default::default(),
    };
    let p = denoised_means(&state, ExponentialFamily::Poisson);
    assert!(p.iter().all(|v| (v - 4.0).abs() < 1e-12));
    let g = denoised_means(&state, ExponentialFamily::Gaussian);
    assert!(g.iter().all(|v| (v - 4f64.ln()).abs() < 1e-15));
    let mut s2 = state.clone();
    s2.y = centered(n, 2, 1, 50.0);
    assert!(denoised_means(&s2, ExponentialFamily::Bernoulli).iter().all(|v| *v > 0.0 && *v < 1.0));
}

fn smooth_poisson(seed: u64, n: usize, m: usize) -> (LaplacianMatrix, DMatrix<f64>) {
    let l0 = random_laplacian(seed, n);
    let f = sqrt_pinv_filter(&l0).unwrap();
    let y = sample_smooth(&f, m, &RngStream::new(seed, 0, Purpose::Smooth));
    let mu = vec![1.0; n];
    (l0, sample_observations(ExponentialFamily::Poisson, &y, &mu, &RngStream::new(seed, 0, Purpose::Noise)).unwrap())
}

#[test]
fn recentring_keeps_fidelity_and_never_increases_objective() {
    for family in FAMILIES {
        for cfg in configs(family) {
            let (mut st, x) = instance(family, 6, 9, 31);
            // give the rows unequal means while keeping columns centred
            for j in 0..st.n_signals() {
                for i in 0..st.n_nodes() {
                    st.y[(i, j)] += 0.2 * (i as f64 - 2.5);
                    st.mu[i] -= 0.2 * (i as f64 - 2.5) / st.n_signals() as f64;
                }
            }
            let eta_before = DMatrix::from_fn(6, 9, |i, j| st.y[(i, j)] + st.mu[i]);
            let before = glen_objective(&st, &x, &cfg).unwrap();
            recenter_step(&mut st);
            let after = glen_objective(&st, &x, &cfg).unwrap();
            assert!(after <= before + 1e-10 * before.abs(), "{family} {before} -> {after}");
            st.check_constraint().unwrap();
            for i in 0..6 {
                assert!(st.y.row(i).sum().abs() < 1e-10);
                for j in 0..9 {
                    assert!((st.y[(i, j)] + st.mu[i] - eta_before[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn run_is_monotone_valid_and_deterministic() {
    let (_, x) = smooth_poisson(3, 8, 60);
    for cfg in [
        GlenConfig::default(),
        GlenConfig { variant: Variant::vi(), ..Default::default() },
        GlenConfig { gamma: 0.5, ..Default::default() },
    ] {
        let a = run_glen(&x, &cfg).unwrap();
        assert!(!a.objective_trace.is_empty());
        for w in a.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8 * (1.0 + w[0].abs()), "{:?}", a.objective_trace);
        }
        a.check_constraint().unwrap();
        crate::graph::validate_laplacian(a.l.matrix()).unwrap();
        let b = run_glen(&x, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn zero_temporal_weight_matches_map_exactly() {
    for seed in 0..3 {
        let (_, x) = smooth_poisson(50 + seed, 7, 30);
        let map = run_glen(&x, &GlenConfig::default()).unwrap();
        let tv = GlenConfig { gamma: 0.0, sweep: SweepOrder::GaussSeidel, ..Default::default() };
        let b = run_glen(&x, &tv).unwrap();
        assert_eq!(map, b);
    }
}

#[test]
fn gaussian_run_matches_closed_form_iteration() {
    let (l0, _) = smooth_poisson(8, 6, 1);
    let f = sqrt_pinv_filter(&l0).unwrap();
    let x = sample_smooth(&f, 40, &RngStream::new(8, 1, Purpose::Smooth)).add_scalar(0.5);
    let cfg = GlenConfig {
        family: ExponentialFamily::Gaussian,
        alpha: 0.02,
        beta: 2.0,
        outer_max_iter: 10,
        outer_rel_tol: 0.0,
        ..Default::default()
    };
    let run = run_glen(&x, &cfg).unwrap();

    let mut state = initialize(&x, &cfg).unwrap();
    for _ in 0..10 {
        l_step(&mut state, &cfg).unwrap();
        state.y = gaussian_closed_form_y(&x, &state.mu, &state.l, cfg.beta).unwrap();
        for i in 0..6 {
            state.mu[i] = (0..40).map(|j| x[(i, j)] - state.y[(i, j)]).sum::<f64>() / 40.0;
        }
    }
    let reference = glen_objective(&state, &x, &cfg).unwrap();
    assert!((run.final_objective().unwrap() - reference).abs() <= 1e-6, "{:?} vs {reference}", run.final_objective());
}

#[test]
fn degenerate_data_is_rejected() {
    let x = DMatrix::zeros(4, 5);
    assert!(matches!(run_glen(&x, &GlenConfig::default()), Err(GlenError::Initialization(_))));
    let bad = DMatrix::from_element(3, 3, 0.5);
    assert!(run_glen(&bad, &GlenConfig::default()).is_err());
    let cfg = GlenConfig { beta: 0.0, ..Default::default() };
    assert!(matches!(run_glen(&DMatrix::from_element(3, 3, 1.0), &cfg), Err(GlenError::Config(_))));
    let nb_vi = GlenConfig {
        family: ExponentialFamily::NegativeBinomial { r: 2.0 },
        variant: Variant::vi(),
        ..Default::default()
    };
    assert!(matches!(run_glen(&DMatrix::from_fn(3, 3, |i, j| (i + j) as f64), &nb_vi), Err(GlenError::Unsupported(_))));
}

#[test]
fn initialization_respects_constraint() {
    for family in FAMILIES {
        let (_, x) = instance(family, 6, 9, 4);
        let s = initialize(&x, &GlenConfig { family, ..Default::default() }).unwrap();
        assert!(s.constraint_violation() < 1e-12);
        assert!(glen_objective(&s, &x, &GlenConfig { family, ..Default::default() }).unwrap().is_finite());
    }
}
