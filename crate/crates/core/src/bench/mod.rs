//! Benchmark harness: synthetic suites, grid search, selection and reports.
//!
//! A suite draws `n_graphs` ground-truth graphs per model, simulates one
//! dataset per graph and runs every method at every grid point against it.
//! Each run is keyed by `(seed, graph_index)` only, so the record set does
//! not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgl::{empirical_statistic, solve_cgl, CglOptions, CglProblem};
use crate::error::{GlenError, Result};
use crate::expfam::ExponentialFamily;
use crate::generators::{GraphModel, GraphModelSpec};
use crate::glen::{run_glen, GlenConfig, Variant};
use crate::graph::LaplacianMatrix;
use crate::metrics::{evaluate, EvalReport};
use crate::signal::{generate_dataset, OffsetSpec, SignalDataset, SyntheticDatasetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Glen,
    GlenVi,
    GlenTv,
    CglBaseline,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Glen, Method::GlenVi, Method::GlenTv, Method::CglBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Glen => "glen",
            Method::GlenVi => "glen-vi",
            Method::GlenTv => "glen-tv",
            Method::CglBaseline => "cgl-baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GlenError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| GlenError::Config(format!("unknown method {s:?} (expected glen, glen-vi, glen-tv or cgl-baseline)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Only used by `glen-tv`.
    pub gamma: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            alpha: vec![0.0005, 0.001, 0.005, 0.01, 0.05, 0.1],
            beta: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            gamma: vec![0.1, 0.5, 1.0],
        }
    }
}

/// One hyper-parameter setting. `gamma` is `None` for methods without a
/// temporal term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.beta.is_empty() {
            return Err(GlenError::Config("grid needs at least one alpha and one beta".into()));
        }
        Ok(())
    }

    /// Grid points for `method`, in lexicographic (alpha, beta, gamma) order.
    pub fn points(&self, method: Method) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                if method == Method::GlenTv {
                    out.extend(self.gamma.iter().map(|&g| GridPoint { alpha, beta, gamma: Some(g) }));
                } else {
                    out.push(GridPoint { alpha, beta, gamma: None });
                }
            }
        }
        out
    }
}

fn default_models() -> Vec<GraphModelSpec> {
    ["er", "sbm", "ws"]
        .into_iter()
        .map(|m| GraphModelSpec::new(GraphModel::from_name(m).expect("known model"), 20))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub models: Vec<GraphModelSpec>,
    pub n_graphs: usize,
    pub n_signals: usize,
    pub family: ExponentialFamily,
    pub offset: OffsetSpec,
    pub methods: Vec<Method>,
    pub grid: Grid,
    pub seed: u64,
    /// Template for the estimator settings other than the grid values.
    pub glen: GlenConfig,
    /// Solver settings of the baseline.
    pub baseline: CglOptions,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            n_graphs: 20,
            n_signals: 2000,
            family: ExponentialFamily::Poisson,
            offset: OffsetSpec::PaperPattern,
            methods: vec![Method::Glen, Method::GlenVi, Method::CglBaseline],
            grid: Grid::default(),
            seed: 0,
            glen: GlenConfig::default(),
            baseline: CglOptions::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_graphs == 0 {
            return Err(GlenError::Config("n_graphs must be at least 1".into()));
        }
        if self.models.is_empty() || self.methods.is_empty() {
            return Err(GlenError::Config("need at least one model and one method".into()));
        }
        if self.methods.contains(&Method::GlenTv) && self.grid.gamma.is_empty() {
            return Err(GlenError::Config("glen-tv needs a nonempty gamma grid".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        Ok(())
    }

    /// Number of records [`run_suite`] produces.
    pub fn n_runs(&self) -> usize {
        let per_graph: usize = self.methods.iter().map(|&m| self.grid.points(m).len()).sum();
        self.models.len() * self.n_graphs * per_graph
    }

    /// Estimator settings for one method at one grid point.
    pub fn glen_config(&self, method: Method, point: GridPoint) -> GlenConfig {
        let mut cfg = GlenConfig { family: self.family, alpha: point.alpha, beta: point.beta, ..self.glen.clone() };
        match method {
            Method::GlenVi if cfg.variant == Variant::Map => cfg.variant = Variant::vi(),
            Method::GlenVi => {}
            _ => cfg.variant = Variant::Map,
        }
        cfg.gamma = point.gamma.unwrap_or(0.0);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub graph_index: u64,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    /// `None` when the run failed; see `error`.
    pub metrics: Option<EvalReport>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: Option<f64>,
    /// Largest `(J_k − J_{k−1}) / (1 + |J_{k−1}|)` over the outer iterations.
    pub max_objective_increase: f64,
    pub max_constraint_violation: f64,
    pub error: Option<String>,
    /// Excluded from the deterministic CSV export.
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn point(&self) -> GridPoint {
        GridPoint { alpha: self.alpha, beta: self.beta, gamma: self.gamma }
    }
}

/// CGL on the covariance of `log(X + 1)` (rows centred, `1/M`).
pub fn log_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.map(|v| (v + 1.0).ln());
    for mut row in y.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    empirical_statistic(&y)
}

pub fn cgl_baseline(x: &DMatrix<f64>, alpha: f64, opts: CglOptions) -> Result<LaplacianMatrix> {
    if x.iter().any(|v| !(*v > -1.0) || !v.is_finite()) {
        return Err(GlenError::Config("log(X + 1) needs finite entries above -1".into()));
    }
    Ok(solve_cgl(&CglProblem::new(log_covariance(x), alpha)?, opts)?.laplacian)
}

fn max_increase(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| (w[1] - w[0]) / (1.0 + w[0].abs())).fold(0.0, f64::max)
}

struct Task<'a> {
    model_index: usize,
    model: &'a str,
    graph_index: u64,
    data: &'a SignalDataset,
    method: Method,
    point: GridPoint,
}

fn failed(task: &Task, err: GlenError, secs: f64) -> RunRecord {
    RunRecord {
        model: task.model.to_string(),
        graph_index: task.graph_index,
        method: task.method,
        alpha: task.point.alpha,
        beta: task.point.beta,
        gamma: task.point.gamma,
        metrics: None,
        iterations: 0,
        converged: false,
        final_objective: None,
        max_objective_increase: 0.0,
        max_constraint_violation: 0.0,
        error: Some(err.to_string()),
        wall_time_secs: secs,
    }
}

fn execute(cfg: &ExperimentConfig, task: &Task) -> RunRecord {
    let start = Instant::now();
    let gt = task.data.ground_truth.as_ref().expect("synthetic data carries ground truth");
    let outcome = match task.method {
        Method::CglBaseline => cgl_baseline(&task.data.x, task.point.alpha, cfg.baseline)
            .and_then(|l| Ok((evaluate(&l, &gt.l0)?, None))),
        m => run_glen(&task.data.x, &cfg.glen_config(m, task.point))
            .and_then(|st| Ok((evaluate(&st.l, &gt.l0)?, Some(st)))),
    };
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Err(e) => failed(task, e, secs),
        Ok((report, state)) => RunRecord {
            model: task.model.to_string(),
            graph_index: task.graph_index,
            method: task.method,
            alpha: task.point.alpha,
            beta: task.point.beta,
            gamma: task.point.gamma,
            metrics: Some(report),
            iterations: state.as_ref().map_or(0, |s| s.iterations),
            converged: state.as_ref().is_none_or(|s| s.converged),
            final_objective: state.as_ref().and_then(|s| s.final_objective()),
            max_objective_increase: state.as_ref().map_or(0.0, |s| max_increase(&s.objective_trace)),
            max_constraint_violation: state.as_ref().map_or(0.0, |s| s.diagnostics.max_constraint_violation),
            error: None,
            wall_time_secs: secs,
        },
    }
}

pub fn dataset_spec(cfg: &ExperimentConfig, model: &GraphModelSpec, graph_index: u64) -> SyntheticDatasetSpec {
    SyntheticDatasetSpec {
        graph_spec: *model,
        family: cfg.family,
        n_signals: cfg.n_signals,
        offset: cfg.offset.clone(),
        seed: cfg.seed,
        graph_index,
    }
}

/// Runs every model × graph × method × grid point. Records come back sorted
/// by model order, graph, method and grid order; failed runs are recorded
/// with their error rather than aborting the suite.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let labels: Vec<String> = cfg.models.iter().map(|m| m.model.label()).collect();
    let mut data = Vec::with_capacity(cfg.models.len() * cfg.n_graphs);
    for model in &cfg.models {
        for g in 0..cfg.n_graphs as u64 {
            data.push(generate_dataset(&dataset_spec(cfg, model, g))?);
        }
    }
    let mut tasks = Vec::with_capacity(cfg.n_runs());
    for (mi, label) in labels.iter().enumerate() {
        for g in 0..cfg.n_graphs {
            for &method in &cfg.methods {
                for point in cfg.grid.points(method) {
                    tasks.push(Task {
                        model_index: mi,
                        model: label,
                        graph_index: g as u64,
                        data: &data[mi * cfg.n_graphs + g],
                        method,
                        point,
                    });
                }
            }
        }
    }
    // the baseline ignores beta, so it is solved once per (graph, alpha)
    // and copied to the other beta values
    let key = |t: &Task| (t.model_index, t.graph_index, t.point.alpha.to_bits());
    let is_primary = |t: &Task| t.method != Method::CglBaseline || t.point.beta == cfg.grid.beta[0];
    let primary: Vec<usize> = (0..tasks.len()).filter(|&i| is_primary(&tasks[i])).collect();
    let done: Vec<RunRecord> = primary.par_iter().map(|&i| execute(cfg, &tasks[i])).collect();
    let mut out: Vec<Option<RunRecord>> = vec![None; tasks.len()];
    let mut baseline: BTreeMap<(usize, u64, u64), RunRecord> = BTreeMap::new();
    for (&i, rec) in primary.iter().zip(done) {
        if tasks[i].method == Method::CglBaseline {
            baseline.insert(key(&tasks[i]), rec.clone());
        }
        out[i] = Some(rec);
    }
    Ok(tasks
        .iter()
        .zip(out)
        .map(|(t, rec)| {
            rec.unwrap_or_else(|| RunRecord { beta: t.point.beta, ..baseline[&key(t)].clone() })
        })
        .collect())
}

/// Mean metrics at one grid point over the graphs that ran successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub point: GridPoint,
    pub n_graphs: usize,
    pub n_failed: usize,
    pub mean: EvalReport,
}

fn same_point(a: &GridPoint, b: &GridPoint) -> bool {
    a.alpha == b.alpha && a.beta == b.beta && a.gamma == b.gamma
}

/// Per-grid-point averages in first-appearance (grid) order.
pub fn average_by_point(records: &[RunRecord]) -> Vec<Selection> {
    let mut out: Vec<(Selection, Vec<EvalReport>)> = Vec::new();
    for r in records {
        let p = r.point();
        let idx = match out.iter().position(|(s, _)| same_point(&s.point, &p)) {
            Some(i) => i,
            None => {
                out.push((Selection { point: p, n_graphs: 0, n_failed: 0, mean: EvalReport::default() }, Vec::new()));
                out.len() - 1
            }
        };
        match &r.metrics {
            Some(m) => out[idx].1.push(*m),
            None => out[idx].0.n_failed += 1,
        }
    }
    out.into_iter()
        .map(|(mut s, reports)| {
            s.n_graphs = reports.len();
            s.mean = mean_report(&reports);
            s
        })
        .collect()
}

fn mean_report(reports: &[EvalReport]) -> EvalReport {
    if reports.is_empty() {
        let nan = f64::NAN;
        return EvalReport {
            precision: nan,
            recall: nan,
            f_score: nan,
            nmi: nan,
            re_l: nan,
            re_edge_l1: nan,
            re_edge_l2: nan,
            re_deg_l1: nan,
            re_deg_l2: nan,
        };
    }
    let k = reports.len() as f64;
    let avg = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    EvalReport {
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        f_score: avg(|r| r.f_score),
        nmi: avg(|r| r.nmi),
        re_l: avg(|r| r.re_l),
        re_edge_l1: avg(|r| r.re_edge_l1),
        re_edge_l2: avg(|r| r.re_edge_l2),
        re_deg_l1: avg(|r| r.re_deg_l1),
        re_deg_l2: avg(|r| r.re_deg_l2),
    }
}

fn usable(records: &[RunRecord]) -> Result<Vec<Selection>> {
    if records.is_empty() {
        return Err(GlenError::Empty("no records to select from".into()));
    }
    let first = (&records[0].model, records[0].method);
    if records.iter().any(|r| (&r.model, r.method) != first) {
        return Err(GlenError::Config("selection needs records of a single model and method".into()));
    }
    let avgs: Vec<Selection> = average_by_point(records).into_iter().filter(|s| s.n_graphs > 0).collect();
    if avgs.is_empty() {
        return Err(GlenError::Empty("every run at every grid point failed".into()));
    }
    Ok(avgs)
}

/// Grid point with the highest mean F-score; ties go to the lower mean
/// RE_L, then to the earlier grid point.
pub fn select_structure_setting(records: &[RunRecord]) -> Result<Selection> {
    let avgs = usable(records)?;
    let mut best = &avgs[0];
    for s in &avgs[1..] {
        let (f, bf) = (s.mean.f_score, best.mean.f_score);
        if f > bf || (f == bf && s.mean.re_l < best.mean.re_l) {
            best = s;
        }
    }
    Ok(best.clone())
}

/// Among grid points whose mean F-score is within 0.02 of the best, the
/// one with the lowest mean RE_L (earlier grid point on ties).
pub fn select_weight_setting(records: &[RunRecord]) -> Result<Selection> {
    let avgs = usable(records)?;
    let best_f = avgs.iter().map(|s| s.mean.f_score).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<&Selection> = None;
    for s in avgs.iter().filter(|s| s.mean.f_score >= best_f - 0.02) {
        if best.is_none_or(|b| s.mean.re_l < b.mean.re_l) {
            best = Some(s);
        }
    }
    Ok(best.expect("the best-F point is always a candidate").clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub model: String,
    pub method: Method,
    pub structure: Selection,
    pub weight: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub n_records: usize,
    pub n_failed: usize,
    pub max_objective_increase: f64,
    pub max_constraint_violation: f64,
    pub entries: Vec<MethodSummary>,
}

impl SuiteSummary {
    pub fn entry(&self, model: &str, method: Method) -> Option<&MethodSummary> {
        self.entries.iter().find(|e| e.model == model && e.method == method)
    }
}

/// Both selections for every (model, method) pair present in `records`.
pub fn summarize(records: &[RunRecord]) -> Result<SuiteSummary> {
    let mut groups: Vec<((String, Method), Vec<RunRecord>)> = Vec::new();
    for r in records {
        let key = (r.model.clone(), r.method);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.clone()),
            None => groups.push((key, vec![r.clone()])),
        }
    }
    let mut entries = Vec::with_capacity(groups.len());
    for ((model, method), recs) in groups {
        entries.push(MethodSummary {
            model,
            method,
            structure: select_structure_setting(&recs)?,
            weight: select_weight_setting(&recs)?,
        });
    }
    Ok(SuiteSummary {
        n_records: records.len(),
        n_failed: records.iter().filter(|r| r.error.is_some()).count(),
        max_objective_increase: records.iter().map(|r| r.max_objective_increase).fold(0.0, f64::max),
        max_constraint_violation: records.iter().map(|r| r.max_constraint_violation).fold(0.0, f64::max),
        entries,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes `records.csv` (deterministic columns only), `timings.csv` and
/// `summary.json` into `dir`.
pub fn export_report(dir: impl AsRef<Path>, records: &[RunRecord], summary: &SuiteSummary) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    w.write_record([
        "model", "graph_index", "method", "alpha", "beta", "gamma", "precision", "recall", "f_score", "nmi", "re_l",
        "re_edge_l1", "re_edge_l2", "re_deg_l1", "re_deg_l2", "iterations", "converged", "final_objective",
        "max_objective_increase", "max_constraint_violation", "error",
    ])?;
    for r in records {
        let m = r.metrics;
        let f = |g: fn(&EvalReport) -> f64| opt(m.as_ref().map(g));
        w.write_record([
            r.model.clone(),
            r.graph_index.to_string(),
            r.method.to_string(),
            format!("{:?}", r.alpha),
            format!("{:?}", r.beta),
            opt(r.gamma),
            f(|e| e.precision),
            f(|e| e.recall),
            f(|e| e.f_score),
            f(|e| e.nmi),
            f(|e| e.re_l),
            f(|e| e.re_edge_l1),
            f(|e| e.re_edge_l2),
            f(|e| e.re_deg_l1),
            f(|e| e.re_deg_l2),
            r.iterations.to_string(),
            r.converged.to_string(),
            opt(r.final_objective),
            format!("{:?}", r.max_objective_increase),
            format!("{:?}", r.max_constraint_violation),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let mut t = csv::Writer::from_path(dir.join("timings.csv"))?;
    t.write_record(["model", "graph_index", "method", "alpha", "beta", "gamma", "wall_time_secs"])?;
    for r in records {
        t.write_record([
            r.model.clone(),
            r.graph_index.to_string(),
            r.method.to_string(),
            format!("{:?}", r.alpha),
            format!("{:?}", r.beta),
            opt(r.gamma),
            format!("{:.6}", r.wall_time_secs),
        ])?;
    }
    t.flush()?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            models: vec![GraphModelSpec::new(GraphModel::ErdosRenyi { p: 0.5 }, 6)],
            n_graphs: 1,
            n_signals: 40,
            methods: vec![Method::Glen],
            grid: Grid { alpha: vec![0.01], beta: vec![1.0], gamma: vec![] },
            glen: GlenConfig { outer_max_iter: 5, ..Default::default() },
            ..Default::default()
        }
    }

    fn record(graph: u64, point: GridPoint, f: f64, re: f64) -> RunRecord {
        RunRecord {
            model: "m".into(),
            graph_index: graph,
            method: Method::Glen,
            alpha: point.alpha,
            beta: point.beta,
            gamma: point.gamma,
            metrics: Some(EvalReport { f_score: f, re_l: re, ..Default::default() }),
            iterations: 1,
            converged: true,
            final_objective: None,
            max_objective_increase: 0.0,
            max_constraint_violation: 0.0,
            error: None,
            wall_time_secs: 0.0,
        }
    }

    fn p(alpha: f64, beta: f64) -> GridPoint {
        GridPoint { alpha, beta, gamma: None }
    }

    #[test]
    fn one_graph_one_point_one_record() {
        let recs = run_suite(&tiny()).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].error.is_none(), "{:?}", recs[0].error);
    }

    #[test]
    fn default_record_count() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.n_runs(), 3 * 20 * 36 * 3);
        let tv = ExperimentConfig { methods: vec![Method::GlenTv], ..Default::default() };
        assert_eq!(tv.n_runs(), 3 * 20 * 36 * 3);
    }

    #[test]
    fn suite_is_deterministic_and_baseline_shared_across_beta() {
        let cfg = ExperimentConfig {
            n_graphs: 2,
            methods: vec![Method::Glen, Method::CglBaseline],
            grid: Grid { alpha: vec![0.01, 0.1], beta: vec![0.5, 2.0], gamma: vec![] },
            ..tiny()
        };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.len(), cfg.n_runs());
        let strip = |v: &[RunRecord]| v.iter().map(|r| RunRecord { wall_time_secs: 0.0, ..r.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let base: Vec<_> = a.iter().filter(|r| r.method == Method::CglBaseline && r.graph_index == 0 && r.alpha == 0.01).collect();
        assert_eq!(base.len(), 2);
        assert_eq!(base[0].metrics, base[1].metrics);
        assert_ne!(base[0].beta, base[1].beta);
    }

    #[test]
    fn structure_selection_and_ties() {
        assert_eq!(select_structure_setting(&[record(0, p(1.0, 1.0), 0.5, 0.3)]).unwrap().point, p(1.0, 1.0));
        let recs = vec![
            record(0, p(1.0, 1.0), 0.6, 0.5),
            record(1, p(1.0, 1.0), 0.8, 0.5),
            record(0, p(2.0, 1.0), 0.7, 0.4),
            record(1, p(2.0, 1.0), 0.7, 0.4),
            record(0, p(3.0, 1.0), 0.7, 0.4),
            record(1, p(3.0, 1.0), 0.7, 0.4),
        ];
        // mean F is 0.7 everywhere; 2.0 wins on RE, 3.0 loses the order tie
        let s = select_structure_setting(&recs).unwrap();
        assert_eq!(s.point, p(2.0, 1.0));
        assert_eq!(s.n_graphs, 2);
    }

    #[test]
    fn weight_selection_window() {
        let recs = vec![
            record(0, p(1.0, 1.0), 0.80, 0.5),
            record(0, p(2.0, 1.0), 0.79, 0.3),
            record(0, p(3.0, 1.0), 0.70, 0.1),
        ];
        assert_eq!(select_weight_setting(&recs).unwrap().point, p(2.0, 1.0));
        assert_eq!(select_structure_setting(&recs).unwrap().point, p(1.0, 1.0));
    }

    #[test]
    fn failed_runs_are_recorded_not_fatal() {
        let mut recs = vec![record(0, p(1.0, 1.0), 0.5, 0.4)];
        let mut bad = record(1, p(1.0, 1.0), 0.0, 0.0);
        bad.metrics = None;
        bad.error = Some("boom".into());
        recs.push(bad);
        let s = select_structure_setting(&recs).unwrap();
        assert_eq!((s.n_graphs, s.n_failed), (1, 1));
        assert_eq!(s.mean.f_score, 0.5);
        let summary = summarize(&recs).unwrap();
        assert_eq!(summary.n_failed, 1);
    }

    #[test]
    fn baseline_matches_direct_solve() {
        let x = DMatrix::from_fn(4, 30, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let l = cgl_baseline(&x, 0.01, CglOptions::default()).unwrap();
        let direct = solve_cgl(&CglProblem::new(log_covariance(&x), 0.01).unwrap(), CglOptions::default()).unwrap();
        assert_eq!(&l, &direct.laplacian);
        let s = log_covariance(&x);
        for i in 0..4 {
            let row: Vec<f64> = x.row(i).iter().map(|v| (v + 1.0).ln()).collect();
            let mean = row.iter().sum::<f64>() / 30.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 30.0;
            assert!((s[(i, i)] - var).abs() < 1e-12);
        }
    }

    #[test]
    fn export_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let recs = run_suite(&tiny()).unwrap();
        let summary = summarize(&recs).unwrap();
        export_report(dir.path(), &recs, &summary).unwrap();
        let csv = fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert!(!csv.contains("wall_time"));
        assert_eq!(csv.lines().count(), 2);
        assert!(fs::read_to_string(dir.path().join("timings.csv")).unwrap().contains("wall_time_secs"));
        let back: SuiteSummary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back.entries.len(), 1);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
