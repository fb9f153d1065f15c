//! `glen` command-line front end.
//!
//! Every subcommand prints one JSON object to stdout on success. Failures
//! print `{"error": {"kind": ..., "message": ...}}` to stderr and exit with
//! status 1; usage errors are reported by clap with status 2.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use glen::bench::{cgl_baseline, export_report, run_suite, summarize, ExperimentConfig, Method};
use glen::generators::{GraphModel, GraphModelSpec};
use glen::glen::{run_glen, GlenConfig, Variant};
use glen::io::{ingest_csv_matrix, read_laplacian, save_dataset, save_state, write_csv_matrix, CsvOptions};
use glen::metrics::evaluate;
use glen::signal::{generate_dataset, OffsetSpec, SyntheticDatasetSpec};
use glen::{CglOptions, ExponentialFamily, GlenError};

#[derive(Debug, Parser)]
#[command(name = "glen", version, about = "Graph Laplacian learning from exponential-family signals")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed (simulate, benchmark).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file, for evaluate).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Observation family: gaussian, bernoulli, binomial:N, poisson, negbinomial:R.
    #[arg(long, global = true)]
    family: Option<ExponentialFamily>,
    /// Method(s): glen, glen-vi, glen-tv, cgl-baseline (comma separated for benchmark).
    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<Method>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic graph, smooth signals and noisy observations.
    Simulate(SimulateArgs),
    /// Fit a Laplacian to an observation matrix.
    Fit(FitArgs),
    /// Compare an estimated Laplacian with a ground truth.
    Evaluate(EvaluateArgs),
    /// Run the synthetic grid-search benchmark.
    Benchmark(BenchmarkArgs),
    /// CGL on the covariance of log(X + 1).
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Graph model: er, sbm or ws (with the default parameters).
    #[arg(long)]
    model: Option<String>,
    /// Number of nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Number of signals (columns).
    #[arg(long)]
    signals: Option<usize>,
    /// Graph index within the seed's stream.
    #[arg(long)]
    graph_index: Option<u64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Observation CSV (nodes × signals), or a directory holding X.csv.
    input: PathBuf,
    /// L-step regularization weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Smoothness weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Temporal weight (glen-tv).
    #[arg(long)]
    gamma: Option<f64>,
    /// Cap on outer iterations.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Estimated Laplacian CSV, or a fit directory holding L.csv.
    estimate: PathBuf,
    /// Ground-truth Laplacian CSV, or a dataset directory holding L0.csv.
    truth: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Graphs per model.
    #[arg(long)]
    graphs: Option<usize>,
    /// Signals per graph.
    #[arg(long)]
    signals: Option<usize>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    /// Observation CSV, or a directory holding X.csv.
    input: PathBuf,
    /// Regularization weight.
    #[arg(long)]
    alpha: Option<f64>,
}

/// Settings of `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SimulateConfig {
    graph: GraphModelSpec,
    family: ExponentialFamily,
    n_signals: usize,
    offset: OffsetSpec,
    seed: u64,
    graph_index: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            graph: GraphModelSpec::new(GraphModel::ErdosRenyi { p: 0.3 }, 20),
            family: ExponentialFamily::Poisson,
            n_signals: 2000,
            offset: OffsetSpec::PaperPattern,
            seed: 0,
            graph_index: 0,
        }
    }
}

/// Settings of `baseline`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct BaselineConfig {
    alpha: f64,
    solver: CglOptions,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { alpha: 0.01, solver: CglOptions::default() }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, GlenError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn require_out(common: &Common) -> Result<&Path, GlenError> {
    common.out.as_deref().ok_or_else(|| GlenError::Config("--out is required for this command".into()))
}

fn single_method(common: &Common) -> Result<Option<Method>, GlenError> {
    match common.method.as_slice() {
        [] => Ok(None),
        [m] => Ok(Some(*m)),
        _ => Err(GlenError::Config("this command takes a single --method".into())),
    }
}

fn resolve(path: &Path, file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(file)
    } else {
        path.to_path_buf()
    }
}

fn simulate(common: &Common, args: &SimulateArgs) -> Result<serde_json::Value, GlenError> {
    let out = require_out(common)?;
    let mut cfg: SimulateConfig = load_config(common.config.as_deref())?;
    if let Some(m) = &args.model {
        cfg.graph.model = GraphModel::from_name(m)?;
    }
    if let Some(n) = args.nodes {
        cfg.graph.n_nodes = n;
    }
    if let Some(m) = args.signals {
        cfg.n_signals = m;
    }
    if let Some(g) = args.graph_index {
        cfg.graph_index = g;
    }
    if let Some(f) = common.family {
        cfg.family = f;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let spec = SyntheticDatasetSpec {
        graph_spec: cfg.graph,
        family: cfg.family,
        n_signals: cfg.n_signals,
        offset: cfg.offset.clone(),
        seed: cfg.seed,
        graph_index: cfg.graph_index,
    };
    let data = generate_dataset(&spec)?;
    save_dataset(out, &data, &spec)?;
    Ok(json!({
        "command": "simulate",
        "out": out,
        "n_nodes": data.x.nrows(),
        "n_signals": data.x.ncols(),
    }))
}

fn fit(common: &Common, args: &FitArgs) -> Result<serde_json::Value, GlenError> {
    let out = require_out(common)?;
    let mut cfg: GlenConfig = load_config(common.config.as_deref())?;
    if let Some(f) = common.family {
        cfg.family = f;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    if let Some(it) = args.max_iter {
        cfg.outer_max_iter = it;
    }
    match single_method(common)? {
        None => {}
        Some(Method::Glen) => {
            cfg.variant = Variant::Map;
            cfg.gamma = 0.0;
        }
        Some(Method::GlenVi) => {
            if cfg.variant == Variant::Map {
                cfg.variant = Variant::vi();
            }
        }
        Some(Method::GlenTv) => {
            if cfg.gamma <= 0.0 {
                return Err(GlenError::Config("glen-tv needs a positive --gamma".into()));
            }
        }
        Some(Method::CglBaseline) => {
            return Err(GlenError::Config("use the baseline subcommand for cgl-baseline".into()));
        }
    }
    let x = ingest_csv_matrix(resolve(&args.input, "X.csv"), &CsvOptions::default())?;
    let state = run_glen(&x, &cfg)?;
    save_state(out, &state, &cfg)?;
    Ok(json!({
        "command": "fit",
        "out": out,
        "iterations": state.iterations,
        "converged": state.converged,
        "final_objective": state.final_objective(),
    }))
}

fn evaluate_cmd(common: &Common, args: &EvaluateArgs) -> Result<serde_json::Value, GlenError> {
    let l_hat = read_laplacian(resolve(&args.estimate, "L.csv"))?;
    let l0 = read_laplacian(resolve(&args.truth, "L0.csv"))?;
    let report = evaluate(&l_hat, &l0)?;
    if let Some(out) = &common.out {
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(json!({ "command": "evaluate", "report": report }))
}

fn benchmark(common: &Common, args: &BenchmarkArgs) -> Result<serde_json::Value, GlenError> {
    let mut cfg: ExperimentConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = common.family {
        cfg.family = f;
    }
    if !common.method.is_empty() {
        cfg.methods = common.method.clone();
    }
    if let Some(g) = args.graphs {
        cfg.n_graphs = g;
    }
    if let Some(m) = args.signals {
        cfg.n_signals = m;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| GlenError::Config("--out (or output_dir in the config) is required".into()))?;
    let records = run_suite(&cfg)?;
    let summary = summarize(&records)?;
    export_report(&out, &records, &summary)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    Ok(json!({
        "command": "benchmark",
        "out": out,
        "n_records": summary.n_records,
        "n_failed": summary.n_failed,
        "summary": summary.entries.iter().map(|e| json!({
            "model": e.model,
            "method": e.method,
            "f_score": e.structure.mean.f_score,
            "nmi": e.structure.mean.nmi,
            "re_l": e.weight.mean.re_l,
        })).collect::<Vec<_>>(),
    }))
}

fn baseline(common: &Common, args: &BaselineArgs) -> Result<serde_json::Value, GlenError> {
    let out = require_out(common)?;
    if let Some(m) = single_method(common)? {
        if m != Method::CglBaseline {
            return Err(GlenError::Config(format!("baseline only runs cgl-baseline, not {m}")));
        }
    }
    let mut cfg: BaselineConfig = load_config(common.config.as_deref())?;
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    let x = ingest_csv_matrix(resolve(&args.input, "X.csv"), &CsvOptions::default())?;
    let l = cgl_baseline(&x, cfg.alpha, cfg.solver)?;
    fs::create_dir_all(out)?;
    write_csv_matrix(out.join("L.csv"), l.matrix())?;
    Ok(json!({ "command": "baseline", "out": out, "alpha": cfg.alpha }))
}

fn run(cli: &Cli) -> Result<serde_json::Value, GlenError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(GlenError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| GlenError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(&cli.common, a),
        Command::Fit(a) => fit(&cli.common, a),
        Command::Evaluate(a) => evaluate_cmd(&cli.common, a),
        Command::Benchmark(a) => benchmark(&cli.common, a),
        Command::Baseline(a) => baseline(&cli.common, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
