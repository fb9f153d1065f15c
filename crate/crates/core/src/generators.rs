//! Random graph models used by the synthetic benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GlenError, Result};
use crate::graph::WeightedGraph;

/// Cap on topology redraws when a connected graph is required.
pub const CONNECT_RETRY_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphModel {
    ErdosRenyi { p: f64 },
    StochasticBlock { n_blocks: usize, p_intra: f64, p_inter: f64 },
    WattsStrogatz { k: usize, p_rewire: f64 },
}

impl GraphModel {
    /// Default parameters for the short names `er`, `sbm` and `ws`.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "er" | "erdos_renyi" => GraphModel::ErdosRenyi { p: 0.3 },
            "sbm" | "stochastic_block" => GraphModel::StochasticBlock { n_blocks: 2, p_intra: 0.4, p_inter: 0.1 },
            "ws" | "watts_strogatz" => GraphModel::WattsStrogatz { k: 2, p_rewire: 0.1 },
            other => return Err(GlenError::Config(format!("unknown graph model {other:?} (expected er, sbm or ws)"))),
        })
    }

    pub fn label(&self) -> String {
        match self {
            GraphModel::ErdosRenyi { p } => format!("er(p={p})"),
            GraphModel::StochasticBlock { n_blocks, p_intra, p_inter } => {
                format!("sbm(b={n_blocks},p={p_intra},q={p_inter})")
            }
            GraphModel::WattsStrogatz { k, p_rewire } => format!("ws(k={k},p={p_rewire})"),
        }
    }
}

fn default_weight_low() -> f64 {
    0.1
}
fn default_weight_high() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphModelSpec {
    pub model: GraphModel,
    pub n_nodes: usize,
    #[serde(default = "default_weight_low")]
    pub weight_low: f64,
    #[serde(default = "default_weight_high")]
    pub weight_high: f64,
    #[serde(default = "default_true")]
    pub require_connected: bool,
}

impl GraphModelSpec {
    pub fn new(model: GraphModel, n_nodes: usize) -> Self {
        Self {
            model,
            n_nodes,
            weight_low: default_weight_low(),
            weight_high: default_weight_high(),
            require_connected: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(GlenError::Config(format!("{name} = {p} is not a probability")))
            }
        };
        match self.model {
            GraphModel::ErdosRenyi { p } => prob("p", p)?,
            GraphModel::StochasticBlock { n_blocks, p_intra, p_inter } => {
                prob("p_intra", p_intra)?;
                prob("p_inter", p_inter)?;
                if n_blocks == 0 || n_blocks > self.n_nodes {
                    return Err(GlenError::Config(format!("n_blocks = {n_blocks}")));
                }
            }
            GraphModel::WattsStrogatz { k, p_rewire } => {
                prob("p_rewire", p_rewire)?;
                if 2 * k >= self.n_nodes {
                    return Err(GlenError::Config(format!(
                        "lattice degree 2k = {} needs more than {} nodes",
                        2 * k,
                        self.n_nodes
                    )));
                }
            }
        }
        if self.n_nodes == 0 {
            return Err(GlenError::Config("n_nodes must be positive".into()));
        }
        if !(self.weight_low > 0.0 && self.weight_low < self.weight_high) {
            return Err(GlenError::Config(format!(
                "weight range [{}, {}) invalid",
                self.weight_low, self.weight_high
            )));
        }
        Ok(())
    }
}

/// Block index of each node; the first `n mod b` blocks get one extra node.
pub fn block_assignment(n: usize, n_blocks: usize) -> Vec<usize> {
    let base = n / n_blocks;
    let extra = n % n_blocks;
    let mut out = Vec::with_capacity(n);
    for b in 0..n_blocks {
        let size = base + usize::from(b < extra);
        out.extend(std::iter::repeat_n(b, size));
    }
    out
}

fn sample_topology<R: Rng + ?Sized>(spec: &GraphModelSpec, rng: &mut R) -> Vec<Vec<bool>> {
    let n = spec.n_nodes;
    let mut adj = vec![vec![false; n]; n];
    let set = |adj: &mut Vec<Vec<bool>>, i: usize, j: usize, v: bool| {
        adj[i][j] = v;
        adj[j][i] = v;
    };
    match spec.model {
        GraphModel::ErdosRenyi { p } => {
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        set(&mut adj, i, j, true);
                    }
                }
            }
        }
        GraphModel::StochasticBlock { n_blocks, p_intra, p_inter } => {
            let blocks = block_assignment(n, n_blocks);
            for i in 0..n {
                for j in i + 1..n {
                    let p = if blocks[i] == blocks[j] { p_intra } else { p_inter };
                    if rng.random::<f64>() < p {
                        set(&mut adj, i, j, true);
                    }
                }
            }
        }
        GraphModel::WattsStrogatz { k, p_rewire } => {
            for i in 0..n {
                for off in 1..=k {
                    set(&mut adj, i, (i + off) % n, true);
                }
            }
            for i in 0..n {
                for off in 1..=k {
                    let j = (i + off) % n;
                    if !adj[i][j] || rng.random::<f64>() >= p_rewire {
                        continue;
                    }
                    let candidates: Vec<usize> =
                        (0..n).filter(|&c| c != i && !adj[i][c]).collect();
                    if let Some(&c) = candidates.choose(rng) {
                        set(&mut adj, i, j, false);
                        set(&mut adj, i, c, true);
                    }
                }
            }
        }
    }
    adj
}

fn connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adj[i][j] && !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// Draws a topology from the model (redrawing until connected when
/// required), then i.i.d. `U[low, high)` weights on the present edges in
/// row-major upper-triangle order.
pub fn sample_random_graph<R: Rng + ?Sized>(
    spec: &GraphModelSpec,
    rng: &mut R,
) -> Result<WeightedGraph> {
    spec.validate()?;
    let n = spec.n_nodes;
    let mut attempt = 0;
    let adj = loop {
        let adj = sample_topology(spec, rng);
        if !spec.require_connected || connected(&adj) {
            break adj;
        }
        attempt += 1;
        if attempt >= CONNECT_RETRY_CAP {
            return Err(GlenError::Generation(CONNECT_RETRY_CAP));
        }
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if adj[i][j] {
                let w = rng.random_range(spec.weight_low..spec.weight_high);
                edges.push((i, j, w));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges)
}
