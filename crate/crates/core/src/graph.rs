//! Weighted undirected graphs and their combinatorial Laplacians.
//!
//! Everything here is dense: the workloads this crate targets have at most a
//! few hundred nodes, and the estimators need dense factorizations anyway.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{GlenError, Result};

/// Dense symmetric nonnegative weight matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    /// Checks symmetry, nonnegativity and the zero diagonal.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() || weights.nrows() == 0 {
            return Err(GlenError::InvalidGraph(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(GlenError::InvalidGraph(format!("self loop at node {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(GlenError::InvalidGraph(format!("weight ({i}, {j}) = {w}")));
                }
                if w != weights[(j, i)] {
                    return Err(GlenError::InvalidGraph(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        Self { weights: DMatrix::zeros(n, n) }
    }

    /// Builds a graph from an undirected edge list. Repeated edges are summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, weight) in edges {
            if i >= n || j >= n {
                return Err(GlenError::InvalidGraph(format!("edge ({i}, {j}) out of range")));
            }
            if i == j {
                return Err(GlenError::InvalidGraph(format!("self loop at node {i}")));
            }
            w[(i, j)] += weight;
            w[(j, i)] += weight;
        }
        Self::new(w)
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn n_edges(&self) -> usize {
        let n = self.n_nodes();
        (0..n).map(|i| (i + 1..n).filter(|&j| self.weights[(i, j)] > 0.0).count()).sum()
    }

    pub fn degree_count(&self, i: usize) -> usize {
        (0..self.n_nodes()).filter(|&j| self.weights[(i, j)] > 0.0).count()
    }

    /// Graph connectivity by breadth-first search over positive weights.
    pub fn is_connected(&self) -> bool {
        connected_by_support(&self.weights, 0.0)
    }
}

fn connected_by_support(m: &DMatrix<f64>, threshold: f64) -> bool {
    let n = m.nrows();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && i != j && m[(i, j)].abs() > threshold {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// Dense combinatorial graph Laplacian `L = D - W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// Wraps a matrix after running the full validity check.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        validate_laplacian(&entries)?;
        Ok(Self { entries })
    }

    /// Wraps a matrix that is a Laplacian by construction (e.g. assembled
    /// from nonnegative edge weights).
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: DMatrix::zeros(n, n) }
    }

    pub fn n_nodes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Recovers `W` as the negated off-diagonal part.
    pub fn to_graph(&self) -> WeightedGraph {
        let n = self.n_nodes();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[(i, j)] = (-self.entries[(i, j)]).max(0.0);
                }
            }
        }
        WeightedGraph { weights: w }
    }

    /// Edge weights `-L_ij` over the strict upper triangle, row-major order.
    pub fn edge_weights(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(-self.entries[(i, j)]);
            }
        }
        out
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Connectivity of the support of the off-diagonal entries.
    pub fn is_connected(&self) -> bool {
        connected_by_support(&self.entries, 0.0)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.entries.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Checks the three defining properties: zero row sums, nonpositive
/// off-diagonals and positive semidefiniteness.
pub fn validate_laplacian(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(GlenError::InvalidLaplacian(format!(
            "expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GlenError::InvalidLaplacian("non-finite entry".into()));
    }
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(GlenError::InvalidLaplacian(format!("asymmetric at ({i}, {j})")));
            }
            if m[(i, j)] > 1e-12 {
                return Err(GlenError::InvalidLaplacian(format!(
                    "positive off-diagonal {} at ({i}, {j})",
                    m[(i, j)]
                )));
            }
        }
        let row_sum: f64 = m.row(i).iter().sum();
        if row_sum.abs() > 1e-9 * scale {
            return Err(GlenError::InvalidLaplacian(format!("row {i} sums to {row_sum}")));
        }
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig < -1e-8 * m.trace().abs() / n as f64 {
        return Err(GlenError::InvalidLaplacian(format!("negative eigenvalue {min_eig}")));
    }
    Ok(())
}

/// `L = D - W`.
pub fn build_laplacian(g: &WeightedGraph) -> LaplacianMatrix {
    let n = g.n_nodes();
    let mut l = -g.weights.clone();
    for i in 0..n {
        l[(i, i)] = g.weights.row(i).iter().sum();
    }
    LaplacianMatrix { entries: l }
}

/// Rescales `L` so that its trace equals the number of nodes.
pub fn normalize_trace(l: &LaplacianMatrix) -> Result<LaplacianMatrix> {
    let tr = l.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(GlenError::ZeroTrace(tr));
    }
    let factor = l.n_nodes() as f64 / tr;
    Ok(LaplacianMatrix { entries: &l.entries * factor })
}

/// `Tr(Xᵀ L X)`.
pub fn quadratic_form(l: &LaplacianMatrix, x: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != l.n_nodes() {
        return Err(GlenError::Dimension(format!(
            "laplacian is {}x{} but signal has {} rows",
            l.n_nodes(),
            l.n_nodes(),
            x.nrows()
        )));
    }
    let lx = &l.entries * x;
    Ok(lx.component_mul(x).sum())
}

/// Unit-weight path on `m` vertices.
pub fn path_laplacian(m: usize) -> Result<LaplacianMatrix> {
    if m < 2 {
        return Err(GlenError::InvalidGraph(format!("path needs at least 2 vertices, got {m}")));
    }
    let edges: Vec<_> = (0..m - 1).map(|i| (i, i + 1, 1.0)).collect();
    Ok(build_laplacian(&WeightedGraph::from_edges(m, &edges)?))
}

/// Unit-weight cycle on `m` vertices. For `m = 2` the two ring edges
/// coincide and are summed.
pub fn ring_laplacian(m: usize) -> Result<LaplacianMatrix> {
    if m < 2 {
        return Err(GlenError::InvalidGraph(format!("ring needs at least 2 vertices, got {m}")));
    }
    let edges: Vec<_> = (0..m).map(|i| (i, (i + 1) % m, 1.0)).collect();
    Ok(build_laplacian(&WeightedGraph::from_edges(m, &edges)?))
}

/// Kronecker sum `I_T ⊗ L_G + L_T ⊗ I_G`, the Laplacian of the Cartesian
/// product graph. Vertex `(i, t)` maps to index `i + N·t`, which matches the
/// column-major vectorization of an `N×T` signal matrix.
pub fn cartesian_product_laplacian(
    lg: &LaplacianMatrix,
    lt: &LaplacianMatrix,
) -> LaplacianMatrix {
    let n = lg.n_nodes();
    let t = lt.n_nodes();
    let mut out = DMatrix::zeros(n * t, n * t);
    for s in 0..t {
        for i in 0..n {
            for j in 0..n {
                out[(i + n * s, j + n * s)] += lg.entries[(i, j)];
            }
        }
    }
    for s in 0..t {
        for r in 0..t {
            let v = lt.entries[(s, r)];
            if v != 0.0 {
                for i in 0..n {
                    out[(i + n * s, i + n * r)] += v;
                }
            }
        }
    }
    LaplacianMatrix { entries: out }
}
