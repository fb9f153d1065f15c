//! Synthetic smooth graph signals and exponential-family observations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GlenError, Result};
use crate::expfam::{ExponentialFamily, ETA_CAP};
use crate::generators::{sample_random_graph, GraphModelSpec};
use crate::graph::{build_laplacian, cartesian_product_laplacian, normalize_trace, LaplacianMatrix};
use crate::rng::{Purpose, RngStream};

/// Spectral graph filter `U diag(g) Uᵀ`, here with gains `λ^{-1/2}` on the
/// nonzero spectrum.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub filter_diag: Vec<f64>,
    pub eig_tolerance: f64,
    dense: DMatrix<f64>,
}

impl FilterOperator {
    pub fn n_nodes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The filter as a dense symmetric matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.dense * x
    }
}

/// Eigen-based `√(L†)`. Modes with eigenvalue below `1e-8·λ_max` are treated
/// as the null space and get zero gain.
pub fn sqrt_pinv_filter(l: &LaplacianMatrix) -> Result<FilterOperator> {
    let m = l.matrix();
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(GlenError::Eigen(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let lmax = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let eig_tolerance = 1e-8 * lmax;
    let filter_diag: Vec<f64> = eigenvalues
        .iter()
        .map(|&v| if v > eig_tolerance && v > 0.0 { v.powf(-0.5) } else { 0.0 })
        .collect();
    let mut scaled = eigenvectors.clone();
    for (c, g) in filter_diag.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*g);
    }
    let dense = &scaled * eigenvectors.transpose();
    Ok(FilterOperator { eigenvalues, eigenvectors, filter_diag, eig_tolerance, dense })
}

/// Moore–Penrose pseudo-inverse of a Laplacian with the same spectral cutoff
/// as [`sqrt_pinv_filter`].
pub fn laplacian_pinv(l: &LaplacianMatrix) -> Result<DMatrix<f64>> {
    let f = sqrt_pinv_filter(l)?;
    Ok(f.matrix() * f.matrix())
}

/// `M` columns `F z_j` with `z_j ~ N(0, I)`; column `j` uses `stream.rng(j)`.
pub fn sample_smooth(filter: &FilterOperator, m: usize, stream: &RngStream) -> DMatrix<f64> {
    let n = filter.n_nodes();
    let mut out = DMatrix::zeros(n, m);
    let mut z = DVector::zeros(n);
    for j in 0..m {
        let mut rng = stream.rng(j as u64);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        out.set_column(j, &(filter.matrix() * &z));
    }
    out
}

/// Two-level offset: `+2` on the first `⌊N/2⌋` nodes, `−2` on the rest.
pub fn paper_offset(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i < n / 2 { 2.0 } else { -2.0 }).collect()
}

/// Entrywise draws at `η_ij = clamp(Y_ij + μ_i, ±30)`; column `j` uses
/// `stream.rng(j)`.
pub fn sample_observations(
    family: ExponentialFamily,
    y: &DMatrix<f64>,
    mu: &[f64],
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if mu.len() != y.nrows() {
        return Err(GlenError::Dimension(format!(
            "offset has {} entries for {} nodes",
            mu.len(),
            y.nrows()
        )));
    }
    let (n, m) = y.shape();
    let mut x = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut rng = stream.rng(j as u64);
        for i in 0..n {
            let eta = y[(i, j)] + mu[i];
            if !eta.is_finite() {
                return Err(GlenError::Domain { family: family.to_string(), eta });
            }
            x[(i, j)] = family.sample(eta.clamp(-ETA_CAP, ETA_CAP), &mut rng)?;
        }
    }
    Ok(x)
}

/// Smooth sample on the time-vertex product graph `L_G ⊕ γ L_T`, reshaped to
/// `N × T` (column-major).
pub fn sample_timevertex_smooth(
    lg: &LaplacianMatrix,
    lt: &LaplacianMatrix,
    gamma: f64,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0) {
        return Err(GlenError::Config(format!("temporal weight must be positive, got {gamma}")));
    }
    let scaled_t = LaplacianMatrix::from_matrix_unchecked(lt.matrix() * gamma);
    let lj = cartesian_product_laplacian(lg, &scaled_t);
    let filter = sqrt_pinv_filter(&lj)?;
    let nt = lj.n_nodes();
    let mut rng = stream.rng(0);
    let z = DVector::from_fn(nt, |_, _| StandardNormal.sample(&mut rng));
    let v = filter.apply(&z);
    Ok(DMatrix::from_column_slice(lg.n_nodes(), lt.n_nodes(), v.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSpec {
    PaperPattern,
    Explicit(Vec<f64>),
    Zero,
}

impl OffsetSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            OffsetSpec::PaperPattern => Ok(paper_offset(n)),
            OffsetSpec::Zero => Ok(vec![0.0; n]),
            OffsetSpec::Explicit(v) if v.len() == n => Ok(v.clone()),
            OffsetSpec::Explicit(v) => Err(GlenError::Dimension(format!(
                "explicit offset has {} entries for {n} nodes",
                v.len()
            ))),
        }
    }
}

fn default_offset() -> OffsetSpec {
    OffsetSpec::PaperPattern
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub graph_spec: GraphModelSpec,
    pub family: ExponentialFamily,
    pub n_signals: usize,
    #[serde(default = "default_offset")]
    pub offset: OffsetSpec,
    pub seed: u64,
    #[serde(default)]
    pub graph_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub l0: LaplacianMatrix,
    pub y: DMatrix<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalDataset {
    pub x: DMatrix<f64>,
    pub ground_truth: Option<GroundTruth>,
}

/// Full synthetic pipeline: graph, trace normalization, smooth latent
/// signals, offsets and noisy observations.
pub fn generate_dataset(spec: &SyntheticDatasetSpec) -> Result<SignalDataset> {
    if spec.n_signals == 0 {
        return Err(GlenError::Config("n_signals must be at least 1".into()));
    }
    let key = |p| RngStream::new(spec.seed, spec.graph_index, p);
    let mut graph_rng = key(Purpose::Topology).rng(0);
    let graph = sample_random_graph(&spec.graph_spec, &mut graph_rng)?;
    let l0 = normalize_trace(&build_laplacian(&graph))?;
    let filter = sqrt_pinv_filter(&l0)?;
    let y = sample_smooth(&filter, spec.n_signals, &key(Purpose::Smooth));
    let mu = spec.offset.resolve(l0.n_nodes())?;
    let x = sample_observations(spec.family, &y, &mu, &key(Purpose::Noise))?;
    Ok(SignalDataset { x, ground_truth: Some(GroundTruth { l0, y, mu }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GraphModel;
    use crate::graph::{path_laplacian, quadratic_form, ring_laplacian};
    use nalgebra::dmatrix;

    fn random_connected(seed: u64, n: usize) -> LaplacianMatrix {
        let spec = GraphModelSpec::new(GraphModel::ErdosRenyi { p: 0.4 }, n);
        let mut rng = RngStream::new(seed, 0, Purpose::Topology).rng(0);
        normalize_trace(&build_laplacian(&sample_random_graph(&spec, &mut rng).unwrap())).unwrap()
    }

    fn eigen_pinv(l: &LaplacianMatrix) -> DMatrix<f64> {
        // independent route: reciprocal eigenvalues with a crude cutoff
        let eig = SymmetricEigen::new(l.matrix().clone());
        let n = l.n_nodes();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let v = eig.eigenvalues[k];
            if v > 1e-9 {
                let u = eig.eigenvectors.column(k);
                out += (&u * u.transpose()) / v;
            }
        }
        out
    }

    #[test]
    fn two_node_filter() {
        let l = LaplacianMatrix::new(dmatrix![1.0, -1.0; -1.0, 1.0]).unwrap();
        let f = sqrt_pinv_filter(&l).unwrap();
        // eigenvalue 2 with eigenvector (1,-1)/√2 → F = (1/√2)·(1/2)[[1,-1],[-1,1]]
        let c = 0.5 / 2f64.sqrt();
        let expected = dmatrix![c, -c; -c, c];
        assert!((f.matrix() - expected).amax() < 1e-14);
        assert_eq!(f.filter_diag[0], 0.0);
    }

    #[test]
    fn filter_kills_constants_and_squares_to_pinv() {
        for seed in 0..5 {
            let l = random_connected(seed, 12);
            let f = sqrt_pinv_filter(&l).unwrap();
            let ones = DVector::from_element(12, 1.0);
            assert!(f.apply(&ones).amax() < 1e-8);
            let sq = f.matrix() * f.matrix();
            assert!((sq - eigen_pinv(&l)).amax() < 1e-8);
            let ut_u = f.eigenvectors.transpose() * &f.eigenvectors;
            assert!((ut_u - DMatrix::identity(12, 12)).amax() < 1e-8);
        }
    }

    #[test]
    fn rejects_nonsymmetric() {
        let bad = LaplacianMatrix::from_matrix_unchecked(dmatrix![1.0, -1.0; -0.5, 0.5]);
        assert!(matches!(sqrt_pinv_filter(&bad), Err(GlenError::Eigen(_))));
    }

    #[test]
    fn smooth_columns_are_centered() {
        let l = random_connected(3, 10);
        let f = sqrt_pinv_filter(&l).unwrap();
        let y = sample_smooth(&f, 50, &RngStream::new(1, 0, Purpose::Smooth));
        for j in 0..50 {
            assert!(y.column(j).sum().abs() < 1e-8);
        }
    }

    #[test]
    fn smooth_covariance_and_energy() {
        let n = 8;
        let l = random_connected(4, n);
        let f = sqrt_pinv_filter(&l).unwrap();
        let m = 100_000;
        let y = sample_smooth(&f, m, &RngStream::new(5, 0, Purpose::Smooth));
        let cov = &y * y.transpose() / m as f64;
        let pinv = eigen_pinv(&l);
        for i in 0..n {
            for k in 0..n {
                // Var(y_i y_k) = Σ_ii Σ_kk + Σ_ik² for Gaussian vectors
                let se = ((pinv[(i, i)] * pinv[(k, k)] + pinv[(i, k)].powi(2)) / m as f64).sqrt();
                assert!((cov[(i, k)] - pinv[(i, k)]).abs() <= 5.0 * se);
            }
        }
        let energy = quadratic_form(&l, &y).unwrap() / m as f64;
        // yᵀLy is χ² with N-1 degrees of freedom
        let se = (2.0 * (n as f64 - 1.0) / m as f64).sqrt();
        assert!((energy - (n as f64 - 1.0)).abs() < 5.0 * se);
    }

    #[test]
    fn smooth_beats_white_noise() {
        let n = 10;
        let l = random_connected(6, n);
        let f = sqrt_pinv_filter(&l).unwrap();
        let m = 500;
        let y = sample_smooth(&f, m, &RngStream::new(8, 0, Purpose::Smooth));
        let mut rng = RngStream::new(8, 0, Purpose::Custom).rng(0);
        let white = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
        // Rayleigh quotients: smooth draws put their power on low frequencies
        let qs = quadratic_form(&l, &y).unwrap() / y.norm_squared();
        let qw = quadratic_form(&l, &white).unwrap() / white.norm_squared();
        // expected ratio (N−1)/Tr(L†) for smooth draws and Tr(L)/N = 1 for white ones
        let expected = (n as f64 - 1.0) / laplacian_pinv(&l).unwrap().trace();
        assert!((qs - expected).abs() < 0.1 * expected, "{qs} vs {expected}");
        assert!(qs < 0.8 * qw, "{qs} vs {qw}");
    }

    #[test]
    fn offsets() {
        assert_eq!(paper_offset(4), vec![2.0, 2.0, -2.0, -2.0]);
        assert_eq!(paper_offset(5), vec![2.0, 2.0, -2.0, -2.0, -2.0]);
        assert_eq!(paper_offset(1), vec![-2.0]);
        assert!(OffsetSpec::Explicit(vec![1.0]).resolve(2).is_err());
    }

    #[test]
    fn observation_moments() {
        let (n, m) = (3, 100_000);
        let mu = vec![4f64.ln(); n];
        let stream = RngStream::new(3, 0, Purpose::Noise);
        let x = sample_observations(ExponentialFamily::Poisson, &DMatrix::zeros(n, m), &mu, &stream).unwrap();
        for i in 0..n {
            assert!((x.row(i).sum() / m as f64 - 4.0).abs() < 0.03);
        }
        let xb = sample_observations(ExponentialFamily::Bernoulli, &DMatrix::zeros(1, 20_000), &[0.0], &stream)
            .unwrap();
        assert!(xb.iter().all(|v| *v == 0.0 || *v == 1.0));
        assert!((xb.mean() - 0.5).abs() < 4.0 * (0.25f64 / 20_000.0).sqrt());
        let y = DMatrix::from_fn(2, 50_000, |i, j| ((i + j) as f64 * 0.37).sin());
        let mu = [0.5, -1.0];
        let xg = sample_observations(ExponentialFamily::Gaussian, &y, &mu, &stream).unwrap();
        let resid = DMatrix::from_fn(2, 50_000, |i, j| xg[(i, j)] - y[(i, j)] - mu[i]);
        let cnt = resid.len() as f64;
        let mean = resid.mean();
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (cnt - 1.0);
        assert!(mean.abs() < 4.0 / cnt.sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / cnt).sqrt());
    }

    #[test]
    fn timevertex_sample() {
        let lg = random_connected(2, 4);
        let lt = path_laplacian(5).unwrap();
        let stream = RngStream::new(1, 0, Purpose::TimeVertex);
        let y = sample_timevertex_smooth(&lg, &lt, 0.7, &stream).unwrap();
        assert_eq!(y.shape(), (4, 5));
        // the product graph is connected, so its null space is the constant vector
        assert!(y.sum().abs() < 1e-8);
        assert!(sample_timevertex_smooth(&lg, &lt, 0.0, &stream).is_err());
    }

    #[test]
    fn timevertex_covariance() {
        let lg = LaplacianMatrix::new(dmatrix![1.0, -1.0; -1.0, 1.0]).unwrap();
        let lt = ring_laplacian(3).unwrap();
        let gamma = 0.5;
        let scaled = LaplacianMatrix::from_matrix_unchecked(lt.matrix() * gamma);
        let pinv = eigen_pinv(&cartesian_product_laplacian(&lg, &scaled));
        let reps = 40_000;
        let mut cov = DMatrix::zeros(6, 6);
        for r in 0..reps {
            let stream = RngStream::new(r, 0, Purpose::TimeVertex);
            let y = sample_timevertex_smooth(&lg, &lt, gamma, &stream).unwrap();
            let v = DVector::from_column_slice(y.as_slice());
            cov += &v * v.transpose();
        }
        cov /= reps as f64;
        for i in 0..6 {
            for k in 0..6 {
                let se = ((pinv[(i, i)] * pinv[(k, k)] + pinv[(i, k)].powi(2)) / reps as f64).sqrt();
                assert!((cov[(i, k)] - pinv[(i, k)]).abs() < 5.0 * se);
            }
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let spec = SyntheticDatasetSpec {
            graph_spec: GraphModelSpec::new(GraphModel::ErdosRenyi { p: 0.3 }, 10),
            family: ExponentialFamily::Poisson,
            n_signals: 40,
            offset: OffsetSpec::PaperPattern,
            seed: 17,
            graph_index: 2,
        };
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a, b);
        let gt = a.ground_truth.unwrap();
        assert!((gt.l0.trace() - 10.0).abs() < 1e-9);
        assert!(a.x.iter().all(|v| ExponentialFamily::Poisson.in_support(*v)));
    }
}
