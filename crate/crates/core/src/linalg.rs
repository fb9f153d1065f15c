//! Small dense kernels on flat `n×n` buffers, used in the inner loops where
//! allocation-free code matters.

/// In-place Cholesky factorization `A = G Gᵀ` of a symmetric matrix stored
/// row-major; the lower triangle of `a` is overwritten with `G`. Returns
/// `false` if the matrix is not numerically positive definite.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let g = a[j * n + k];
            d -= g * g;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// `log det A` from its Cholesky factor.
pub fn chol_log_det(g: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| g[i * n + i].ln()).sum::<f64>()
}

/// Solves `A x = b` in place given the Cholesky factor of `A`.
pub fn chol_solve(g: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= g[i * n + k] * b[k];
        }
        b[i] = s / g[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= g[k * n + i] * b[k];
        }
        b[i] = s / g[i * n + i];
    }
}

/// Full inverse from a Cholesky factor, written to `out` (row-major, symmetric).
pub fn chol_inverse(g: &[f64], n: usize, out: &mut [f64], work: &mut [f64]) {
    for c in 0..n {
        work[..n].fill(0.0);
        work[c] = 1.0;
        chol_solve(g, n, &mut work[..n]);
        for r in 0..n {
            out[r * n + c] = work[r];
        }
    }
}
