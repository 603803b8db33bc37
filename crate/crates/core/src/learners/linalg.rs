use nalgebra::{DMatrix, DVector};

/// Solve a symmetric positive (semi-)definite system. Cholesky first; when the
/// matrix is singular fall back to a minimum-norm SVD solve.
pub(crate) fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let scale = a.amax().max(1.0);
    let svd = a.svd(true, true);
    svd.solve(b, 1e-12 * scale).unwrap_or_else(|_| DVector::zeros(b.len()))
}

/// Weighted ridge-penalised least squares:
/// `argmin sum_i w_i (y_i - x_i b)^2 + sum_j penalty_j b_j^2`.
pub(crate) fn penalized_least_squares(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    penalty: &[f64],
) -> DVector<f64> {
    let (n, p) = x.shape();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        for a in 0..p {
            let xa = x[(i, a)] * w;
            if xa == 0.0 {
                continue;
            }
            xty[a] += xa * y[i];
            for b in a..p {
                xtx[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
        xtx[(a, a)] += penalty[a];
    }
    solve_symmetric(xtx, &xty)
}

pub(crate) fn mat_vec(x: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    (x * b).iter().copied().collect()
}
