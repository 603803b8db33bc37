//! Additive cubic regression splines.
//!
//! Each retained column contributes an unpenalised linear term plus a clamped
//! cubic B-spline basis with interior knots at training quantiles. The B-spline
//! coefficients carry a tiny ridge penalty, which resolves the collinearity
//! between the basis, the intercept and the linear term without shrinking any
//! fit that the linear part already explains.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::linalg::{mat_vec, penalized_least_squares};
use super::{clip_probability, Frame, Task};
use crate::error::{Error, Result};
use crate::stats::{expit, mean, quantile_sorted, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplineParams {
    pub interior_knots: usize,
    pub degree: usize,
    pub ridge: f64,
    /// IRLS iteration cap for the binary task.
    pub max_iter: usize,
    /// IRLS stops when the largest coefficient change drops below this.
    pub tol: f64,
}

impl Default for SplineParams {
    fn default() -> Self {
        SplineParams { interior_knots: 4, degree: 3, ridge: 1e-6, max_iter: 50, tol: 1e-8 }
    }
}

impl SplineParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.degree == 0 || self.degree > 5 {
            return Err(Error::Config("spline degree must be in 1..=5".into()));
        }
        if !(self.ridge >= 0.0) || self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Config("invalid spline ridge/max_iter/tol".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ColumnBasis {
    center: f64,
    scale: f64,
    lo: f64,
    hi: f64,
    /// Full clamped knot vector; empty for linear-only columns.
    knots: Vec<f64>,
}

impl ColumnBasis {
    fn n_spline(&self, degree: usize) -> usize {
        if self.knots.is_empty() {
            0
        } else {
            self.knots.len() - degree - 1
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplineModel {
    degree: usize,
    columns: Vec<ColumnBasis>,
    coef: Vec<f64>,
    logistic: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl SplineModel {
    fn design(&self, x: &Frame) -> DMatrix<f64> {
        build_design(&self.columns, self.degree, x)
    }

    pub fn predict(&self, x: &Frame) -> Vec<f64> {
        let d = self.design(x);
        let beta = nalgebra::DVector::from_vec(self.coef.clone());
        let eta = mat_vec(&d, &beta);
        if self.logistic {
            eta.into_iter().map(|e| clip_probability(expit(e))).collect()
        } else {
            eta
        }
    }
}

/// Values of all B-spline basis functions of `degree` on knot vector `t` at `x`.
pub(crate) fn bspline_basis(t: &[f64], degree: usize, x: f64) -> Vec<f64> {
    let nb = t.len() - degree - 1;
    let mut out = vec![0.0; nb];
    let x = x.clamp(t[degree], t[nb]);
    // knot span k with t[k] <= x < t[k+1]; the right end belongs to the last span
    let mut k = degree;
    while k + 1 < nb && t[k + 1] <= x {
        k += 1;
    }
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - t[k + 1 - j];
        right[j] = t[k + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for r in 0..=degree {
        out[k - degree + r] = n[r];
    }
    out
}

fn column_basis(col: &[f64], params: &SplineParams) -> ColumnBasis {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let center = mean(col);
    let sd = sample_sd(col);
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let mut distinct = sorted.clone();
    distinct.dedup();

    let knots = if distinct.len() <= 2 {
        Vec::new()
    } else {
        let m = params.interior_knots;
        let mut interior: Vec<f64> = (1..=m)
            .map(|k| quantile_sorted(&sorted, k as f64 / (m + 1) as f64))
            .filter(|&q| q > lo && q < hi)
            .collect();
        interior.dedup();
        let d = params.degree;
        let mut t = vec![lo; d + 1];
        t.extend(interior);
        t.extend(std::iter::repeat_n(hi, d + 1));
        t
    };
    ColumnBasis { center, scale, lo, hi, knots }
}

fn build_design(columns: &[ColumnBasis], degree: usize, x: &Frame) -> DMatrix<f64> {
    let p: usize = 1 + columns.iter().map(|c| 1 + c.n_spline(degree)).sum::<usize>();
    let mut d = DMatrix::<f64>::zeros(x.nrows(), p);
    for i in 0..x.nrows() {
        d[(i, 0)] = 1.0;
        let mut at = 1;
        for (j, c) in columns.iter().enumerate() {
            let v = x.get(i, j);
            d[(i, at)] = (v - c.center) / c.scale;
            at += 1;
            if !c.knots.is_empty() {
                for b in bspline_basis(&c.knots, degree, v.clamp(c.lo, c.hi)) {
                    d[(i, at)] = b;
                    at += 1;
                }
            }
        }
    }
    d
}

pub(crate) fn fit(params: &SplineParams, x: &Frame, y: &[f64], task: Task) -> Result<SplineModel> {
    let columns: Vec<ColumnBasis> = (0..x.ncols()).map(|j| column_basis(&x.column(j), params)).collect();
    let design = build_design(&columns, params.degree, x);
    let mut penalty = vec![0.0; design.ncols()];
    let mut at = 1;
    for c in &columns {
        at += 1;
        for _ in 0..c.n_spline(params.degree) {
            penalty[at] = params.ridge;
            at += 1;
        }
    }

    let mut model = SplineModel {
        degree: params.degree,
        columns,
        coef: Vec::new(),
        logistic: task == Task::BinaryProbability,
        converged: true,
        iterations: 1,
    };

    if !model.logistic {
        let beta = penalized_least_squares(&design, y, None, &penalty);
        model.coef = beta.iter().copied().collect();
        return Ok(model);
    }

    let (beta, converged, iterations) = irls(&design, y, &penalty, params.max_iter, params.tol);
    model.coef = beta;
    model.converged = converged;
    model.iterations = iterations;
    Ok(model)
}

/// Penalised logistic regression by iteratively reweighted least squares with
/// step halving on the penalised deviance. Returns the last iterate when the
/// iteration cap is reached.
pub(crate) fn irls(
    design: &DMatrix<f64>,
    y: &[f64],
    penalty: &[f64],
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, bool, usize) {
    let p = design.ncols();
    let ybar = mean(y).clamp(1e-4, 1.0 - 1e-4);
    let mut beta = nalgebra::DVector::<f64>::zeros(p);
    beta[0] = (ybar / (1.0 - ybar)).ln();

    let objective = |b: &nalgebra::DVector<f64>| -> f64 {
        let eta = design * b;
        let mut dev = 0.0;
        for (i, &e) in eta.iter().enumerate() {
            // log(1 + exp(e)) - y e, computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            dev += softplus - y[i] * e;
        }
        dev + 0.5 * b.iter().zip(penalty).map(|(v, l)| l * v * v).sum::<f64>()
    };

    let mut current = objective(&beta);
    for iter in 1..=max_iter {
        let eta = design * &beta;
        let mut w = vec![0.0; y.len()];
        let mut z = vec![0.0; y.len()];
        for i in 0..y.len() {
            let mu = expit(eta[i]);
            let wi = (mu * (1.0 - mu)).max(1e-10);
            w[i] = wi;
            z[i] = eta[i] + (y[i] - mu) / wi;
        }
        let proposal = penalized_least_squares(design, &z, Some(&w), penalty);
        let step = &proposal - &beta;
        let mut scale = 1.0;
        let mut next = &beta + &step;
        let mut value = objective(&next);
        let mut halvings = 0;
        while !(value <= current) && halvings < 30 {
            scale *= 0.5;
            next = &beta + &step * scale;
            value = objective(&next);
            halvings += 1;
        }
        if !(value <= current) {
            return (beta.iter().copied().collect(), false, iter);
        }
        let change = (&next - &beta).amax();
        beta = next;
        current = value;
        if change < tol {
            return (beta.iter().copied().collect(), true, iter);
        }
    }
    (beta.iter().copied().collect(), false, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_partition_of_unity() {
        let t = [0.0, 0.0, 0.0, 0.0, 0.3, 0.5, 0.9, 1.0, 1.0, 1.0, 1.0];
        for k in 0..=50 {
            let x = k as f64 / 50.0;
            let b = bspline_basis(&t, 3, x);
            assert_eq!(b.len(), 7);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12, "x = {x}");
            assert!(b.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn binary_column_is_linear_only() {
        let c = column_basis(&[0.0, 1.0, 1.0, 0.0], &SplineParams::default());
        assert!(c.knots.is_empty());
    }

    #[test]
    fn logistic_fit_tracks_a_smooth_probability() {
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        // deterministic "Bernoulli" draws: alternate around the true curve
        let y: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let p = expit(1.5 * x);
                let u = ((i * 7919) % 1000) as f64 / 1000.0;
                if u < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let frame = Frame::from_columns(vec![("x".into(), xs.clone())]).unwrap();
        let m = fit(&SplineParams::default(), &frame, &y, Task::BinaryProbability).unwrap();
        let p = m.predict(&frame);
        let err: f64 = xs.iter().zip(&p).map(|(&x, &q)| (expit(1.5 * x) - q).abs()).sum::<f64>() / n as f64;
        assert!(err < 0.08, "mean abs error {err}");
    }
}
