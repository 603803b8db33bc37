//! Additive multivariate adaptive regression splines.
//!
//! Forward pass: starting from the intercept, repeatedly add the reflected
//! hinge pair `max(0, x_j - t)`, `max(0, t - x_j)` that most reduces the
//! residual sum of squares. Candidate pairs are scored against an orthonormal
//! basis of the current terms so each evaluation costs `O(n * terms)`.
//! Backward pass: drop terms one at a time and keep the subset with the best
//! generalized cross-validation score. Binary tasks refit the selected basis by
//! penalised logistic regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{mat_vec, penalized_least_squares};
use super::spline::irls;
use super::{clip_probability, Frame, Task};
use crate::error::{Error, Result};
use crate::stats::expit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarsParams {
    /// Maximum number of terms in the forward pass, intercept included.
    pub max_terms: usize,
    /// GCV cost per hinge knot.
    pub penalty: f64,
    /// Forward pass stops when the R^2 gain of the best pair is below this.
    pub threshold: f64,
    pub prune: bool,
}

impl Default for MarsParams {
    fn default() -> Self {
        MarsParams { max_terms: 21, penalty: 3.0, threshold: 0.001, prune: true }
    }
}

impl MarsParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_terms < 1 || !(self.penalty >= 0.0) || !(self.threshold >= 0.0) {
            return Err(Error::Config("invalid MARS parameters".into()));
        }
        Ok(())
    }
}

/// One basis function. `sign = 1` is `max(0, x - knot)`, `-1` is `max(0, knot - x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hinge {
    pub feature: usize,
    pub knot: f64,
    pub sign: i8,
}

impl Hinge {
    fn eval(&self, x: f64) -> f64 {
        if self.sign > 0 {
            (x - self.knot).max(0.0)
        } else {
            (self.knot - x).max(0.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarsModel {
    pub terms: Vec<Hinge>,
    coef: Vec<f64>,
    logistic: bool,
}

impl MarsModel {
    fn design(&self, x: &Frame) -> DMatrix<f64> {
        design(&self.terms, x)
    }

    pub fn predict(&self, x: &Frame) -> Vec<f64> {
        let eta = mat_vec(&self.design(x), &DVector::from_vec(self.coef.clone()));
        if self.logistic {
            eta.into_iter().map(|e| clip_probability(expit(e))).collect()
        } else {
            eta
        }
    }
}

fn design(terms: &[Hinge], x: &Frame) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), terms.len() + 1, |i, k| if k == 0 { 1.0 } else { terms[k - 1].eval(x.get(i, terms[k - 1].feature)) })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual of `v` after projection onto the orthonormal columns `q`.
fn orthogonalize(v: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    // two passes of modified Gram-Schmidt for stability
    for _ in 0..2 {
        for qk in q {
            let c = dot(&r, qk);
            for (ri, qi) in r.iter_mut().zip(qk) {
                *ri -= c * qi;
            }
        }
    }
    r
}

fn least_squares_rss(terms: &[Hinge], x: &Frame, y: &[f64]) -> (Vec<f64>, f64) {
    let d = design(terms, x);
    let beta = penalized_least_squares(&d, y, None, &vec![0.0; d.ncols()]);
    let fitted = mat_vec(&d, &beta);
    let rss = fitted.iter().zip(y).map(|(f, v)| (v - f).powi(2)).sum();
    (beta.iter().copied().collect(), rss)
}

fn gcv(rss: f64, n: usize, n_terms: usize, penalty: f64) -> f64 {
    let n = n as f64;
    let c = n_terms as f64 + penalty * (n_terms as f64 - 1.0) / 2.0;
    if c >= n {
        return f64::INFINITY;
    }
    (rss / n) / (1.0 - c / n).powi(2)
}

/// Forward selection of hinge terms.
pub(crate) fn forward_pass(params: &MarsParams, x: &Frame, y: &[f64]) -> Vec<Hinge> {
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let mut terms: Vec<Hinge> = Vec::new();
    if tss <= 0.0 || params.max_terms < 3 {
        return terms;
    }
    let scale = (n as f64).sqrt();
    let mut q: Vec<Vec<f64>> = vec![vec![1.0 / scale; n]];
    let mut resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut rss = tss;
    let columns: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j)).collect();
    let knots: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mut k = c.clone();
            k.sort_by(f64::total_cmp);
            k.dedup();
            k.pop(); // the maximum gives an all-zero x - t hinge
            k
        })
        .collect();

    while terms.len() + 3 <= params.max_terms {
        // (reduction, feature, knot, orthogonal directions to add)
        let mut best: Option<(f64, usize, f64, Vec<(Hinge, Vec<f64>)>)> = None;
        for (j, col) in columns.iter().enumerate() {
            for &t in &knots[j] {
                let mut dirs: Vec<(Hinge, Vec<f64>)> = Vec::with_capacity(2);
                let mut reduction = 0.0;
                for sign in [1i8, -1] {
                    let h = Hinge { feature: j, knot: t, sign };
                    let v: Vec<f64> = col.iter().map(|&xi| h.eval(xi)).collect();
                    let norm_v = dot(&v, &v).sqrt();
                    if norm_v == 0.0 {
                        continue;
                    }
                    let mut r = orthogonalize(&v, &q);
                    if let Some((_, prev)) = dirs.first() {
                        r = orthogonalize(&r, std::slice::from_ref(prev));
                    }
                    let nr = dot(&r, &r).sqrt();
                    if nr <= 1e-10 * norm_v {
                        continue;
                    }
                    let u: Vec<f64> = r.iter().map(|v| v / nr).collect();
                    reduction += dot(&resid, &u).powi(2);
                    dirs.push((h, u));
                }
                if dirs.is_empty() {
                    continue;
                }
                if best.as_ref().is_none_or(|b| reduction > b.0) {
                    best = Some((reduction, j, t, dirs));
                }
            }
        }
        let Some((reduction, _, _, dirs)) = best else { break };
        if reduction / tss < params.threshold {
            break;
        }
        for (h, u) in dirs {
            let c = dot(&resid, &u);
            for (ri, ui) in resid.iter_mut().zip(&u) {
                *ri -= c * ui;
            }
            q.push(u);
            terms.push(h);
        }
        rss -= reduction;
        if rss / tss < 1e-3 {
            break;
        }
    }
    terms
}

/// Backward elimination by GCV.
fn prune(params: &MarsParams, terms: Vec<Hinge>, x: &Frame, y: &[f64]) -> Vec<Hinge> {
    let n = y.len();
    let (_, full_rss) = least_squares_rss(&terms, x, y);
    let mut best_subset = terms.clone();
    let mut best_gcv = gcv(full_rss, n, terms.len() + 1, params.penalty);
    let mut current = terms;
    while !current.is_empty() {
        let mut step: Option<(f64, usize)> = None;
        for k in 0..current.len() {
            let mut trial = current.clone();
            trial.remove(k);
            let (_, rss) = least_squares_rss(&trial, x, y);
            if step.is_none_or(|(b, _)| rss < b) {
                step = Some((rss, k));
            }
        }
        let (rss, k) = step.expect("non-empty term list");
        current.remove(k);
        let score = gcv(rss, n, current.len() + 1, params.penalty);
        if score < best_gcv {
            best_gcv = score;
            best_subset = current.clone();
        }
    }
    best_subset
}

pub(crate) fn fit(params: &MarsParams, x: &Frame, y: &[f64], task: Task) -> Result<MarsModel> {
    let mut terms = forward_pass(params, x, y);
    if params.prune {
        terms = prune(params, terms, x, y);
    }
    let logistic = task == Task::BinaryProbability;
    let coef = if logistic {
        let d = design(&terms, x);
        let mut penalty = vec![1e-6; d.ncols()];
        penalty[0] = 0.0;
        irls(&d, y, &penalty, 50, 1e-8).0
    } else {
        least_squares_rss(&terms, x, y).0
    };
    Ok(MarsModel { terms, coef, logistic })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_single_hinge() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 1.0 + 2.0 * (x - 4.0).max(0.0)).collect();
        let frame = Frame::from_columns(vec![("x".into(), xs)]).unwrap();
        let m = fit(&MarsParams::default(), &frame, &y, Task::Continuous).unwrap();
        let p = m.predict(&frame);
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(m.terms.iter().any(|h| h.knot == 4.0));
    }

    #[test]
    fn gcv_penalises_terms() {
        assert!(gcv(1.0, 50, 5, 3.0) > gcv(1.0, 50, 3, 3.0));
        assert!(gcv(1.0, 5, 5, 3.0).is_infinite());
    }
}
