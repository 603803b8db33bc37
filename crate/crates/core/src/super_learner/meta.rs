//! Convex combination weights for stacking.
//!
//! Both losses are minimised directly over the probability simplex
//! `{w >= 0, sum w = 1}`. Squared error uses an active-set method in the
//! Lawson–Hanson style, extended with the sum-to-one equality; log-loss uses
//! projected gradient descent with backtracking. Either way the returned
//! weights are compared with every vertex, so the stacked objective is never
//! worse than the best single learner.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::learners::PROB_CLIP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    LogLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaWeights {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub warnings: Vec<String>,
}

/// Mean loss of the combination `Z w` against `y`. `z` is stored by column.
pub fn meta_objective(z: &[Vec<f64>], y: &[f64], w: &[f64], loss: Loss) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut p = 0.0;
        for (col, wl) in z.iter().zip(w) {
            p += wl * col[i];
        }
        total += pointwise_loss(loss, y[i], p);
    }
    total / n as f64
}

pub fn pointwise_loss(loss: Loss, y: f64, p: f64) -> f64 {
    match loss {
        Loss::SquaredError => (y - p) * (y - p),
        Loss::LogLoss => {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}

/// Minimise the mean loss of `Z w` over the simplex.
pub fn meta_weights(z: &[Vec<f64>], y: &[f64], loss: Loss) -> MetaWeights {
    let l = z.len();
    let mut warnings = Vec::new();
    if l == 0 {
        return MetaWeights { weights: Vec::new(), objective: f64::NAN, warnings: vec!["empty library".into()] };
    }
    let vertex = |j: usize| {
        let mut w = vec![0.0; l];
        w[j] = 1.0;
        w
    };
    let vertex_objectives: Vec<f64> = (0..l).map(|j| meta_objective(z, y, &vertex(j), loss)).collect();
    let best_vertex = (0..l).fold(0, |b, j| if vertex_objectives[j] < vertex_objectives[b] { j } else { b });
    if l == 1 {
        return MetaWeights { weights: vec![1.0], objective: vertex_objectives[0], warnings };
    }

    let solved = match loss {
        Loss::SquaredError => simplex_least_squares(z, y, best_vertex),
        Loss::LogLoss => simplex_log_loss(z, y, vertex(best_vertex)),
    };
    let mut weights = match solved {
        Some(w) if w.iter().all(|v| v.is_finite()) && w.iter().sum::<f64>() > 0.0 => w,
        _ => {
            warnings.push("meta solver returned no usable weights; using uniform weights".into());
            vec![1.0 / l as f64; l]
        }
    };
    normalize(&mut weights);

    let mut objective = meta_objective(z, y, &weights, loss);
    if vertex_objectives[best_vertex] <= objective {
        weights = vertex(best_vertex);
        objective = vertex_objectives[best_vertex];
    }
    MetaWeights { weights, objective, warnings }
}

fn normalize(w: &mut [f64]) {
    for v in w.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for v in w.iter_mut() {
            *v /= s;
        }
    }
}

/// Active-set solution of `min |y - Z w|^2` subject to `w >= 0`, `sum w = 1`.
fn simplex_least_squares(z: &[Vec<f64>], y: &[f64], start: usize) -> Option<Vec<f64>> {
    let l = z.len();
    let n = y.len() as f64;
    let gram = DMatrix::from_fn(l, l, |a, b| z[a].iter().zip(&z[b]).map(|(u, v)| u * v).sum::<f64>() / n);
    let c = DVector::from_fn(l, |a, _| z[a].iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / n);
    let scale = gram.amax().max(c.amax()).max(1e-300);
    let tol = 1e-12 * scale;

    let mut w = DVector::<f64>::zeros(l);
    w[start] = 1.0;
    let mut free: Vec<usize> = vec![start];

    for _ in 0..(10 * l + 10) {
        // half-gradient of the quadratic
        let g = &gram * &w - &c;
        let level = free.iter().map(|&j| g[j]).sum::<f64>() / free.len() as f64;
        let candidate = (0..l)
            .filter(|j| !free.contains(j))
            .map(|j| (j, g[j] - level))
            .fold(None::<(usize, f64)>, |acc, (j, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((j, d)),
            });
        match candidate {
            Some((j, d)) if d < -tol => free.push(j),
            _ => return Some(w.iter().copied().collect()),
        }
        free.sort_unstable();

        loop {
            let v = equality_constrained(&gram, &c, &free)?;
            if v.iter().all(|&x| x > 0.0) {
                w.fill(0.0);
                for (k, &j) in free.iter().enumerate() {
                    w[j] = v[k];
                }
                break;
            }
            // step towards v until the first weight hits zero
            let mut alpha = 1.0f64;
            for (k, &j) in free.iter().enumerate() {
                if v[k] <= 0.0 {
                    let denom = w[j] - v[k];
                    if denom > 0.0 {
                        alpha = alpha.min(w[j] / denom);
                    }
                }
            }
            for (k, &j) in free.iter().enumerate() {
                w[j] += alpha * (v[k] - w[j]);
            }
            free.retain(|&j| w[j] > 1e-15);
            for j in 0..l {
                if !free.contains(&j) {
                    w[j] = 0.0;
                }
            }
            if free.is_empty() {
                return None;
            }
            let s: f64 = w.iter().sum();
            w /= s;
        }
    }
    Some(w.iter().copied().collect())
}

/// Minimiser of `v' G v - 2 c' v` over `sum v = 1` on the index set `free`.
fn equality_constrained(gram: &DMatrix<f64>, c: &DVector<f64>, free: &[usize]) -> Option<Vec<f64>> {
    let m = free.len();
    let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for (a, &ja) in free.iter().enumerate() {
        for (b, &jb) in free.iter().enumerate() {
            kkt[(a, b)] = gram[(ja, jb)];
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
        rhs[a] = c[ja];
    }
    rhs[m] = 1.0;
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => {
            let eps = 1e-13 * kkt.amax().max(1.0);
            kkt.svd(true, true).solve(&rhs, eps).ok()?
        }
    };
    Some(sol.iter().take(m).copied().collect())
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn simplex_log_loss(z: &[Vec<f64>], y: &[f64], start: Vec<f64>) -> Option<Vec<f64>> {
    let l = z.len();
    let n = y.len();
    let f = |w: &[f64]| meta_objective(z, y, w, Loss::LogLoss);
    let gradient = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; l];
        for i in 0..n {
            let p: f64 = z.iter().zip(w).map(|(col, wl)| wl * col[i]).sum();
            if p <= PROB_CLIP || p >= 1.0 - PROB_CLIP {
                continue;
            }
            let d = -(y[i] / p - (1.0 - y[i]) / (1.0 - p));
            for (gl, col) in g.iter_mut().zip(z) {
                *gl += d * col[i];
            }
        }
        g.iter().map(|v| v / n as f64).collect()
    };

    let mut w = start;
    let mut fw = f(&w);
    let mut step = 1.0;
    for _ in 0..10_000 {
        let g = gradient(&w);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = project_simplex(&w.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
            let diff: Vec<f64> = trial.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lin: f64 = g.iter().zip(&diff).map(|(a, b)| a * b).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            let ft = f(&trial);
            if ft <= fw + lin + quad {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        let decrease = fw - ft;
        w = trial;
        fw = ft;
        if decrease < 1e-10 {
            break;
        }
        step *= 2.0;
    }
    Some(w)
}
