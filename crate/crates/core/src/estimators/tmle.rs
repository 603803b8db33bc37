//! Targeting step and the plug-in estimators built on the nuisance fits.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::nuisance::{fit_nuisance, NuisanceConfig, NuisanceFits};
use super::{EffectEstimate, EstimatorKind, ObservedData};
use crate::error::{Error, Result};
use crate::stats::{expit, logit, mean};

/// Initial outcome predictions are clipped to `[QBAR_CLIP, 1 - QBAR_CLIP]`
/// before the logit offset is formed.
pub const QBAR_CLIP: f64 = 1e-6;
pub const FLUCTUATION_MAX_ITER: usize = 100;
/// Convergence threshold on the largest mean score.
pub const FLUCTUATION_TOL: f64 = 1e-10;

/// Maximum likelihood fluctuation coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluctuation {
    pub eps0: f64,
    pub eps1: f64,
    pub iterations: usize,
    /// Largest absolute mean score at the start of each iteration.
    pub trace: Vec<f64>,
}

fn clip_q(q: f64) -> f64 {
    q.clamp(QBAR_CLIP, 1.0 - QBAR_CLIP)
}

fn quasi_loglik(y: &[f64], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&y, &e)| {
            // y log p + (1 - y) log(1 - p) with p = expit(e), written stably
            let log1pexp = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            y * e - log1pexp
        })
        .sum()
}

/// Solve for `(eps0, eps1)` in the logistic regression of `y_star` on the
/// clever covariates `H0 = (1 - A) / (1 - g1)`, `H1 = A / g1` with offset
/// `logit(QbarA)` and no intercept. Newton-Raphson with step halving.
pub fn fluctuate(nuisance: &NuisanceFits, a: &[u8], y_star: &[f64]) -> Result<Fluctuation> {
    let n = a.len();
    if nuisance.qbar_a.len() != n || nuisance.g1.len() != n || y_star.len() != n {
        return Err(Error::Dimension("fluctuation inputs disagree on n".into()));
    }
    let offset: Vec<f64> = nuisance.qbar_a.iter().map(|&q| logit(clip_q(q))).collect();
    let h: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let ai = f64::from(a[i]);
            [(1.0 - ai) / (1.0 - nuisance.g1[i]), ai / nuisance.g1[i]]
        })
        .collect();
    let linear = |eps: &Vector2<f64>| -> Vec<f64> {
        (0..n).map(|i| offset[i] + eps[0] * h[i][0] + eps[1] * h[i][1]).collect()
    };

    let mut eps = Vector2::zeros();
    let mut eta = linear(&eps);
    let mut ll = quasi_loglik(y_star, &eta);
    let mut trace = Vec::new();
    for iteration in 0..FLUCTUATION_MAX_ITER {
        let mut grad = Vector2::zeros();
        let mut info = Matrix2::zeros();
        for i in 0..n {
            let p = expit(eta[i]);
            let hv = Vector2::new(h[i][0], h[i][1]);
            grad += hv * (y_star[i] - p);
            info += hv * hv.transpose() * (p * (1.0 - p));
        }
        grad /= n as f64;
        info /= n as f64;
        let worst = grad.amax();
        trace.push(worst);
        if worst < FLUCTUATION_TOL {
            return Ok(Fluctuation { eps0: eps[0], eps1: eps[1], iterations: iteration, trace });
        }
        let mut step = match info.try_inverse() {
            Some(inv) if inv.iter().all(|v| v.is_finite()) => inv * grad,
            _ => grad,
        };
        let mut accepted = false;
        for _ in 0..60 {
            let trial = eps + step;
            let trial_eta = linear(&trial);
            let trial_ll = quasi_loglik(y_star, &trial_eta);
            if trial_ll.is_finite() && trial_ll >= ll - 1e-14 * ll.abs().max(1.0) {
                eps = trial;
                eta = trial_eta;
                ll = trial_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: trace.len(), trace })
}

/// TMLE together with the quantities needed to audit it.
#[derive(Debug, Clone)]
pub struct TmleFit {
    pub estimate: EffectEstimate,
    pub fluctuation: Fluctuation,
    /// Targeted predictions on the bounded scale.
    pub qstar0: Vec<f64>,
    pub qstar1: Vec<f64>,
    /// `mean_i H_a,i (Y*_i - Q*_{A_i}(W_i))` for `a = 0, 1` after targeting.
    pub score_means: [f64; 2],
}

/// Influence curves and arm means for outcome predictions on the bounded
/// scale, mapped back to the original scale.
fn assemble(
    kind: EstimatorKind,
    data: &ObservedData,
    nuisance: &NuisanceFits,
    q0: &[f64],
    q1: &[f64],
) -> Result<EffectEstimate> {
    let b = nuisance.bounds;
    let n = data.n();
    let q0: Vec<f64> = q0.iter().map(|&v| b.unbound(v)).collect();
    let q1: Vec<f64> = q1.iter().map(|&v| b.unbound(v)).collect();
    let psi1 = mean(&q1);
    let psi0 = mean(&q0);
    let mut ic1 = Vec::with_capacity(n);
    let mut ic0 = Vec::with_capacity(n);
    for i in 0..n {
        let g = nuisance.g1[i];
        let ai = f64::from(data.a[i]);
        let qa = if data.a[i] == 1 { q1[i] } else { q0[i] };
        let resid = data.y[i] - qa;
        ic1.push(ai / g * resid + q1[i] - psi1);
        ic0.push((1.0 - ai) / (1.0 - g) * resid + q0[i] - psi0);
    }
    EffectEstimate::from_influence(kind, psi1, psi0, ic1, ic0)
}

/// Target the initial fits and compute the TMLE.
pub fn tmle_from_nuisance(data: &ObservedData, nuisance: &NuisanceFits) -> Result<TmleFit> {
    let fl = fluctuate(nuisance, &data.a, &nuisance.y_star)?;
    let n = data.n();
    let qstar1: Vec<f64> =
        (0..n).map(|i| expit(logit(clip_q(nuisance.qbar1[i])) + fl.eps1 / nuisance.g1[i])).collect();
    let qstar0: Vec<f64> =
        (0..n).map(|i| expit(logit(clip_q(nuisance.qbar0[i])) + fl.eps0 / (1.0 - nuisance.g1[i]))).collect();
    let mut score = [0.0; 2];
    for i in 0..n {
        if data.a[i] == 1 {
            score[1] += (nuisance.y_star[i] - qstar1[i]) / nuisance.g1[i];
        } else {
            score[0] += (nuisance.y_star[i] - qstar0[i]) / (1.0 - nuisance.g1[i]);
        }
    }
    let score_means = [score[0] / n as f64, score[1] / n as f64];
    let estimate = assemble(EstimatorKind::Tmle, data, nuisance, &qstar0, &qstar1)?;
    Ok(TmleFit { estimate, fluctuation: fl, qstar0, qstar1, score_means })
}

/// Plug-in G-computation from the untargeted outcome regression. Inference
/// uses the same influence curve evaluated at the untargeted fit, which is
/// not guaranteed to be valid.
pub fn gcomp_from_nuisance(data: &ObservedData, nuisance: &NuisanceFits) -> Result<EffectEstimate> {
    assemble(EstimatorKind::Gcomp, data, nuisance, &nuisance.qbar0, &nuisance.qbar1)
}

pub fn tmle_estimate(data: &ObservedData, config: &NuisanceConfig, seed: u64) -> Result<(TmleFit, NuisanceFits)> {
    let nuisance = fit_nuisance(data, config, seed)?;
    let fit = tmle_from_nuisance(data, &nuisance)?;
    Ok((fit, nuisance))
}

/// G-computation. The exposure model is still fitted because the reported
/// standard errors use the influence curve.
pub fn gcomp_estimate(data: &ObservedData, config: &NuisanceConfig, seed: u64) -> Result<EffectEstimate> {
    let nuisance = fit_nuisance(data, config, seed)?;
    gcomp_from_nuisance(data, &nuisance)
}
