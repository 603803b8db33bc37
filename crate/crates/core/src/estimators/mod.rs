//! Adjusted and unadjusted contrasts of expected outcomes between exposure arms.
//!
//! The statistical estimands are `psi_a = E[E(Y | A = a, W)]` for `a = 0, 1`,
//! their ratio and their difference. Three estimators are provided: TMLE
//! ([`tmle_estimate`]), plug-in G-computation ([`gcomp_estimate`]) and the raw
//! arm contrast ([`unadjusted_estimate`]). All report influence-curve based
//! standard errors; ratios are handled on the log scale by the delta method.

mod nuisance;
mod tmle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Frame;
use crate::stats::{mean, quantile_sorted, sample_sd, Z_95};

pub use nuisance::{fit_nuisance, NuisanceConfig, NuisanceFits, QMode};
pub use tmle::{
    fluctuate, gcomp_estimate, gcomp_from_nuisance, tmle_estimate, tmle_from_nuisance, Fluctuation, TmleFit,
    FLUCTUATION_MAX_ITER, FLUCTUATION_TOL, QBAR_CLIP,
};

/// Observed data `O = (W, A, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub w: Frame,
    pub a: Vec<u8>,
    pub y: Vec<f64>,
}

impl ObservedData {
    pub fn new(w: Frame, a: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        if w.nrows() != a.len() || a.len() != y.len() {
            return Err(Error::Dimension(format!(
                "W has {} rows, A {} entries, Y {} entries",
                w.nrows(),
                a.len(),
                y.len()
            )));
        }
        if a.iter().any(|&v| v > 1) {
            return Err(Error::Data("exposure must be 0 or 1".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite outcome at row {i}")));
        }
        let treated = a.iter().filter(|&&v| v == 1).count();
        if treated == 0 || treated == a.len() {
            return Err(Error::Positivity(format!("{treated} of {} units exposed; both arms must be non-empty", a.len())));
        }
        Ok(ObservedData { w, a, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn arm_rows(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.a[i] == arm).collect()
    }

    pub fn a_f64(&self) -> Vec<f64> {
        self.a.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Affine map of the outcome onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn bound(&self, y: f64) -> f64 {
        (y - self.lo) / (self.hi - self.lo)
    }

    pub fn unbound(&self, y_star: f64) -> f64 {
        self.lo + y_star * (self.hi - self.lo)
    }
}

/// Map `Y` onto `[0, 1]` with `lo = min(Y)`, `hi = max(Y)`.
pub fn bound_outcome(y: &[f64]) -> Result<(Vec<f64>, Bounds)> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("outcome contains non-finite values".into()));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Data("outcome has zero range and cannot be bounded".into()));
    }
    let b = Bounds { lo, hi };
    Ok((y.iter().map(|&v| b.bound(v).clamp(0.0, 1.0)).collect(), b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Tmle,
    Gcomp,
    Unadjusted,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Tmle => "tmle",
            EstimatorKind::Gcomp => "gcomp",
            EstimatorKind::Unadjusted => "unadjusted",
        }
    }
}

/// Arm means, their ratio and difference, with influence-curve inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub estimator: EstimatorKind,
    pub psi1: f64,
    pub psi0: f64,
    pub rr: f64,
    pub rd: f64,
    pub se_psi1: f64,
    pub se_psi0: f64,
    pub se_log_rr: f64,
    pub se_rd: f64,
    pub ci_psi1: (f64, f64),
    pub ci_psi0: (f64, f64),
    pub ci_rr: (f64, f64),
    pub ci_rd: (f64, f64),
    /// False when the influence curve is evaluated at an untargeted fit.
    pub robust_inference: bool,
    #[serde(skip)]
    pub ic1: Vec<f64>,
    #[serde(skip)]
    pub ic0: Vec<f64>,
}

impl EffectEstimate {
    /// Assemble an estimate from arm means and per-unit influence curves on
    /// the original outcome scale.
    pub fn from_influence(estimator: EstimatorKind, psi1: f64, psi0: f64, ic1: Vec<f64>, ic0: Vec<f64>) -> Result<Self> {
        if !(psi0 > 0.0) || !(psi1 > 0.0) {
            return Err(Error::Estimation(format!("arm means must be positive for a ratio (psi1 = {psi1}, psi0 = {psi0})")));
        }
        let n = ic1.len() as f64;
        let root_n = n.sqrt();
        let diff: Vec<f64> = ic1.iter().zip(&ic0).map(|(a, b)| a - b).collect();
        let ic_log_rr: Vec<f64> = ic1.iter().zip(&ic0).map(|(a, b)| a / psi1 - b / psi0).collect();
        let se_psi1 = sample_sd(&ic1) / root_n;
        let se_psi0 = sample_sd(&ic0) / root_n;
        let se_rd = sample_sd(&diff) / root_n;
        let se_log_rr = sample_sd(&ic_log_rr) / root_n;
        let rr = psi1 / psi0;
        let rd = psi1 - psi0;
        let wald = |est: f64, se: f64| (est - Z_95 * se, est + Z_95 * se);
        let (lo, hi) = wald(rr.ln(), se_log_rr);
        Ok(EffectEstimate {
            estimator,
            psi1,
            psi0,
            rr,
            rd,
            se_psi1,
            se_psi0,
            se_log_rr,
            se_rd,
            ci_psi1: wald(psi1, se_psi1),
            ci_psi0: wald(psi0, se_psi0),
            ci_rr: (lo.exp().min(rr), hi.exp().max(rr)),
            ci_rd: wald(rd, se_rd),
            robust_inference: estimator != EstimatorKind::Gcomp,
            ic1,
            ic0,
        })
    }
}

/// Contrast of raw arm means. The influence curve is the one implied by
/// `g1 = P(A = 1)` constant and arm-mean outcome regressions.
pub fn unadjusted_estimate(data: &ObservedData) -> Result<EffectEstimate> {
    let n = data.n();
    let treated = data.arm_rows(1);
    let control = data.arm_rows(0);
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Positivity("unadjusted contrast needs both arms".into()));
    }
    let arm_mean = |rows: &[usize]| rows.iter().map(|&i| data.y[i]).sum::<f64>() / rows.len() as f64;
    let psi1 = arm_mean(&treated);
    let psi0 = arm_mean(&control);
    let p1 = treated.len() as f64 / n as f64;
    let mut ic1 = vec![0.0; n];
    let mut ic0 = vec![0.0; n];
    for i in 0..n {
        if data.a[i] == 1 {
            ic1[i] = (data.y[i] - psi1) / p1;
        } else {
            ic0[i] = (data.y[i] - psi0) / (1.0 - p1);
        }
    }
    EffectEstimate::from_influence(EstimatorKind::Unadjusted, psi1, psi0, ic1, ic0)
}

/// Six-number summary of estimated propensity scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn propensity_summary(g1: &[f64]) -> PropensitySummary {
    let mut s = g1.to_vec();
    s.sort_by(f64::total_cmp);
    PropensitySummary {
        min: s.first().copied().unwrap_or(f64::NAN),
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        mean: mean(&s),
        q3: quantile_sorted(&s, 0.75),
        max: s.last().copied().unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounding_maps_endpoints_and_midpoints() {
        let (s, b) = bound_outcome(&[1.0, 1.5, 2.0]).unwrap();
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
        for y in [1.0, 1.25, 1.7, 2.0] {
            assert!((b.unbound(b.bound(y)) - y).abs() < 1e-12);
        }
        assert!(bound_outcome(&[3.0, 3.0]).is_err());
    }

    #[test]
    fn identical_arms_give_null_contrast() {
        let y = vec![1.5, 2.0, 1.5, 2.0];
        let data = ObservedData::new(Frame::empty(4), vec![1, 1, 0, 0], y).unwrap();
        let e = unadjusted_estimate(&data).unwrap();
        assert_eq!(e.rr, 1.0);
        assert_eq!(e.rd, 0.0);
        assert!(e.ci_rr.0 <= 1.0 && 1.0 <= e.ci_rr.1);
        assert!(e.ci_rd.0 <= 0.0 && 0.0 <= e.ci_rd.1);
    }

    #[test]
    fn empty_arm_is_a_positivity_error() {
        assert!(matches!(
            ObservedData::new(Frame::empty(3), vec![1, 1, 1], vec![1.0, 2.0, 3.0]),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn constant_propensity_summary() {
        let s = propensity_summary(&[0.5; 7]);
        assert_eq!([s.min, s.q1, s.median, s.mean, s.q3, s.max], [0.5; 6]);
    }
}
