use serde::{Deserialize, Serialize};

use super::{bound_outcome, Bounds, ObservedData};
use crate::error::{Error, Result};
use crate::learners::{Frame, Task};
use crate::super_learner::{sl_fit, sl_predict, SuperLearnerConfig, SuperLearnerFit};

/// How the outcome regression uses the exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMode {
    /// One Super Learner per arm, each regressing `Y*` on `W`.
    Stratified,
    /// One Super Learner regressing `Y*` on `(A, W)`.
    Pooled,
}

/// Name of the exposure column added to `W` in pooled mode.
pub const EXPOSURE_COLUMN: &str = "A";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    pub q: SuperLearnerConfig,
    pub g: SuperLearnerConfig,
    #[serde(default = "default_gbound")]
    pub gbound: f64,
    #[serde(default = "default_q_mode")]
    pub q_mode: QMode,
    /// Stratify the folds of the exposure model by `A`.
    #[serde(default = "default_true")]
    pub stratify_g: bool,
}

fn default_gbound() -> f64 {
    0.01
}

fn default_q_mode() -> QMode {
    QMode::Stratified
}

fn default_true() -> bool {
    true
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            q: SuperLearnerConfig::default_for(Task::Regression),
            g: SuperLearnerConfig::default_for(Task::BinaryProbability),
            gbound: default_gbound(),
            q_mode: QMode::Stratified,
            stratify_g: true,
        }
    }
}

impl NuisanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.q.validate()?;
        self.g.validate()?;
        if self.q.task() == Task::BinaryProbability {
            return Err(Error::Config("outcome library must use a regression task".into()));
        }
        if self.g.task() != Task::BinaryProbability {
            return Err(Error::Config("exposure library must use the binary_probability task".into()));
        }
        if !(self.gbound > 0.0 && self.gbound < 0.5) {
            return Err(Error::Config(format!("gbound must lie in (0, 0.5), got {}", self.gbound)));
        }
        Ok(())
    }
}

/// Initial estimates of the outcome regression and the propensity score.
#[derive(Debug, Clone)]
pub struct NuisanceFits {
    /// Bounded outcome used to fit `Q`.
    pub y_star: Vec<f64>,
    pub qbar0: Vec<f64>,
    pub qbar1: Vec<f64>,
    pub qbar_a: Vec<f64>,
    /// Propensity after truncation to `[gbound, 1 - gbound]`.
    pub g1: Vec<f64>,
    /// Propensity before truncation.
    pub g1_raw: Vec<f64>,
    pub bounds: Bounds,
    pub gbound: f64,
    /// True when some untruncated propensity fell outside `(0.01, 0.99)`.
    pub positivity_alarm: bool,
    /// Ensemble weights by fit: `("Q", ...)` or `("Q0", ...)`/`("Q1", ...)`, then `("g", ...)`.
    pub weights: Vec<(String, Vec<(String, f64)>)>,
    pub warnings: Vec<String>,
}

fn cv_config(config: &SuperLearnerConfig, n: usize, what: &str, warnings: &mut Vec<String>) -> Result<SuperLearnerConfig> {
    if n < 2 {
        return Err(Error::Positivity(format!("{what}: {n} observation(s) is too few to cross-validate")));
    }
    let mut c = config.clone();
    if n < c.folds {
        warnings.push(format!("{what}: {n} observations, folds reduced from {} to {n}", c.folds));
        c.folds = n;
    }
    Ok(c)
}

fn collect_warnings(label: &str, fit: &SuperLearnerFit, warnings: &mut Vec<String>) {
    warnings.extend(fit.warnings.iter().map(|w| format!("{label}: {w}")));
}

/// Fit the outcome regression and propensity score by Super Learner.
pub fn fit_nuisance(data: &ObservedData, config: &NuisanceConfig, seed: u64) -> Result<NuisanceFits> {
    config.validate()?;
    let n = data.n();
    let (y_star, bounds) = bound_outcome(&data.y)?;
    let mut warnings = Vec::new();
    let mut weights = Vec::new();

    let (qbar0, qbar1) = match config.q_mode {
        QMode::Stratified => {
            let mut arms = [Vec::new(), Vec::new()];
            for arm in [0u8, 1] {
                let rows = data.arm_rows(arm);
                let label = format!("Q{arm}");
                let cfg = cv_config(&config.q, rows.len(), &label, &mut warnings)?;
                let ys: Vec<f64> = rows.iter().map(|&i| y_star[i]).collect();
                let fit = sl_fit(&cfg, &data.w.rows(&rows), &ys, None, seed)?;
                collect_warnings(&label, &fit, &mut warnings);
                weights.push((label, fit.weight_table()));
                arms[usize::from(arm)] = sl_predict(&fit, &data.w)?;
            }
            let [q0, q1] = arms;
            (q0, q1)
        }
        QMode::Pooled => {
            let a = data.a_f64();
            let design = data.w.with_column(EXPOSURE_COLUMN, &a)?;
            let cfg = cv_config(&config.q, n, "Q", &mut warnings)?;
            let fit = sl_fit(&cfg, &design, &y_star, None, seed)?;
            collect_warnings("Q", &fit, &mut warnings);
            weights.push(("Q".to_string(), fit.weight_table()));
            let at = |v: f64| -> Result<Frame> { data.w.with_column(EXPOSURE_COLUMN, &vec![v; n]) };
            (sl_predict(&fit, &at(0.0)?)?, sl_predict(&fit, &at(1.0)?)?)
        }
    };
    let qbar_a: Vec<f64> = (0..n).map(|i| if data.a[i] == 1 { qbar1[i] } else { qbar0[i] }).collect();

    let cfg = cv_config(&config.g, n, "g", &mut warnings)?;
    let strata = config.stratify_g.then_some(data.a.as_slice());
    let gfit = sl_fit(&cfg, &data.w, &data.a_f64(), strata, seed)?;
    collect_warnings("g", &gfit, &mut warnings);
    weights.push(("g".to_string(), gfit.weight_table()));
    let g1_raw = sl_predict(&gfit, &data.w)?;

    let positivity_alarm = g1_raw.iter().any(|&g| !(g > 0.01 && g < 0.99));
    if positivity_alarm {
        let (lo, hi) = g1_raw.iter().fold((1.0f64, 0.0f64), |(lo, hi), &g| (lo.min(g), hi.max(g)));
        let msg = format!("positivity: estimated propensities span [{lo:.4}, {hi:.4}], outside (0.01, 0.99)");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let gbound = config.gbound;
    let g1 = g1_raw.iter().map(|&g| g.clamp(gbound, 1.0 - gbound)).collect();

    Ok(NuisanceFits {
        y_star,
        qbar0,
        qbar1,
        qbar_a,
        g1,
        g1_raw,
        bounds,
        gbound,
        positivity_alarm,
        weights,
        warnings,
    })
}
