use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, true_parameters, DgpSpec, SimTruth};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_nuisance, gcomp_from_nuisance, tmle_from_nuisance, unadjusted_estimate, EffectEstimate, EstimatorKind,
    NuisanceConfig, QMode,
};
use crate::learners::{Algorithm, LearnerSpec, SplineParams, Task};
use crate::stats::{mean, sample_sd};
use crate::super_learner::{Loss, SuperLearnerConfig};

/// Which nuisance models get the deliberately wrong library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BothCorrect,
    #[serde(rename = "Q_misspecified", alias = "q_misspecified")]
    QMisspecified,
    #[serde(rename = "g_misspecified")]
    GMisspecified,
    BothMisspecified,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::BothCorrect => "both_correct",
            Scenario::QMisspecified => "Q_misspecified",
            Scenario::GMisspecified => "g_misspecified",
            Scenario::BothMisspecified => "both_misspecified",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s {
            "both_correct" => Some(Scenario::BothCorrect),
            "Q_misspecified" | "q_misspecified" => Some(Scenario::QMisspecified),
            "g_misspecified" => Some(Scenario::GMisspecified),
            "both_misspecified" => Some(Scenario::BothMisspecified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorKind>,
    pub correct_q: SuperLearnerConfig,
    pub correct_g: SuperLearnerConfig,
    pub wrong_q: SuperLearnerConfig,
    pub wrong_g: SuperLearnerConfig,
    pub gbound: f64,
    pub q_mode: QMode,
}

impl ExperimentConfig {
    /// Additive splines as the correct library, the empirical mean as the
    /// wrong one.
    pub fn new(n: usize, replicates: usize, seed: u64, scenario: Scenario) -> Self {
        let single = |algorithm: Algorithm, task: Task, loss: Loss| {
            SuperLearnerConfig::with_library(vec![LearnerSpec::new(algorithm, task)], loss)
        };
        let spline = || Algorithm::AdditiveSplineRegression(SplineParams::default());
        ExperimentConfig {
            n,
            replicates,
            seed,
            scenario,
            estimators: vec![EstimatorKind::Tmle, EstimatorKind::Gcomp, EstimatorKind::Unadjusted],
            correct_q: single(spline(), Task::Regression, Loss::SquaredError),
            correct_g: single(spline(), Task::BinaryProbability, Loss::LogLoss),
            wrong_q: single(Algorithm::EmpiricalMean, Task::Regression, Loss::SquaredError),
            wrong_g: single(Algorithm::EmpiricalMean, Task::BinaryProbability, Loss::LogLoss),
            gbound: 0.01,
            q_mode: QMode::Stratified,
        }
    }

    pub fn nuisance_config(&self) -> NuisanceConfig {
        let (q_ok, g_ok) = match self.scenario {
            Scenario::BothCorrect => (true, true),
            Scenario::QMisspecified => (false, true),
            Scenario::GMisspecified => (true, false),
            Scenario::BothMisspecified => (false, false),
        };
        NuisanceConfig {
            q: if q_ok { self.correct_q.clone() } else { self.wrong_q.clone() },
            g: if g_ok { self.correct_g.clone() } else { self.wrong_g.clone() },
            gbound: self.gbound,
            q_mode: self.q_mode,
            stratify_g: true,
        }
    }
}

/// Seed of replicate `r`: the first output of the ChaCha stream `r` under the
/// master seed, so any replicate can be regenerated on its own.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate);
    rng.next_u64()
}

/// One estimate from one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub estimator: EstimatorKind,
    pub rd: f64,
    pub rr: f64,
    pub se_rd: f64,
    pub se_log_rr: f64,
    pub ci_rd: (f64, f64),
    pub ci_rr: (f64, f64),
}

impl From<&EffectEstimate> for ReplicateEstimate {
    fn from(e: &EffectEstimate) -> Self {
        ReplicateEstimate {
            estimator: e.estimator,
            rd: e.rd,
            rr: e.rr,
            se_rd: e.se_rd,
            se_log_rr: e.se_log_rr,
            ci_rd: e.ci_rd,
            ci_rr: e.ci_rr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub estimates: Vec<ReplicateEstimate>,
    /// Largest absolute TMLE mean score after targeting.
    pub max_abs_score: Option<f64>,
}

/// Performance of one estimator for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bias: f64,
    /// Monte Carlo standard error of `bias`.
    pub bias_mc_se: f64,
    pub empirical_sd: f64,
    /// Mean reported standard error (for ratios, on the ratio scale by the
    /// delta method).
    pub mean_se: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
}

impl Metrics {
    fn compute(estimates: &[f64], ses: &[f64], cis: &[(f64, f64)], truth: f64) -> Metrics {
        let r = estimates.len() as f64;
        let bias = mean(estimates) - truth;
        let empirical_sd = sample_sd(estimates);
        let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r).sqrt();
        let covered = cis.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
        Metrics {
            bias,
            bias_mc_se: empirical_sd / r.sqrt(),
            empirical_sd,
            mean_se: mean(ses),
            rmse,
            coverage: covered as f64 / r,
            mean_ci_width: mean(&cis.iter().map(|(lo, hi)| hi - lo).collect::<Vec<_>>()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub rd: Metrics,
    pub rr: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dgp: String,
    pub scenario: Scenario,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub truth: SimTruth,
    pub summaries: Vec<EstimatorSummary>,
    /// `(replicate, error)` for replicates where some estimator failed.
    pub failures: Vec<(usize, String)>,
    pub max_abs_score: Option<f64>,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ExperimentReport {
    pub fn summary(&self, estimator: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

fn run_replicate(dgp: &DgpSpec, config: &ExperimentConfig, nuisance: &NuisanceConfig, r: usize) -> Result<ReplicateOutcome> {
    let seed = replicate_seed(config.seed, r as u64);
    let sample = generate(dgp, config.n, seed)?;
    let data = &sample.data;
    let mut estimates = Vec::new();
    let mut max_abs_score = None;
    let needs_nuisance = config.estimators.iter().any(|e| *e != EstimatorKind::Unadjusted);
    let fits = if needs_nuisance { Some(fit_nuisance(data, nuisance, seed)?) } else { None };
    for kind in &config.estimators {
        let e = match kind {
            EstimatorKind::Tmle => {
                let t = tmle_from_nuisance(data, fits.as_ref().expect("fitted"))?;
                max_abs_score = Some(t.score_means[0].abs().max(t.score_means[1].abs()));
                t.estimate
            }
            EstimatorKind::Gcomp => gcomp_from_nuisance(data, fits.as_ref().expect("fitted"))?,
            EstimatorKind::Unadjusted => unadjusted_estimate(data)?,
        };
        estimates.push(ReplicateEstimate::from(&e));
    }
    Ok(ReplicateOutcome { replicate: r, seed, estimates, max_abs_score })
}

/// Run `replicates` independent replicates and summarise each estimator
/// against the true counterfactual contrasts. Replicates run in parallel; the
/// report does not depend on scheduling.
pub fn run_experiment(dgp: &DgpSpec, config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.replicates == 0 || config.n < 4 {
        return Err(Error::Config("an experiment needs at least one replicate and n >= 4".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::Config("no estimators requested".into()));
    }
    let truth = true_parameters(dgp)?;
    let nuisance = config.nuisance_config();
    nuisance.validate()?;
    let results: Vec<Result<ReplicateOutcome>> =
        (0..config.replicates).into_par_iter().map(|r| run_replicate(dgp, config, &nuisance, r)).collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() as f64 > 0.05 * config.replicates as f64 {
        return Err(Error::Simulation(format!(
            "{} of {} replicates failed (first: replicate {}: {})",
            failures.len(),
            config.replicates,
            failures[0].0,
            failures[0].1
        )));
    }

    let summaries = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, &estimator)| {
            let es: Vec<&ReplicateEstimate> = outcomes.iter().map(|o| &o.estimates[k]).collect();
            let rd: Vec<f64> = es.iter().map(|e| e.rd).collect();
            let rr: Vec<f64> = es.iter().map(|e| e.rr).collect();
            EstimatorSummary {
                estimator,
                rd: Metrics::compute(
                    &rd,
                    &es.iter().map(|e| e.se_rd).collect::<Vec<_>>(),
                    &es.iter().map(|e| e.ci_rd).collect::<Vec<_>>(),
                    truth.crd,
                ),
                rr: Metrics::compute(
                    &rr,
                    &es.iter().map(|e| e.rr * e.se_log_rr).collect::<Vec<_>>(),
                    &es.iter().map(|e| e.ci_rr).collect::<Vec<_>>(),
                    truth.crr,
                ),
            }
        })
        .collect();
    let max_abs_score = outcomes.iter().filter_map(|o| o.max_abs_score).reduce(f64::max);

    Ok(ExperimentReport {
        dgp: dgp.name.clone(),
        scenario: config.scenario,
        n: config.n,
        replicates: config.replicates,
        seed: config.seed,
        truth,
        summaries,
        failures,
        max_abs_score,
        outcomes,
    })
}
