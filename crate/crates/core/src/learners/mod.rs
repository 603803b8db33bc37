//! Base-learner library stacked by the Super Learner.
//!
//! Every learner is described declaratively by a [`LearnerSpec`] and fitted
//! with [`fit_learner`]. Fitting optionally runs correlation screening first
//! ([`screen_correlation`]); the columns that survive are recorded in the
//! [`FittedLearner`] and are the only ones [`predict`] needs.

mod boost;
mod frame;
mod linalg;
mod mars;
mod screen;
mod spline;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;

pub use boost::{BoostModel, BoostParams};
pub use frame::Frame;
pub use mars::{MarsModel, MarsParams};
pub use screen::{screen_correlation, ScreenSpec};
pub use spline::{SplineModel, SplineParams};
pub use tree::{Node, Tree, TreeParams};

/// Probability clip for binary-task learners so log-loss stays finite.
pub const PROB_CLIP: f64 = 1e-6;

/// What a learner predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Regression of a response bounded to `[0, 1]`; predictions are clipped
    /// to that interval.
    #[serde(alias = "regression_on_unit_interval")]
    Regression,
    /// Probability of a binary response; predictions lie in `[0, 1]`.
    BinaryProbability,
    /// Unbounded regression, no clipping. Used outside the TMLE nuisance fits.
    Continuous,
}

impl Task {
    fn check_response(self, y: &[f64]) -> Result<()> {
        let ok = match self {
            Task::Regression => y.iter().all(|v| (0.0..=1.0).contains(v)),
            Task::BinaryProbability => y.iter().all(|&v| v == 0.0 || v == 1.0),
            Task::Continuous => y.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Data(format!("response outside the range of task {self:?}")))
        }
    }

    /// Clip a raw prediction into the task range.
    pub fn clip(self, v: f64) -> f64 {
        match self {
            Task::Regression => v.clamp(0.0, 1.0),
            Task::BinaryProbability => v.clamp(0.0, 1.0),
            Task::Continuous => v,
        }
    }
}

/// Algorithm family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    EmpiricalMean,
    AdditiveSplineRegression(SplineParams),
    RecursivePartitioningTree(TreeParams),
    GradientBoostedTrees(BoostParams),
    MultivariateAdaptiveRegressionSplines(MarsParams),
}

impl Algorithm {
    pub fn short_name(&self) -> &'static str {
        match self {
            Algorithm::EmpiricalMean => "mean",
            Algorithm::AdditiveSplineRegression(_) => "gam",
            Algorithm::RecursivePartitioningTree(_) => "rpart",
            Algorithm::GradientBoostedTrees(_) => "xgboost",
            Algorithm::MultivariateAdaptiveRegressionSplines(_) => "earth",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Algorithm::EmpiricalMean => Ok(()),
            Algorithm::AdditiveSplineRegression(p) => p.validate(),
            Algorithm::RecursivePartitioningTree(p) => p.validate(),
            Algorithm::GradientBoostedTrees(p) => p.validate(),
            Algorithm::MultivariateAdaptiveRegressionSplines(p) => p.validate(),
        }
    }
}

/// Declarative learner configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub algorithm: Algorithm,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenSpec>,
}

impl LearnerSpec {
    pub fn new(algorithm: Algorithm, task: Task) -> Self {
        LearnerSpec { algorithm, task, screen: None }
    }

    pub fn screened(mut self, screen: ScreenSpec) -> Self {
        self.screen = Some(screen);
        self
    }

    /// Human-readable label such as `xgboost_screen.corP`.
    pub fn label(&self) -> String {
        match self.screen {
            Some(_) => format!("{}_screen.cor", self.algorithm.short_name()),
            None => self.algorithm.short_name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if let Some(s) = &self.screen {
            s.validate()?;
        }
        Ok(())
    }

    /// The default five-member library, each paired with correlation screening.
    pub fn default_library(task: Task) -> Vec<LearnerSpec> {
        let screen = ScreenSpec::default();
        [
            Algorithm::EmpiricalMean,
            Algorithm::AdditiveSplineRegression(SplineParams::default()),
            Algorithm::RecursivePartitioningTree(TreeParams::default()),
            Algorithm::GradientBoostedTrees(BoostParams::default()),
            Algorithm::MultivariateAdaptiveRegressionSplines(MarsParams::default()),
        ]
        .into_iter()
        .map(|a| LearnerSpec::new(a, task).screened(screen.clone()))
        .collect()
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Constant(f64),
    Spline(SplineModel),
    Tree(Tree),
    Boost(BoostModel),
    Mars(MarsModel),
}

/// A fitted, immutable learner.
#[derive(Debug, Clone)]
pub struct FittedLearner {
    pub spec: LearnerSpec,
    /// Columns kept after screening, in training order.
    pub retained_columns: Vec<String>,
    /// Columns of the training design before screening.
    pub training_columns: Vec<String>,
    pub n_train: usize,
    pub model: FittedModel,
}

/// Fit `spec` on `(x, y)`. Screening, when configured, runs first and only on
/// this training data.
pub fn fit_learner(spec: &LearnerSpec, x: &Frame, y: &[f64]) -> Result<FittedLearner> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} rows in X but {} responses", x.nrows(), y.len())));
    }
    if y.len() < 2 {
        return Err(Error::Data("at least two observations are required to fit a learner".into()));
    }
    spec.task.check_response(y)?;

    let design = match &spec.screen {
        Some(s) if x.ncols() > 0 => {
            let mask = screen_correlation(x, y, s.alpha, s.min_keep)?;
            x.select_mask(&mask)
        }
        _ => x.clone(),
    };

    let label = spec.label();
    let wrap = |e: Error| match e {
        Error::Learner { .. } => e,
        other => Error::Learner { learner: label.clone(), detail: other.to_string() },
    };

    let model = match &spec.algorithm {
        Algorithm::EmpiricalMean => FittedModel::Constant(mean(y)),
        Algorithm::AdditiveSplineRegression(p) => {
            FittedModel::Spline(spline::fit(p, &design, y, spec.task).map_err(wrap)?)
        }
        Algorithm::RecursivePartitioningTree(p) => {
            FittedModel::Tree(tree::fit_cart(p, &design, y, spec.task).map_err(wrap)?)
        }
        Algorithm::GradientBoostedTrees(p) => {
            FittedModel::Boost(boost::fit(p, &design, y, spec.task).map_err(wrap)?)
        }
        Algorithm::MultivariateAdaptiveRegressionSplines(p) => {
            FittedModel::Mars(mars::fit(p, &design, y, spec.task).map_err(wrap)?)
        }
    };

    Ok(FittedLearner {
        spec: spec.clone(),
        retained_columns: design.names().to_vec(),
        training_columns: x.names().to_vec(),
        n_train: y.len(),
        model,
    })
}

/// Predict for every row of `x_new`, which must contain all retained columns.
pub fn predict(fitted: &FittedLearner, x_new: &Frame) -> Result<Vec<f64>> {
    let design = x_new.select(&fitted.retained_columns)?;
    let raw: Vec<f64> = match &fitted.model {
        FittedModel::Constant(c) => vec![*c; design.nrows()],
        FittedModel::Spline(m) => m.predict(&design),
        FittedModel::Tree(t) => t.predict(&design),
        FittedModel::Boost(m) => m.predict(&design),
        FittedModel::Mars(m) => m.predict(&design),
    };
    let task = fitted.spec.task;
    let out: Vec<f64> = raw.into_iter().map(|v| task.clip(v)).collect();
    if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Learner {
            learner: fitted.spec.label(),
            detail: format!("non-finite prediction at row {bad}"),
        });
    }
    Ok(out)
}

impl FittedLearner {
    pub fn predict(&self, x_new: &Frame) -> Result<Vec<f64>> {
        predict(self, x_new)
    }
}

pub(crate) fn clip_probability(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(cols: &[(&str, Vec<f64>)]) -> Frame {
        Frame::from_columns(cols.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()).unwrap()
    }

    #[test]
    fn empirical_mean_is_constant_mean() {
        let x = frame(&[("a", vec![5.0, -1.0, 7.0])]);
        let spec = LearnerSpec::new(Algorithm::EmpiricalMean, Task::Continuous);
        let fit = fit_learner(&spec, &x, &[1.0, 2.0, 3.0]).unwrap();
        let newx = frame(&[("a", vec![100.0, 0.0, -3.0, 2.0])]);
        assert_eq!(predict(&fit, &newx).unwrap(), vec![2.0; 4]);
    }

    #[test]
    fn predict_rejects_missing_retained_column() {
        let x = frame(&[("a", vec![0.0, 1.0, 2.0, 3.0]), ("b", vec![1.0, 0.0, 1.0, 0.0])]);
        let spec = LearnerSpec::new(Algorithm::RecursivePartitioningTree(TreeParams::default()), Task::Continuous);
        let fit = fit_learner(&spec, &x, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let newx = frame(&[("a", vec![1.0])]);
        assert!(matches!(predict(&fit, &newx), Err(Error::Dimension(_))));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = frame(&[("a", vec![0.0, 1.0, 2.0])]);
        let spec = LearnerSpec::new(Algorithm::EmpiricalMean, Task::Continuous);
        assert!(matches!(fit_learner(&spec, &x, &[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn regression_task_rejects_out_of_range_response() {
        let x = frame(&[("a", vec![0.0, 1.0])]);
        let spec = LearnerSpec::new(Algorithm::EmpiricalMean, Task::Regression);
        assert!(fit_learner(&spec, &x, &[0.5, 1.5]).is_err());
        let spec = LearnerSpec::new(Algorithm::EmpiricalMean, Task::BinaryProbability);
        assert!(fit_learner(&spec, &x, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let lib = LearnerSpec::default_library(Task::BinaryProbability);
        #[derive(Serialize, Deserialize)]
        struct Wrapper {
            library: Vec<LearnerSpec>,
        }
        let text = toml::to_string(&Wrapper { library: lib.clone() }).unwrap();
        let back: Wrapper = toml::from_str(&text).unwrap();
        assert_eq!(back.library, lib);
        let partial: LearnerSpec = toml::from_str(
            "task = \"regression\"\nalgorithm = { name = \"gradient_boosted_trees\", rounds = 10 }\n",
        )
        .unwrap();
        match partial.algorithm {
            Algorithm::GradientBoostedTrees(p) => {
                assert_eq!(p.rounds, 10);
                assert_eq!(p.max_depth, 3);
            }
            _ => panic!("wrong algorithm"),
        }
    }
}
