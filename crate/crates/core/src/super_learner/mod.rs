//! Cross-validated stacking of a learner library.
//!
//! [`sl_fit`] computes out-of-fold predictions `Z` for every library member,
//! chooses simplex weights minimising the cross-validated loss of `Z w`, and
//! refits each surviving member on the full data. A learner that fails on any
//! training fold, or on the full data, is dropped and the removal recorded.

mod folds;
mod meta;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_learner, Frame, FittedLearner, LearnerSpec, Task};

pub use folds::{make_folds, FoldAssignment};
pub use meta::{meta_objective, meta_weights, pointwise_loss, Loss, MetaWeights};

/// Configuration of one Super Learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearnerConfig {
    pub library: Vec<LearnerSpec>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub loss: Loss,
}

fn default_folds() -> usize {
    10
}

impl SuperLearnerConfig {
    /// The default five-learner library with 10 folds; log-loss for
    /// probabilities and squared error otherwise.
    pub fn default_for(task: Task) -> Self {
        let loss = if task == Task::BinaryProbability { Loss::LogLoss } else { Loss::SquaredError };
        SuperLearnerConfig { library: LearnerSpec::default_library(task), folds: 10, loss }
    }

    pub fn with_library(library: Vec<LearnerSpec>, loss: Loss) -> Self {
        SuperLearnerConfig { library, folds: 10, loss }
    }

    pub fn validate(&self) -> Result<()> {
        if self.library.is_empty() {
            return Err(Error::Config("Super Learner library is empty".into()));
        }
        let task = self.library[0].task;
        if self.library.iter().any(|s| s.task != task) {
            return Err(Error::Config("all library members must share one task".into()));
        }
        for s in &self.library {
            s.validate()?;
        }
        if self.folds < 2 {
            return Err(Error::Config("Super Learner needs at least 2 folds".into()));
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.library[0].task
    }
}

/// A library member removed from the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLearner {
    pub index: usize,
    pub label: String,
    pub reason: String,
}

/// Out-of-fold predictions, one column per surviving learner.
#[derive(Debug, Clone)]
pub struct CvPredictions {
    /// Indices into the library of the columns of `z`.
    pub kept: Vec<usize>,
    pub z: Vec<Vec<f64>>,
    pub dropped: Vec<DroppedLearner>,
}

/// Compute `Z[i, l]` from a fit of learner `l` that excluded the fold of `i`.
///
/// Fold-by-learner fits run in parallel; results are written by position, so
/// `Z` does not depend on scheduling.
pub fn cv_predictions(library: &[LearnerSpec], x: &Frame, y: &[f64], folds: &FoldAssignment) -> Result<CvPredictions> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if x.nrows() != y.len() || folds.n() != y.len() {
        return Err(Error::Dimension("X, y and fold assignment disagree on n".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..library.len()).flat_map(|l| (0..folds.k).map(move |f| (l, f))).collect();
    let results: Vec<Result<(Vec<usize>, Vec<f64>)>> = tasks
        .par_iter()
        .map(|&(l, f)| {
            let train = folds.training_rows(f);
            let test = folds.fold_members(f);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fitted = fit_learner(&library[l], &x.rows(&train), &y_train)?;
            let pred = fitted.predict(&x.rows(&test))?;
            Ok((test, pred))
        })
        .collect();

    let mut out = CvPredictions { kept: Vec::new(), z: Vec::new(), dropped: Vec::new() };
    for (l, chunk) in results.chunks(folds.k).enumerate() {
        let mut column = vec![f64::NAN; y.len()];
        let mut failure = None;
        for (f, r) in chunk.iter().enumerate() {
            match r {
                Ok((rows, pred)) => {
                    for (&i, &p) in rows.iter().zip(pred) {
                        column[i] = p;
                    }
                }
                Err(e) => {
                    failure = Some(format!("fold {f}: {e}"));
                    break;
                }
            }
        }
        match failure {
            Some(reason) => {
                log::warn!("dropping learner {} ({}): {reason}", l, library[l].label());
                out.dropped.push(DroppedLearner { index: l, label: library[l].label(), reason });
            }
            None => {
                out.kept.push(l);
                out.z.push(column);
            }
        }
    }
    Ok(out)
}

/// Cross-validated risk of each learner and of the weighted combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRisk {
    pub learners: Vec<f64>,
    pub combined: f64,
}

#[derive(Debug, Clone)]
pub struct SuperLearnerFit {
    pub library: Vec<LearnerSpec>,
    pub folds: FoldAssignment,
    /// Library indices of the ensemble members, aligned with `z`, `weights`
    /// and `refit`.
    pub kept: Vec<usize>,
    /// Out-of-fold predictions by column.
    pub z: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub cv_risk: CvRisk,
    pub refit: Vec<FittedLearner>,
    pub dropped: Vec<DroppedLearner>,
    pub loss: Loss,
    pub warnings: Vec<String>,
}

impl SuperLearnerFit {
    pub fn task(&self) -> Task {
        self.library[0].task
    }

    /// Member labels paired with their weights.
    pub fn weight_table(&self) -> Vec<(String, f64)> {
        self.kept.iter().zip(&self.weights).map(|(&l, &w)| (self.library[l].label(), w)).collect()
    }
}

/// Fit a Super Learner. `strata`, when given, stratifies the fold assignment.
pub fn sl_fit(config: &SuperLearnerConfig, x: &Frame, y: &[f64], strata: Option<&[u8]>, seed: u64) -> Result<SuperLearnerFit> {
    config.validate()?;
    let folds = make_folds(y.len(), config.folds, strata, seed)?;
    let mut warnings = folds.warnings.clone();
    let cv = cv_predictions(&config.library, x, y, &folds)?;
    let mut dropped = cv.dropped;

    let refits: Vec<Result<FittedLearner>> =
        cv.kept.par_iter().map(|&l| fit_learner(&config.library[l], x, y)).collect();
    let mut kept = Vec::new();
    let mut z = Vec::new();
    let mut refit = Vec::new();
    for ((l, column), r) in cv.kept.into_iter().zip(cv.z).zip(refits) {
        match r {
            Ok(f) => {
                kept.push(l);
                z.push(column);
                refit.push(f);
            }
            Err(e) => {
                log::warn!("dropping learner {} on full-data refit: {e}", config.library[l].label());
                dropped.push(DroppedLearner { index: l, label: config.library[l].label(), reason: format!("refit: {e}") });
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    for d in &dropped {
        warnings.push(format!("dropped {}: {}", d.label, d.reason));
    }

    let meta = meta_weights(&z, y, config.loss);
    warnings.extend(meta.warnings);
    let learners: Vec<f64> = z
        .iter()
        .map(|col| col.iter().zip(y).map(|(&p, &v)| pointwise_loss(config.loss, v, p)).sum::<f64>() / y.len() as f64)
        .collect();
    let cv_risk = CvRisk { learners, combined: meta.objective };

    Ok(SuperLearnerFit {
        library: config.library.clone(),
        folds,
        kept,
        z,
        weights: meta.weights,
        cv_risk,
        refit,
        dropped,
        loss: config.loss,
        warnings,
    })
}

/// `sum_l w_l * predict(refit_l, x_new)`, clipped to the task range.
pub fn sl_predict(fit: &SuperLearnerFit, x_new: &Frame) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x_new.nrows()];
    for (learner, &w) in fit.refit.iter().zip(&fit.weights) {
        if w == 0.0 {
            continue;
        }
        let p = learner.predict(x_new)?;
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    let task = fit.task();
    Ok(out.into_iter().map(|v| task.clip(v)).collect())
}
