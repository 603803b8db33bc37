//! Run configuration, read from TOML and overridable from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use roadmap_core::dataset::{
    default_sah_target, primary_target, DateAnchor, DatasetConfig, Endpoint, TargetMode, HORIZONS, STATES,
};
use roadmap_core::estimators::{EstimatorKind, NuisanceConfig, QMode};
use roadmap_core::learners::{
    Algorithm, BoostParams, LearnerSpec, MarsParams, ScreenSpec, SplineParams, Task, TreeParams,
};
use roadmap_core::super_learner::{Loss, SuperLearnerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    PrimarySep1,
    SecondarySah,
    Custom,
}

impl AnalysisMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "primary_sep1" => Some(AnalysisMode::PrimarySep1),
            "secondary_sah" => Some(AnalysisMode::SecondarySah),
            "custom" => Some(AnalysisMode::Custom),
            _ => None,
        }
    }
}

/// Learner families by their short names.
pub const LEARNER_NAMES: [&str; 5] = ["mean", "gam", "rpart", "xgboost", "earth"];

fn algorithm(name: &str) -> Option<Algorithm> {
    Some(match name {
        "mean" => Algorithm::EmpiricalMean,
        "gam" => Algorithm::AdditiveSplineRegression(SplineParams::default()),
        "rpart" => Algorithm::RecursivePartitioningTree(TreeParams::default()),
        "xgboost" => Algorithm::GradientBoostedTrees(BoostParams::default()),
        "earth" => Algorithm::MultivariateAdaptiveRegressionSplines(MarsParams::default()),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub min_keep: usize,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        let s = ScreenSpec::default();
        ScreeningConfig { enabled: true, alpha: s.alpha, min_keep: s.min_keep }
    }
}

/// Learner library for one nuisance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    pub learners: Vec<String>,
    pub folds: usize,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig { learners: LEARNER_NAMES.iter().map(|s| s.to_string()).collect(), folds: 10 }
    }
}

impl LibraryConfig {
    fn build(&self, task: Task, screening: &ScreeningConfig) -> CliResult<SuperLearnerConfig> {
        let screen = ScreenSpec { alpha: screening.alpha, min_keep: screening.min_keep };
        let mut library = Vec::new();
        for name in &self.learners {
            let alg = algorithm(name)
                .ok_or_else(|| CliError::config(format!("unknown learner {name:?}; expected one of {LEARNER_NAMES:?}")))?;
            let spec = LearnerSpec::new(alg, task);
            library.push(if screening.enabled { spec.screened(screen.clone()) } else { spec });
        }
        let loss = if task == Task::BinaryProbability { Loss::LogLoss } else { Loss::SquaredError };
        let mut sl = SuperLearnerConfig::with_library(library, loss);
        sl.folds = self.folds;
        Ok(sl)
    }
}

/// Configuration file contents. Every field except `seed` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: AnalysisMode,
    /// CSV with columns `state,date`; required in custom mode.
    #[serde(default)]
    pub target_dates: Option<PathBuf>,
    #[serde(default = "default_endpoints")]
    pub endpoints: Vec<Endpoint>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u32>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_gbound")]
    pub gbound: f64,
    #[serde(default = "default_q_mode")]
    pub q_mode: QMode,
    #[serde(default = "default_anchor")]
    pub anchor: DateAnchor,
    /// Lift date assumed for stay-at-home orders with no recorded end.
    #[serde(default = "primary_target")]
    pub window_end: NaiveDate,
    #[serde(default = "default_sah_target")]
    pub sah_default: NaiveDate,
    #[serde(default)]
    pub screening: ScreeningConfig,
    #[serde(default)]
    pub outcome_library: LibraryConfig,
    #[serde(default)]
    pub exposure_library: LibraryConfig,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data/snapshot")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_mode() -> AnalysisMode {
    AnalysisMode::PrimarySep1
}

fn default_endpoints() -> Vec<Endpoint> {
    vec![Endpoint::Cases, Endpoint::Deaths]
}

fn default_horizons() -> Vec<u32> {
    HORIZONS.to_vec()
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Tmle, EstimatorKind::Gcomp, EstimatorKind::Unadjusted]
}

fn default_gbound() -> f64 {
    0.01
}

fn default_q_mode() -> QMode {
    QMode::Stratified
}

fn default_anchor() -> DateAnchor {
    DateAnchor::Enacted
}

/// Values given on the command line; each replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub mode: Option<AnalysisMode>,
    pub target_dates: Option<PathBuf>,
    pub endpoints: Option<Vec<Endpoint>>,
    pub horizons: Option<Vec<u32>>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub gbound: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid configuration: {e}")))
    }

    /// Read `path` if given, apply `overrides`, and validate. The seed must
    /// come from one of the two.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        Self::load_inner(path, overrides, false)
    }

    /// Like [`RunConfig::load`] but with seed 0 when none is given, for
    /// commands that draw no random numbers.
    pub fn load_unseeded(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        Self::load_inner(path, overrides, true)
    }

    fn load_inner(path: Option<&Path>, overrides: &Overrides, seed_optional: bool) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::config(format!("invalid configuration {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed).map_err(|_| CliError::config("seed must fit in a signed 64-bit integer"))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        if seed_optional && !table.contains_key("seed") {
            table.insert("seed".into(), toml::Value::Integer(0));
        }
        if !table.contains_key("seed") {
            return Err(CliError::config("a seed is required (set `seed` in the config or pass --seed)"));
        }
        let mut config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("invalid configuration: {e}")))?;
        if let Some(base) = path.and_then(Path::parent) {
            for p in [&mut config.data_dir, &mut config.output_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if let Some(t) = config.target_dates.as_mut().filter(|t| t.is_relative()) {
                *t = base.join(&*t);
            }
        }
        let o = overrides.clone();
        if let Some(v) = o.data_dir {
            config.data_dir = v;
        }
        if let Some(v) = o.output_dir {
            config.output_dir = v;
        }
        if let Some(v) = o.mode {
            config.mode = v;
        }
        if let Some(v) = o.target_dates {
            config.target_dates = Some(v);
        }
        if let Some(v) = o.endpoints {
            config.endpoints = v;
        }
        if let Some(v) = o.horizons {
            config.horizons = v;
        }
        if let Some(v) = o.estimators {
            config.estimators = v;
        }
        if let Some(v) = o.gbound {
            config.gbound = v;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.endpoints.is_empty() {
            return Err(CliError::config("at least one endpoint is required"));
        }
        if self.horizons.is_empty() {
            return Err(CliError::config("at least one horizon is required"));
        }
        for h in &self.horizons {
            if !HORIZONS.contains(h) {
                return Err(CliError::config(format!("horizon {h} is not one of {HORIZONS:?}")));
            }
        }
        if self.estimators.is_empty() {
            return Err(CliError::config("at least one estimator is required"));
        }
        if self.mode == AnalysisMode::Custom && self.target_dates.is_none() {
            return Err(CliError::config("custom mode needs `target_dates`"));
        }
        self.nuisance()?.validate()?;
        Ok(())
    }

    pub fn nuisance(&self) -> CliResult<NuisanceConfig> {
        Ok(NuisanceConfig {
            q: self.outcome_library.build(Task::Regression, &self.screening)?,
            g: self.exposure_library.build(Task::BinaryProbability, &self.screening)?,
            gbound: self.gbound,
            q_mode: self.q_mode,
            stratify_g: true,
        })
    }

    /// Endpoints and horizons with duplicates removed, in a fixed order.
    pub fn cells(&self) -> Vec<(Endpoint, u32)> {
        let mut endpoints = self.endpoints.clone();
        endpoints.sort();
        endpoints.dedup();
        let mut horizons = self.horizons.clone();
        horizons.sort_unstable();
        horizons.dedup();
        endpoints.iter().flat_map(|&e| horizons.iter().map(move |&h| (e, h))).collect()
    }

    pub fn target_mode(&self) -> CliResult<TargetMode> {
        Ok(match self.mode {
            AnalysisMode::PrimarySep1 => TargetMode::Fixed { date: primary_target() },
            AnalysisMode::SecondarySah => TargetMode::StayAtHomeLift,
            AnalysisMode::Custom => {
                let path = self.target_dates.as_ref().ok_or_else(|| CliError::config("custom mode needs `target_dates`"))?;
                TargetMode::PerState { dates: read_target_dates(path)? }
            }
        })
    }

    pub fn dataset_config(&self, targets: &TargetMode, endpoint: Endpoint, horizon_days: u32) -> DatasetConfig {
        DatasetConfig {
            targets: targets.clone(),
            endpoint,
            horizon_days,
            anchor: self.anchor,
            sah_default: self.sah_default,
            window_end: self.window_end,
        }
    }
}

/// Read a `state,date` CSV of per-state target dates.
pub fn read_target_dates(path: &Path) -> CliResult<BTreeMap<String, NaiveDate>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read target dates {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let (Some(state), Some(date)) = (rec.get(0), rec.get(1)) else {
            return Err(CliError::config(format!("{}: expected state,date rows", path.display())));
        };
        let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d")
            .map_err(|_| CliError::config(format!("{}: bad date {date:?} for {state}", path.display())))?;
        out.insert(state.trim().to_string(), date);
    }
    let missing: Vec<&str> = STATES.iter().copied().filter(|s| !out.contains_key(*s)).collect();
    if !missing.is_empty() {
        return Err(CliError::config(format!("{}: no target date for {}", path.display(), missing.join(", "))));
    }
    Ok(out)
}
