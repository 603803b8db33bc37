//! The `simulate` subcommand: double-robustness and coverage experiments.

use std::path::{Path, PathBuf};

use roadmap_core::dataset::write_atomic;
use roadmap_core::estimators::{EstimatorKind, QMode};
use roadmap_core::simlab::{named, run_experiment, ExperimentConfig, ExperimentReport, Scenario, NAMED_DGPS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::pipeline::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    #[serde(default = "default_dgp")]
    pub dgp: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_gbound")]
    pub gbound: f64,
    #[serde(default = "default_q_mode")]
    pub q_mode: QMode,
}

fn default_dgp() -> String {
    "confounded".into()
}

fn default_n() -> usize {
    500
}

fn default_replicates() -> usize {
    200
}

fn default_scenarios() -> Vec<Scenario> {
    vec![Scenario::BothCorrect, Scenario::QMisspecified, Scenario::GMisspecified, Scenario::BothMisspecified]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("simulation_output")
}

fn default_gbound() -> f64 {
    0.01
}

fn default_q_mode() -> QMode {
    QMode::Stratified
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let c: SimulationConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("invalid simulation configuration: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        if named(&self.dgp).is_none() {
            return Err(CliError::config(format!("unknown DGP {:?}; expected one of {NAMED_DGPS:?}", self.dgp)));
        }
        if self.scenarios.is_empty() {
            return Err(CliError::config("at least one scenario is required"));
        }
        if self.n < 4 || self.replicates == 0 {
            return Err(CliError::config("need n >= 4 and at least one replicate"));
        }
        Ok(())
    }

    pub fn experiment(&self, scenario: Scenario) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.n, self.replicates, self.seed, scenario);
        c.gbound = self.gbound;
        c.q_mode = self.q_mode;
        c
    }
}

fn row(report: &ExperimentReport, estimator: EstimatorKind) -> Vec<Vec<String>> {
    let Some(s) = report.summary(estimator) else { return Vec::new() };
    let f = |x: f64| format!("{x:.4}");
    [("rd", s.rd, report.truth.crd), ("rr", s.rr, report.truth.crr)]
        .into_iter()
        .map(|(param, m, truth)| {
            vec![
                report.dgp.clone(),
                report.scenario.as_str().to_string(),
                report.n.to_string(),
                report.replicates.to_string(),
                estimator.as_str().to_string(),
                param.to_string(),
                f(truth),
                f(m.bias),
                f(m.bias_mc_se),
                f(m.empirical_sd),
                f(m.mean_se),
                f(m.rmse),
                f(m.coverage),
                f(m.mean_ci_width),
            ]
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 14] = [
    "dgp", "scenario", "n", "replicates", "estimator", "parameter", "truth", "bias", "bias_mc_se", "empirical_sd",
    "mean_se", "rmse", "coverage", "mean_ci_width",
];

/// Run every configured scenario and write one JSON report per scenario plus
/// `simulation_summary.csv`.
pub fn run_simulation(config: &SimulationConfig) -> CliResult<(Vec<ExperimentReport>, Vec<PathBuf>)> {
    config.validate()?;
    let dgp = named(&config.dgp).expect("validated DGP name");
    let out: &Path = &config.output_dir;
    let mut reports = Vec::new();
    let mut written = Vec::new();
    for &scenario in &config.scenarios {
        log::info!("simulating {} / {}", config.dgp, scenario.as_str());
        let report = run_experiment(&dgp, &config.experiment(scenario))?;
        let path = out.join(format!("simulation_{}_{}.json", config.dgp, scenario.as_str()));
        write_json(&path, &report)?;
        written.push(path);
        reports.push(report);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::data(format!("rendering CSV: {e}"));
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for report in &reports {
        for kind in [EstimatorKind::Tmle, EstimatorKind::Gcomp, EstimatorKind::Unadjusted] {
            for r in row(report, kind) {
                w.write_record(&r).map_err(err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(format!("rendering CSV: {e}")))?;
    let path = out.join("simulation_summary.csv");
    write_atomic(&path, &bytes).map_err(CliError::from)?;
    written.push(path);
    Ok((reports, written))
}
