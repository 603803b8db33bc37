//! End-to-end run: snapshot, datasets for every (endpoint, horizon) cell,
//! estimates, and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use roadmap_core::dataset::{
    build_dataset, required_dates, resolve_targets, summarize_table1, write_atomic, AnalysisDataset, Endpoint,
    ExposureClass, Snapshot, Table1Row, PANEL_FILE, POLICIES_FILE, STATIC_FILE,
};
use roadmap_core::estimators::{
    fit_nuisance, gcomp_from_nuisance, propensity_summary, tmle_from_nuisance, unadjusted_estimate, EffectEstimate,
    EstimatorKind, NuisanceConfig, PropensitySummary,
};
use roadmap_core::simlab::replicate_seed;
use roadmap_core::stats::mean;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{AnalysisMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::write_reports;

pub const ESTIMATES_FILE: &str = "estimates.json";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Targeting diagnostics of one TMLE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmleDiagnostics {
    pub eps0: f64,
    pub eps1: f64,
    pub iterations: usize,
    /// Mean clever-covariate score per arm, `[a = 0, a = 1]`.
    pub score_means: [f64; 2],
    /// Mean influence curve per arm, `[a = 0, a = 1]`.
    pub ic_means: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub endpoint: Endpoint,
    pub horizon_days: u32,
    pub seed: u64,
    pub n: usize,
    pub n_exposed: usize,
    pub estimates: Vec<EffectEstimate>,
    pub propensity: Option<PropensitySummary>,
    /// Smallest and largest propensity before truncation.
    pub propensity_range: Option<(f64, f64)>,
    pub gbound: f64,
    pub positivity_alarm: bool,
    pub tmle: Option<TmleDiagnostics>,
    pub learner_weights: Vec<(String, Vec<(String, f64)>)>,
    pub warnings: Vec<String>,
}

impl CellResult {
    pub fn label(&self) -> String {
        format!("{} {} days", self.endpoint.as_str(), self.horizon_days)
    }

    pub fn estimate(&self, kind: EstimatorKind) -> Option<&EffectEstimate> {
        self.estimates.iter().find(|e| e.estimator == kind)
    }
}

/// Everything a report needs, at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub mode: AnalysisMode,
    pub seed: u64,
    pub exposure_classes: BTreeMap<String, ExposureClass>,
    pub target_dates: BTreeMap<String, chrono::NaiveDate>,
    pub table1: Vec<Table1Row>,
    pub cells: Vec<CellResult>,
}

/// Seed of one grid cell. Depends only on the master seed and the cell, so a
/// cell's results do not change when other cells are added or removed.
pub fn cell_seed(master: u64, endpoint: Endpoint, horizon_days: u32) -> u64 {
    let e = match endpoint {
        Endpoint::Cases => 0u64,
        Endpoint::Deaths => 1,
    };
    replicate_seed(master, e * 1000 + u64::from(horizon_days))
}

fn cell_name(endpoint: Endpoint, horizon_days: u32) -> String {
    format!("{} {} days", endpoint.as_str(), horizon_days)
}

/// Read the snapshot and check that it covers every date the run needs.
pub fn load_checked_snapshot(config: &RunConfig) -> CliResult<Snapshot> {
    let snapshot = Snapshot::load(&config.data_dir)?;
    let mode = config.target_mode()?;
    let (endpoint, horizon) = config.cells()[0];
    let targets = resolve_targets(&snapshot, &config.dataset_config(&mode, endpoint, horizon))?;
    let problems = snapshot.problems(&required_dates(&targets.dates, &config.horizons));
    if !problems.is_empty() {
        let shown: Vec<String> = problems.iter().take(20).map(ToString::to_string).collect();
        let more = if problems.len() > 20 { format!(" (and {} more)", problems.len() - 20) } else { String::new() };
        return Err(CliError::data(format!("snapshot problems: {}{more}", shown.join("; "))));
    }
    Ok(snapshot)
}

/// Build the dataset of every cell, in grid order.
pub fn build_datasets(config: &RunConfig, snapshot: &Snapshot) -> CliResult<Vec<AnalysisDataset>> {
    let mode = config.target_mode()?;
    config
        .cells()
        .into_par_iter()
        .map(|(endpoint, h)| {
            build_dataset(snapshot, &config.dataset_config(&mode, endpoint, h))
                .map_err(|e| CliError::from(e).in_cell(&cell_name(endpoint, h)))
        })
        .collect()
}

/// Run the configured estimators on one dataset.
pub fn estimate_cell(
    dataset: &AnalysisDataset,
    estimators: &[EstimatorKind],
    nuisance_config: &NuisanceConfig,
    seed: u64,
) -> CliResult<CellResult> {
    let data = &dataset.data;
    let endpoint = dataset.metadata.config.endpoint;
    let horizon_days = dataset.metadata.config.horizon_days;
    let name = cell_name(endpoint, horizon_days);
    let wrap = |e: roadmap_core::Error| CliError::from(e).in_cell(&name);
    let needs_nuisance = estimators.iter().any(|k| *k != EstimatorKind::Unadjusted);
    let nuisance = if needs_nuisance { Some(fit_nuisance(data, nuisance_config, seed).map_err(wrap)?) } else { None };

    let mut estimates = Vec::new();
    let mut tmle = None;
    for kind in estimators {
        let est = match kind {
            EstimatorKind::Tmle => {
                let fit = tmle_from_nuisance(data, nuisance.as_ref().expect("nuisance fitted")).map_err(wrap)?;
                tmle = Some(TmleDiagnostics {
                    eps0: fit.fluctuation.eps0,
                    eps1: fit.fluctuation.eps1,
                    iterations: fit.fluctuation.iterations,
                    score_means: fit.score_means,
                    ic_means: [mean(&fit.estimate.ic0), mean(&fit.estimate.ic1)],
                });
                fit.estimate
            }
            EstimatorKind::Gcomp => gcomp_from_nuisance(data, nuisance.as_ref().expect("nuisance fitted")).map_err(wrap)?,
            EstimatorKind::Unadjusted => unadjusted_estimate(data).map_err(wrap)?,
        };
        estimates.push(est);
    }
    let (propensity, propensity_range, positivity_alarm, learner_weights, warnings, gbound) = match &nuisance {
        Some(nf) => {
            let lo = nf.g1_raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = nf.g1_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                Some(propensity_summary(&nf.g1)),
                Some((lo, hi)),
                nf.positivity_alarm,
                nf.weights.clone(),
                nf.warnings.clone(),
                nf.gbound,
            )
        }
        None => (None, None, false, Vec::new(), Vec::new(), nuisance_config.gbound),
    };
    for w in &warnings {
        log::warn!("[{name}] {w}");
    }
    Ok(CellResult {
        endpoint,
        horizon_days,
        seed,
        n: data.n(),
        n_exposed: dataset.metadata.n_exposed,
        estimates,
        propensity,
        propensity_range,
        gbound,
        positivity_alarm,
        tmle,
        learner_weights,
        warnings,
    })
}

/// Datasets and estimates for every cell, without writing anything.
pub fn compute(config: &RunConfig, snapshot: &Snapshot) -> CliResult<(Vec<AnalysisDataset>, RunResults)> {
    let datasets = build_datasets(config, snapshot)?;
    let nuisance = config.nuisance()?;
    let cells: Vec<CellResult> = datasets
        .par_iter()
        .map(|ds| {
            let c = &ds.metadata.config;
            log::info!("estimating {}", cell_name(c.endpoint, c.horizon_days));
            estimate_cell(ds, &config.estimators, &nuisance, cell_seed(config.seed, c.endpoint, c.horizon_days))
        })
        .collect::<CliResult<_>>()?;
    let first = &datasets[0];
    let results = RunResults {
        mode: config.mode,
        seed: config.seed,
        exposure_classes: first.metadata.exposure_classes.clone(),
        target_dates: first.metadata.target_dates.clone(),
        table1: summarize_table1(first),
        cells,
    };
    Ok((datasets, results))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn checksum_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("writing {}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| io_error(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub created: String,
    pub config: RunConfig,
    pub cell_seeds: Vec<(String, u64)>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

/// Run everything and write the outputs. Returns the paths written.
pub fn run_pipeline(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let snapshot = load_checked_snapshot(config)?;
    let (datasets, results) = compute(config, &snapshot)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;

    let mut written = Vec::new();
    let data_dir = out.join("datasets");
    for ds in &datasets {
        let (csv, json) = ds.write(&data_dir).map_err(CliError::from)?;
        written.push(csv);
        written.push(json);
    }
    let estimates = out.join(ESTIMATES_FILE);
    write_json(&estimates, &results)?;
    written.push(estimates);
    written.extend(write_reports(out, &results)?);

    let mut inputs = BTreeMap::new();
    for f in [PANEL_FILE, POLICIES_FILE, STATIC_FILE] {
        inputs.insert(f.to_string(), checksum_file(&config.data_dir.join(f))?);
    }
    if let Some(t) = &config.target_dates {
        inputs.insert(t.display().to_string(), checksum_file(t)?);
    }
    let mut outputs = BTreeMap::new();
    for p in &written {
        let rel = p.strip_prefix(out).unwrap_or(p).display().to_string();
        outputs.insert(rel, checksum_file(p)?);
    }
    let mut notes = Vec::new();
    if config.mode == AnalysisMode::SecondarySah {
        notes.push(
            "covariate lags and outcome horizons are anchored at each state's own stay-at-home lift date".to_string(),
        );
    }
    let manifest = Manifest {
        tool: "roadmap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created: chrono::Utc::now().to_rfc3339(),
        config: config.clone(),
        cell_seeds: results.cells.iter().map(|c| (c.label(), c.seed)).collect(),
        inputs,
        outputs,
        notes,
    };
    let manifest_path = out.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;
    written.push(manifest_path);
    Ok(written)
}

/// Rewrite the report files from a previous run's `estimates.json`.
pub fn rerender(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let path = dir.join(ESTIMATES_FILE);
    let bytes = fs::read(&path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let results: RunResults =
        serde_json::from_slice(&bytes).map_err(|e| CliError::data(format!("invalid {}: {e}", path.display())))?;
    write_reports(dir, &results)
}
