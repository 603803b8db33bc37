//! Construction of the per-state observed data `(W, A, Y)`.
//!
//! [`Snapshot::load`] reads a frozen snapshot directory; [`build_dataset`]
//! turns it into an [`AnalysisDataset`] for one endpoint, horizon and set of
//! per-state target dates. Construction never imputes: any missing cell is an
//! error naming the state and column.

mod covariates;
mod exposure;
mod snapshot;
mod summary;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ObservedData;

pub use covariates::{build_covariates, build_outcome, covariate_names, CovariateTable, PER_CAPITA_LAGS, MOBILITY_LAGS};
pub use exposure::{
    build_exposure, classify, exposure_classes, in_place, secondary_target_dates, DateAnchor, ExposureClass,
    SecondaryTargets, FULL_MASK_LEVEL,
};
pub use snapshot::{
    validate_snapshot, PanelRow, PolicyKind, PolicyRecord, Problem, Snapshot, StatePanel, StaticRow, PANEL_FILE,
    PANEL_HEADER, POLICIES_FILE, POLICIES_HEADER, STATIC_COLUMNS, STATIC_FILE, URBAN_COLUMN,
};
pub use summary::{format_count, format_quantiles, summarize_table1, Table1Cell, Table1Row};

/// The 50 states, by postal code.
pub const STATES: [&str; 50] = [
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN", "KS", "KY", "LA", "MA",
    "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY", "OH", "OK", "OR", "PA",
    "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY",
];

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Target date of the primary analysis.
pub fn primary_target() -> NaiveDate {
    date(2020, 9, 1)
}

/// Target date given to states that never issued a stay-at-home order.
pub fn default_sah_target() -> NaiveDate {
    date(2020, 5, 15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Cases,
    Deaths,
}

impl Endpoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Cases => "cases",
            Endpoint::Deaths => "deaths",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Endpoint::Cases => "Cases",
            Endpoint::Deaths => "Deaths",
        }
    }
}

/// Horizons, in days after the target date, at which growth is measured.
pub const HORIZONS: [u32; 4] = [21, 30, 45, 60];

/// How each state's target date is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TargetMode {
    /// One calendar date for every state.
    Fixed { date: NaiveDate },
    /// The date each state lifted its stay-at-home order.
    StayAtHomeLift,
    /// Explicit dates for every state.
    PerState { dates: BTreeMap<String, NaiveDate> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub targets: TargetMode,
    pub endpoint: Endpoint,
    pub horizon_days: u32,
    #[serde(default = "default_anchor")]
    pub anchor: DateAnchor,
    /// Target for states with no stay-at-home order.
    #[serde(default = "default_sah_target")]
    pub sah_default: NaiveDate,
    /// Lift date assumed for stay-at-home orders with no recorded end.
    #[serde(default = "primary_target")]
    pub window_end: NaiveDate,
}

fn default_anchor() -> DateAnchor {
    DateAnchor::Enacted
}

impl DatasetConfig {
    pub fn primary(endpoint: Endpoint, horizon_days: u32) -> Self {
        DatasetConfig {
            targets: TargetMode::Fixed { date: primary_target() },
            endpoint,
            horizon_days,
            anchor: DateAnchor::Enacted,
            sah_default: default_sah_target(),
            window_end: primary_target(),
        }
    }

    pub fn secondary(endpoint: Endpoint, horizon_days: u32) -> Self {
        DatasetConfig { targets: TargetMode::StayAtHomeLift, ..DatasetConfig::primary(endpoint, horizon_days) }
    }

    /// Short name used in output file names, e.g. `primary_cases_60`.
    pub fn name(&self) -> String {
        let mode = match self.targets {
            TargetMode::Fixed { .. } => "primary",
            TargetMode::StayAtHomeLift => "secondary",
            TargetMode::PerState { .. } => "custom",
        };
        format!("{mode}_{}_{}", self.endpoint.as_str(), self.horizon_days)
    }
}

/// Resolved target dates plus how they were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub dates: BTreeMap<String, NaiveDate>,
    /// States whose stay-at-home order had no recorded end.
    pub open_ended: Vec<String>,
    pub never_issued_sah: Vec<String>,
}

pub fn resolve_targets(snapshot: &Snapshot, config: &DatasetConfig) -> Result<Targets> {
    match &config.targets {
        TargetMode::Fixed { date } => Ok(Targets {
            dates: STATES.iter().map(|s| (s.to_string(), *date)).collect(),
            open_ended: Vec::new(),
            never_issued_sah: Vec::new(),
        }),
        TargetMode::StayAtHomeLift => {
            let s = secondary_target_dates(snapshot, &STATES, config.sah_default, config.window_end)?;
            Ok(Targets { dates: s.dates, open_ended: s.open_ended, never_issued_sah: s.never_issued })
        }
        TargetMode::PerState { dates } => {
            for st in STATES {
                if !dates.contains_key(st) {
                    return Err(Error::state(st, "no target date"));
                }
            }
            Ok(Targets { dates: dates.clone(), open_ended: Vec::new(), never_issued_sah: Vec::new() })
        }
    }
}

/// Every panel date a configuration reads, by state.
pub fn required_dates(targets: &BTreeMap<String, NaiveDate>, horizons: &[u32]) -> BTreeMap<String, Vec<NaiveDate>> {
    targets
        .iter()
        .map(|(st, &t)| {
            let mut dates = vec![t];
            dates.extend(horizons.iter().map(|&h| t + chrono::Duration::days(i64::from(h))));
            dates.extend(PER_CAPITA_LAGS.iter().chain(MOBILITY_LAGS.iter()).map(|&l| t - chrono::Duration::days(l)));
            dates.sort();
            dates.dedup();
            (st.clone(), dates)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub name: String,
    pub config: DatasetConfig,
    pub target_dates: BTreeMap<String, NaiveDate>,
    pub open_ended_sah: Vec<String>,
    pub never_issued_sah: Vec<String>,
    pub exposure_classes: BTreeMap<String, ExposureClass>,
    pub n_exposed: usize,
    pub n_unexposed: usize,
}

/// Observed data for one configuration, one row per state in [`STATES`] order.
#[derive(Debug, Clone)]
pub struct AnalysisDataset {
    pub states: Vec<String>,
    pub data: ObservedData,
    pub classes: Vec<ExposureClass>,
    pub target_dates: Vec<NaiveDate>,
    /// Urban share in 2010 when the snapshot provides it; descriptive only.
    pub urban: Option<Vec<f64>>,
    pub metadata: DatasetMetadata,
}

/// Build `(W, A, Y)` for every state.
pub fn build_dataset(snapshot: &Snapshot, config: &DatasetConfig) -> Result<AnalysisDataset> {
    if !HORIZONS.contains(&config.horizon_days) {
        log::warn!("horizon {} is not one of the standard horizons {:?}", config.horizon_days, HORIZONS);
    }
    let targets = resolve_targets(snapshot, config)?;
    let classes_map = exposure_classes(&snapshot.policies, &STATES, &targets.dates, config.anchor)?;
    let a: Vec<u8> = STATES.iter().map(|s| u8::from(classes_map[*s] == ExposureClass::Early)).collect();

    let mut y = Vec::with_capacity(STATES.len());
    for st in STATES {
        let panel = snapshot.panel(st)?;
        y.push(build_outcome(panel, targets.dates[st], config.horizon_days, config.endpoint)?);
    }
    let table = build_covariates(snapshot, &targets.dates, config.anchor)?;
    let urban = STATES
        .iter()
        .map(|s| snapshot.statics.get(*s).and_then(|r| r.urban))
        .collect::<Option<Vec<f64>>>();

    let n_exposed = a.iter().filter(|&&v| v == 1).count();
    let data = ObservedData::new(table.frame, a, y)?;
    let metadata = DatasetMetadata {
        name: config.name(),
        config: config.clone(),
        target_dates: targets.dates.clone(),
        open_ended_sah: targets.open_ended,
        never_issued_sah: targets.never_issued_sah,
        exposure_classes: classes_map.clone(),
        n_exposed,
        n_unexposed: STATES.len() - n_exposed,
    };
    Ok(AnalysisDataset {
        states: STATES.iter().map(|s| s.to_string()).collect(),
        classes: STATES.iter().map(|s| classes_map[*s]).collect(),
        target_dates: STATES.iter().map(|s| targets.dates[*s]).collect(),
        data,
        urban,
        metadata,
    })
}

impl AnalysisDataset {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// CSV text with columns `state`, W..., `A`, `Y`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["state".to_string()];
        header.extend(self.data.w.names().iter().cloned());
        header.push("A".into());
        header.push("Y".into());
        let csv_err = |e: csv::Error| Error::Data(format!("writing dataset CSV: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n() {
            let mut rec = vec![self.states[i].clone()];
            rec.extend(self.data.w.row(i).iter().map(|v| v.to_string()));
            rec.push(self.data.a[i].to_string());
            rec.push(self.data.y[i].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Data(format!("writing dataset CSV: {e}")))
    }

    /// Write `dataset_<name>.csv` and its `dataset_<name>.json` sidecar.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv_path = dir.join(format!("dataset_{}.csv", self.metadata.name));
        let json_path = dir.join(format!("dataset_{}.json", self.metadata.name));
        write_atomic(&csv_path, &self.to_csv()?)?;
        let json = serde_json::to_vec_pretty(&self.metadata).map_err(|e| Error::Data(e.to_string()))?;
        write_atomic(&json_path, &json)?;
        Ok((csv_path, json_path))
    }
}

/// Write `bytes` to a temporary file next to `path`, then rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
