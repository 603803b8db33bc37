//! Report tables rendered from full-precision results.

use std::path::{Path, PathBuf};

use roadmap_core::dataset::{write_atomic, Endpoint, Table1Cell};
use roadmap_core::estimators::{EffectEstimate, EstimatorKind};

use crate::config::AnalysisMode;
use crate::error::{CliError, CliResult};
use crate::pipeline::{CellResult, RunResults};

/// Fixed two-decimal rendering, without a negative sign on zero.
pub fn fmt2(x: f64) -> String {
    fixed(x, 2)
}

fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// `est (lo, hi)` at two decimals.
pub fn with_ci(est: f64, ci: (f64, f64)) -> String {
    format!("{} ({}, {})", fmt2(est), fmt2(ci.0), fmt2(ci.1))
}

fn estimate_cells(e: &EffectEstimate) -> [String; 4] {
    [with_ci(e.psi1, e.ci_psi1), with_ci(e.psi0, e.ci_psi0), with_ci(e.rr, e.ci_rr), with_ci(e.rd, e.ci_rd)]
}

const ESTIMATE_HEADER: [&str; 4] = ["Early (95% CI)", "Delayed (95% CI)", "RR (95% CI)", "RD (95% CI)"];

fn estimator_label(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Tmle => "TMLE",
        EstimatorKind::Gcomp => "G-computation",
        EstimatorKind::Unadjusted => "Unadjusted",
    }
}

fn at(cell: &CellResult) -> String {
    format!("{} days", cell.horizon_days)
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let err = |e: csv::Error| CliError::data(format!("rendering CSV: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::data(format!("rendering CSV: {e}")))
}

fn write_table(dir: &Path, name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> CliResult<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, &to_csv(&header, &rows)?).map_err(|e| CliError::data(format!("writing {name}: {e}")))?;
    Ok(path)
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn cells_of(results: &RunResults, endpoint: Endpoint) -> Vec<&CellResult> {
    results.cells.iter().filter(|c| c.endpoint == endpoint).collect()
}

pub fn table1(results: &RunResults) -> (Vec<String>, Vec<Vec<String>>) {
    let n = results.exposure_classes.len();
    let early = results.exposure_classes.values().filter(|c| **c == roadmap_core::dataset::ExposureClass::Early).count();
    let header = vec![
        "Section".to_string(),
        "Characteristic".to_string(),
        format!("All (N={n})"),
        format!("Early Masking (N={early})"),
        format!("Delayed Masking (N={})", n - early),
    ];
    let rows = results
        .table1
        .iter()
        .map(|r| {
            let f = |c: &Table1Cell| c.format(r.decimals);
            vec![r.section.clone(), r.characteristic.clone(), f(&r.overall), f(&r.early), f(&r.delayed)]
        })
        .collect();
    (header, rows)
}

/// TMLE estimates, one row per (endpoint, horizon).
pub fn table2(results: &RunResults) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["Outcome", "At"]);
    header.extend(strings(&ESTIMATE_HEADER));
    let rows = results
        .cells
        .iter()
        .filter_map(|c| {
            let e = c.estimate(EstimatorKind::Tmle)?;
            let mut row = vec![c.endpoint.label().to_string(), at(c)];
            row.extend(estimate_cells(e));
            Some(row)
        })
        .collect();
    (header, rows)
}

/// Every estimator for one endpoint, grouped by estimator.
pub fn comparison_table(results: &RunResults, endpoint: Endpoint, kinds: &[EstimatorKind]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["Estimator", "At"]);
    header.extend(strings(&ESTIMATE_HEADER));
    let mut rows = Vec::new();
    for &kind in kinds {
        for c in cells_of(results, endpoint) {
            if let Some(e) = c.estimate(kind) {
                let mut row = vec![estimator_label(kind).to_string(), at(c)];
                row.extend(estimate_cells(e));
                rows.push(row);
            }
        }
    }
    (header, rows)
}

/// Propensity score summaries.
pub fn etable3(results: &RunResults) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&["Outcome", "At", "Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."]);
    let rows = results
        .cells
        .iter()
        .filter_map(|c| {
            let p = c.propensity?;
            let mut row = vec![c.endpoint.label().to_string(), at(c)];
            row.extend([p.min, p.q1, p.median, p.mean, p.q3, p.max].iter().map(|v| fixed(*v, 3)));
            Some(row)
        })
        .collect();
    (header, rows)
}

/// Plot source for the ratio-over-time figure.
pub fn figure2_series(results: &RunResults) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&["endpoint", "horizon", "rr", "ci_lo", "ci_hi"]);
    let rows = results
        .cells
        .iter()
        .filter_map(|c| {
            let e = c.estimate(EstimatorKind::Tmle)?;
            Some(vec![c.endpoint.as_str().to_string(), c.horizon_days.to_string(), fmt2(e.rr), fmt2(e.ci_rr.0), fmt2(e.ci_rr.1)])
        })
        .collect();
    (header, rows)
}

/// Write every report table into `dir`.
pub fn write_reports(dir: &Path, results: &RunResults) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let (h, r) = table1(results);
    written.push(write_table(dir, "table1.csv", h, r)?);

    let has = |k: EstimatorKind| results.cells.iter().any(|c| c.estimate(k).is_some());
    if has(EstimatorKind::Tmle) {
        let (h, r) = table2(results);
        written.push(write_table(dir, "table2.csv", h, r)?);
        let (h, r) = figure2_series(results);
        written.push(write_table(dir, "figure2_series.csv", h, r)?);
    }
    let prefix = match results.mode {
        AnalysisMode::SecondarySah => "etable2",
        AnalysisMode::PrimarySep1 | AnalysisMode::Custom => "etable1",
    };
    for (endpoint, suffix) in [(Endpoint::Cases, "a"), (Endpoint::Deaths, "b")] {
        if cells_of(results, endpoint).is_empty() {
            continue;
        }
        let (h, r) = comparison_table(results, endpoint, &[EstimatorKind::Tmle, EstimatorKind::Unadjusted]);
        if !r.is_empty() {
            written.push(write_table(dir, &format!("{prefix}{suffix}.csv"), h, r)?);
        }
    }
    if results.cells.iter().any(|c| c.propensity.is_some()) {
        let (h, r) = etable3(results);
        written.push(write_table(dir, "etable3.csv", h, r)?);
    }
    let kinds = [EstimatorKind::Tmle, EstimatorKind::Gcomp, EstimatorKind::Unadjusted];
    let mut header = strings(&["Outcome"]);
    let mut rows = Vec::new();
    for endpoint in [Endpoint::Cases, Endpoint::Deaths] {
        let (h, r) = comparison_table(results, endpoint, &kinds);
        header = {
            let mut x = strings(&["Outcome"]);
            x.extend(h);
            x
        };
        rows.extend(r.into_iter().map(|row| {
            let mut x = vec![endpoint.label().to_string()];
            x.extend(row);
            x
        }));
    }
    written.push(write_table(dir, "all_estimates.csv", header, rows)?);
    Ok(written)
}
