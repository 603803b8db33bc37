//! Baseline covariates `W` and the growth outcome `Y`.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};

use super::exposure::DateAnchor;
use super::snapshot::{is_percent_column, PolicyKind, Snapshot, StatePanel, STATIC_COLUMNS};
use super::{Endpoint, STATES};
use crate::error::{Error, Result};
use crate::learners::Frame;

/// Days before the target at which cumulative counts are read.
pub const PER_CAPITA_LAGS: [i64; 3] = [30, 14, 7];
/// Days before the target at which residential mobility is read.
pub const MOBILITY_LAGS: [i64; 2] = [14, 7];

const EVER_POLICIES: [(PolicyKind, &str); 7] = [
    (PolicyKind::StayAtHome, "ever_stay_at_home"),
    (PolicyKind::GatheringRestriction, "ever_gathering_restriction"),
    (PolicyKind::RestaurantRestriction, "ever_restaurant_restriction"),
    (PolicyKind::BusinessClosureNonessential, "ever_business_closure_nonessential"),
    (PolicyKind::BusinessClosureOther, "ever_business_closure_other"),
    (PolicyKind::BusinessMasking, "ever_business_masking"),
    (PolicyKind::SchoolMasking, "ever_school_masking"),
];

const COUNTS: [&str; 3] = ["cases", "deaths", "tests"];

/// Names of the 38 covariates, in column order.
pub fn covariate_names() -> Vec<String> {
    let mut names: Vec<String> = STATIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    for what in COUNTS {
        for lag in PER_CAPITA_LAGS {
            names.push(format!("{what}_per_100k_{lag}d"));
        }
    }
    names.extend(EVER_POLICIES.iter().map(|(_, n)| n.to_string()));
    for lag in MOBILITY_LAGS {
        names.push(format!("mobility_residential_{lag}d"));
    }
    names
}

/// `Y = C(t + h) / C(t)` for cumulative count `C`.
pub fn build_outcome(panel: &StatePanel, target: NaiveDate, horizon_days: u32, endpoint: Endpoint) -> Result<f64> {
    let count = |d: NaiveDate| -> Result<u64> {
        let row = panel.at(d)?;
        Ok(match endpoint {
            Endpoint::Cases => row.cum_cases,
            Endpoint::Deaths => row.cum_deaths,
        })
    };
    let base = count(target)?;
    if base == 0 {
        return Err(Error::state(&panel.state, format!("zero cumulative {} on {target}", endpoint.as_str())));
    }
    let later = count(target + Duration::days(i64::from(horizon_days)))?;
    if later < base {
        return Err(Error::state(
            &panel.state,
            format!("cumulative {} fell from {base} to {later} over the horizon", endpoint.as_str()),
        ));
    }
    Ok(later as f64 / base as f64)
}

/// Covariate matrix with one row per state in [`STATES`] order.
#[derive(Debug, Clone)]
pub struct CovariateTable {
    pub frame: Frame,
}

/// Build `W` for every state. Missing cells are collected across all states
/// and reported together.
pub fn build_covariates(
    snapshot: &Snapshot,
    targets: &BTreeMap<String, NaiveDate>,
    anchor: DateAnchor,
) -> Result<CovariateTable> {
    let names = covariate_names();
    let mut missing: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(STATES.len());
    for st in STATES {
        let target = *targets.get(st).ok_or_else(|| Error::state(st, "no target date"))?;
        let mut row: Vec<f64> = Vec::with_capacity(names.len());
        let mut cell = |value: Option<f64>, col: &str, row: &mut Vec<f64>| {
            match value {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    missing.push(format!("{st}:{col}"));
                    row.push(f64::NAN);
                }
            }
        };

        let statics = snapshot.statics.get(st);
        for col in STATIC_COLUMNS {
            let v = statics.and_then(|r| r.values.get(col).copied().flatten());
            if let Some(x) = v {
                if is_percent_column(col) && !(0.0..=100.0).contains(&x) {
                    return Err(Error::state(st, format!("{col} = {x} outside [0, 100]")));
                }
            }
            cell(v, col, &mut row);
        }
        let population = statics.and_then(|r| r.values.get("total_population").copied().flatten());
        if let Some(p) = population {
            if p <= 0.0 {
                return Err(Error::state(st, format!("total_population = {p}")));
            }
        }

        let panel = snapshot.panels.get(st);
        for what in COUNTS {
            for lag in PER_CAPITA_LAGS {
                let col = format!("{what}_per_100k_{lag}d");
                let d = target - Duration::days(lag);
                let count = panel.and_then(|p| p.series.get(&d)).and_then(|r| match what {
                    "cases" => Some(r.cum_cases),
                    "deaths" => Some(r.cum_deaths),
                    _ => r.cum_tests,
                });
                let v = count.zip(population).map(|(c, p)| c as f64 / p * 1e5);
                cell(v, &col, &mut row);
            }
        }
        for (kind, _) in EVER_POLICIES {
            let ever = snapshot.policies_of(st).any(|p| p.kind == kind && anchor.start(p).is_some_and(|s| s <= target));
            row.push(if ever { 1.0 } else { 0.0 });
        }
        for lag in MOBILITY_LAGS {
            let col = format!("mobility_residential_{lag}d");
            let d = target - Duration::days(lag);
            let v = panel.and_then(|p| p.series.get(&d)).and_then(|r| r.mobility_residential_pct);
            cell(v, &col, &mut row);
        }
        rows.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    Ok(CovariateTable { frame: Frame::from_rows(names, &rows)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PanelRow;

    #[test]
    fn thirty_eight_distinct_columns() {
        let names = covariate_names();
        assert_eq!(names.len(), 38);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 38);
    }

    fn panel(counts: &[(NaiveDate, u64)]) -> StatePanel {
        StatePanel {
            state: "ZZ".into(),
            series: counts
                .iter()
                .map(|&(d, c)| (d, PanelRow { cum_cases: c, cum_deaths: 0, cum_tests: None, mobility_residential_pct: None }))
                .collect(),
        }
    }

    #[test]
    fn outcome_is_a_ratio_of_cumulative_counts() {
        let t = NaiveDate::from_ymd_opt(2020, 9, 1).unwrap();
        let p = panel(&[(t, 200), (t + Duration::days(60), 500)]);
        assert_eq!(build_outcome(&p, t, 60, Endpoint::Cases).unwrap(), 2.5);
    }

    #[test]
    fn zero_baseline_names_the_state() {
        let t = NaiveDate::from_ymd_opt(2020, 9, 1).unwrap();
        let p = panel(&[(t, 0), (t + Duration::days(21), 5)]);
        let err = build_outcome(&p, t, 21, Endpoint::Cases).unwrap_err().to_string();
        assert!(err.contains("ZZ"), "{err}");
    }
}
