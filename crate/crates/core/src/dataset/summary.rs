//! Baseline characteristics by exposure group.

use serde::{Deserialize, Serialize};

use super::AnalysisDataset;
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Table1Cell {
    /// Median and quartiles, type-7 interpolation.
    Quantiles { median: f64, q1: f64, q3: f64 },
    Count { count: usize, n: usize },
}

impl Table1Cell {
    fn of(values: &[f64], indicator: bool) -> Self {
        if indicator {
            Table1Cell::Count { count: values.iter().filter(|&&v| v == 1.0).count(), n: values.len() }
        } else if values.is_empty() {
            Table1Cell::Quantiles { median: f64::NAN, q1: f64::NAN, q3: f64::NAN }
        } else {
            Table1Cell::Quantiles {
                median: quantile(values, 0.5),
                q1: quantile(values, 0.25),
                q3: quantile(values, 0.75),
            }
        }
    }

    pub fn format(&self, decimals: usize) -> String {
        match *self {
            Table1Cell::Quantiles { median, q1, q3 } => format_quantiles(median, q1, q3, decimals),
            Table1Cell::Count { count, n } => format_count(count, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub section: String,
    pub characteristic: String,
    pub column: String,
    pub decimals: usize,
    pub overall: Table1Cell,
    pub early: Table1Cell,
    pub delayed: Table1Cell,
}

/// Round to `decimals` places and drop trailing zeros.
fn format_number(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `median (q1, q3)`.
pub fn format_quantiles(median: f64, q1: f64, q3: f64, decimals: usize) -> String {
    format!(
        "{} ({}, {})",
        format_number(median, decimals),
        format_number(q1, decimals),
        format_number(q3, decimals)
    )
}

/// `count (pct%)` with the percentage rounded to a whole number.
pub fn format_count(count: usize, n: usize) -> String {
    if n == 0 {
        return format!("{count} (NA)");
    }
    format!("{count} ({}%)", format_number(100.0 * count as f64 / n as f64, 0))
}

// (section, label, column, decimals, indicator)
const ROWS: [(&str, &str, &str, usize, bool); 20] = [
    ("Population Demographics", "Black or African American (%)", "pct_black", 1, false),
    ("Population Demographics", "Hispanic (%)", "pct_hispanic", 1, false),
    ("Population Demographics", "Mixed Race (%)", "pct_mixed_race", 1, false),
    ("Population Demographics", "Caucasian (%)", "pct_white", 1, false),
    ("Population Demographics", "Median Age", "median_age", 1, false),
    ("Population Demographics", "Smoker (%)", "pct_smokers", 1, false),
    ("Political Leaning", "Republican", "republican", 0, true),
    ("Population Density & Urbanicity", "Total Population", "total_population", 0, false),
    ("Population Density & Urbanicity", "Population Density (people per km2)", "population_density", 1, false),
    ("Population Density & Urbanicity", "Public Transportation Usage (%)", "pct_commute_public_transit", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Confirmed Cases 30 days prior", "cases_per_100k_30d", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Confirmed Cases 14 days prior", "cases_per_100k_14d", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Confirmed Cases 7 days prior", "cases_per_100k_7d", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Deaths 30 days prior", "deaths_per_100k_30d", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Deaths 14 days prior", "deaths_per_100k_14d", 1, false),
    ("Prior COVID-19 Outcomes (per 100,000 residents)", "Deaths 7 days prior", "deaths_per_100k_7d", 1, false),
    ("Prior COVID-19 Policies", "Implemented Stay-at-Home", "ever_stay_at_home", 0, true),
    ("Prior COVID-19 Policies", "Implemented Gathering Restrictions", "ever_gathering_restriction", 0, true),
    ("Prior COVID-19 Policies", "Implemented School Masking", "ever_school_masking", 0, true),
    ("Changes in Mobility", "Mobility Change 14 days prior (%)", "mobility_residential_14d", 1, false),
];

const LAST_ROW: (&str, &str, &str, usize, bool) =
    ("Changes in Mobility", "Mobility Change 7 days prior (%)", "mobility_residential_7d", 1, false);

const URBAN_ROW: (&str, &str, &str, usize, bool) =
    ("Population Density & Urbanicity", "Urbanicity in 2010 (%)", "pct_urban_2010", 1, false);

/// Median (quartiles) or count (percent) of each characteristic, overall and
/// by exposure group. The urbanicity row appears only when the snapshot has it.
pub fn summarize_table1(dataset: &AnalysisDataset) -> Vec<Table1Row> {
    let a = &dataset.data.a;
    let mut specs: Vec<(&str, &str, &str, usize, bool)> = ROWS.to_vec();
    specs.push(LAST_ROW);
    if dataset.urban.is_some() {
        let at = specs.iter().position(|r| r.2 == "pct_commute_public_transit").unwrap_or(specs.len());
        specs.insert(at, URBAN_ROW);
    }
    specs
        .into_iter()
        .filter_map(|(section, label, column, decimals, indicator)| {
            let values = if column == URBAN_ROW.2 {
                dataset.urban.clone()?
            } else {
                dataset.data.w.column_by_name(column)?
            };
            let group = |arm: u8| -> Vec<f64> { values.iter().zip(a).filter(|(_, &ai)| ai == arm).map(|(v, _)| *v).collect() };
            Some(Table1Row {
                section: section.into(),
                characteristic: label.into(),
                column: column.into(),
                decimals,
                overall: Table1Cell::of(&values, indicator),
                early: Table1Cell::of(&group(1), indicator),
                delayed: Table1Cell::of(&group(0), indicator),
            })
        })
        .collect()
}
