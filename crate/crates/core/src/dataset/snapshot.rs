//! Reading a frozen snapshot directory.
//!
//! A snapshot holds three CSV files:
//!
//! - `panel.csv`: `state,date,cum_cases,cum_deaths,cum_tests,mobility_residential_pct`
//! - `policies.csv`: `state,kind,mask_level,issued,enacted,expired,end`
//! - `static_covariates.csv`: `state` followed by [`STATIC_COLUMNS`], plus
//!   the optional [`URBAN_COLUMN`]
//!
//! Dates are ISO-8601. Empty fields are missing values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::STATES;
use crate::error::{Error, Result};

pub const PANEL_FILE: &str = "panel.csv";
pub const POLICIES_FILE: &str = "policies.csv";
pub const STATIC_FILE: &str = "static_covariates.csv";

pub const PANEL_HEADER: [&str; 6] = ["state", "date", "cum_cases", "cum_deaths", "cum_tests", "mobility_residential_pct"];
pub const POLICIES_HEADER: [&str; 7] = ["state", "kind", "mask_level", "issued", "enacted", "expired", "end"];

/// Static covariate columns, in design order.
pub const STATIC_COLUMNS: [&str; 20] = [
    "pct_age_over_65",
    "pct_black",
    "pct_hispanic",
    "pct_asian",
    "pct_mixed_race",
    "pct_white",
    "median_age",
    "pct_households_below_poverty",
    "pct_people_below_poverty",
    "pct_smokers",
    "pct_diabetic",
    "population_density",
    "pct_commute_drive",
    "pct_commute_work_from_home",
    "pct_commute_public_transit",
    "pct_commute_bike",
    "pct_commute_walk",
    "pct_commute_other",
    "total_population",
    "republican",
];

/// Optional column used only for descriptive summaries.
pub const URBAN_COLUMN: &str = "pct_urban_2010";

/// Percentage columns among [`STATIC_COLUMNS`].
pub(crate) fn is_percent_column(name: &str) -> bool {
    name.starts_with("pct_")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub cum_cases: u64,
    pub cum_deaths: u64,
    pub cum_tests: Option<u64>,
    pub mobility_residential_pct: Option<f64>,
}

/// Daily series of one state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatePanel {
    pub state: String,
    pub series: BTreeMap<NaiveDate, PanelRow>,
}

impl StatePanel {
    pub fn first_date(&self) -> Option<NaiveDate> {
        self.series.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.series.keys().next_back().copied()
    }

    pub fn at(&self, date: NaiveDate) -> Result<&PanelRow> {
        self.series.get(&date).ok_or_else(|| {
            let range = match (self.first_date(), self.last_date()) {
                (Some(a), Some(b)) => format!("{a} to {b}"),
                _ => "no dates".to_string(),
            };
            Error::state(&self.state, format!("no panel row for {date} (series covers {range})"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    PublicMasking,
    BusinessMasking,
    SchoolMasking,
    StayAtHome,
    GatheringRestriction,
    RestaurantRestriction,
    BusinessClosureNonessential,
    BusinessClosureOther,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::PublicMasking,
        PolicyKind::BusinessMasking,
        PolicyKind::SchoolMasking,
        PolicyKind::StayAtHome,
        PolicyKind::GatheringRestriction,
        PolicyKind::RestaurantRestriction,
        PolicyKind::BusinessClosureNonessential,
        PolicyKind::BusinessClosureOther,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::PublicMasking => "public_masking",
            PolicyKind::BusinessMasking => "business_masking",
            PolicyKind::SchoolMasking => "school_masking",
            PolicyKind::StayAtHome => "stay_at_home",
            PolicyKind::GatheringRestriction => "gathering_restriction",
            PolicyKind::RestaurantRestriction => "restaurant_restriction",
            PolicyKind::BusinessClosureNonessential => "business_closure_nonessential",
            PolicyKind::BusinessClosureOther => "business_closure_other",
        }
    }

    pub fn parse(s: &str) -> Option<PolicyKind> {
        PolicyKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_masking(self) -> bool {
        matches!(self, PolicyKind::PublicMasking | PolicyKind::BusinessMasking | PolicyKind::SchoolMasking)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub state: String,
    pub kind: PolicyKind,
    pub mask_level: Option<u8>,
    pub issued: Option<NaiveDate>,
    pub enacted: Option<NaiveDate>,
    pub expired: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl PolicyRecord {
    fn check(&self) -> std::result::Result<(), String> {
        match (self.kind.is_masking(), self.mask_level) {
            (true, None) => return Err("masking record without mask_level".into()),
            (false, Some(_)) => return Err("mask_level on a non-masking record".into()),
            (true, Some(l)) if !(1..=3).contains(&l) => return Err(format!("mask_level {l} not in 1..=3")),
            _ => {}
        }
        if let (Some(i), Some(e)) = (self.issued, self.enacted) {
            if e < i {
                return Err(format!("enacted {e} before issued {i}"));
            }
        }
        if let Some(e) = self.enacted {
            for stop in [self.expired, self.end].into_iter().flatten() {
                if stop < e {
                    return Err(format!("ended {stop} before enacted {e}"));
                }
            }
        }
        Ok(())
    }

    /// Earliest of the expiry and end dates, if any.
    pub fn termination(&self) -> Option<NaiveDate> {
        [self.expired, self.end].into_iter().flatten().min()
    }
}

/// Static covariates of one state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticRow {
    pub values: BTreeMap<String, Option<f64>>,
    pub urban: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub panels: BTreeMap<String, StatePanel>,
    pub policies: Vec<PolicyRecord>,
    pub statics: BTreeMap<String, StaticRow>,
}

/// A problem found while reading or checking a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Problem {
    pub file: String,
    pub state: Option<String>,
    pub detail: String,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.state {
            Some(s) => write!(f, "{}: {}: {}", self.file, s, self.detail),
            None => write!(f, "{}: {}", self.file, self.detail),
        }
    }
}

fn problem(file: &str, state: Option<&str>, detail: impl Into<String>) -> Problem {
    Problem { file: file.to_string(), state: state.map(str::to_string), detail: detail.into() }
}

fn open(dir: &Path, file: &str) -> Result<csv::Reader<fs::File>> {
    let path: PathBuf = dir.join(file);
    let f = fs::File::open(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn parse_date(s: &str) -> std::result::Result<Option<NaiveDate>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map(Some).map_err(|_| format!("bad date {s:?}"))
}

fn parse_count(s: &str, what: &str) -> std::result::Result<Option<u64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u64>().map(Some).map_err(|_| format!("{what} {s:?} is not a non-negative integer"))
}

fn parse_float(s: &str, what: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{what} {s:?} is not a finite number")),
    }
}

fn check_header(rdr: &mut csv::Reader<fs::File>, file: &str, expected: &[&str]) -> Result<Vec<String>> {
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema { file: file.into(), detail: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    for col in expected {
        if !header.iter().any(|h| h == col) {
            return Err(Error::Schema { file: file.into(), detail: format!("missing column {col}") });
        }
    }
    Ok(header)
}

fn records(rdr: &mut csv::Reader<fs::File>, file: &str) -> Result<Vec<BTreeMap<String, String>>> {
    let header: Vec<String> = rdr.headers().map_err(|e| Error::Schema { file: file.into(), detail: e.to_string() })?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema { file: file.into(), detail: format!("row {}: {e}", line + 2) })?;
        out.push(header.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
    }
    Ok(out)
}

impl Snapshot {
    /// Read and parse a snapshot. Structural problems (missing files or
    /// columns, unparseable cells) are errors; content checks live in
    /// [`Snapshot::problems`].
    pub fn load(dir: &Path) -> Result<Snapshot> {
        let mut snap = Snapshot::default();

        let mut rdr = open(dir, PANEL_FILE)?;
        check_header(&mut rdr, PANEL_FILE, &PANEL_HEADER)?;
        for (k, r) in records(&mut rdr, PANEL_FILE)?.into_iter().enumerate() {
            let bad = |detail: String| Error::Schema { file: PANEL_FILE.into(), detail: format!("row {}: {detail}", k + 2) };
            let state = r["state"].clone();
            let date = parse_date(&r["date"]).map_err(bad)?.ok_or_else(|| bad("missing date".into()))?;
            let row = PanelRow {
                cum_cases: parse_count(&r["cum_cases"], "cum_cases").map_err(bad)?.ok_or_else(|| bad("missing cum_cases".into()))?,
                cum_deaths: parse_count(&r["cum_deaths"], "cum_deaths").map_err(bad)?.ok_or_else(|| bad("missing cum_deaths".into()))?,
                cum_tests: parse_count(&r["cum_tests"], "cum_tests").map_err(bad)?,
                mobility_residential_pct: parse_float(&r["mobility_residential_pct"], "mobility").map_err(bad)?,
            };
            let panel = snap.panels.entry(state.clone()).or_insert_with(|| StatePanel { state: state.clone(), series: BTreeMap::new() });
            if panel.series.insert(date, row).is_some() {
                return Err(bad(format!("duplicate row for {state} on {date}")));
            }
        }

        let mut rdr = open(dir, POLICIES_FILE)?;
        check_header(&mut rdr, POLICIES_FILE, &POLICIES_HEADER)?;
        for (k, r) in records(&mut rdr, POLICIES_FILE)?.into_iter().enumerate() {
            let bad = |detail: String| Error::Schema { file: POLICIES_FILE.into(), detail: format!("row {}: {detail}", k + 2) };
            let kind = PolicyKind::parse(&r["kind"]).ok_or_else(|| bad(format!("unknown policy kind {:?}", r["kind"])))?;
            let mask_level = match r["mask_level"].as_str() {
                "" => None,
                s => Some(s.parse::<u8>().map_err(|_| bad(format!("bad mask_level {s:?}")))?),
            };
            let rec = PolicyRecord {
                state: r["state"].clone(),
                kind,
                mask_level,
                issued: parse_date(&r["issued"]).map_err(bad)?,
                enacted: parse_date(&r["enacted"]).map_err(bad)?,
                expired: parse_date(&r["expired"]).map_err(bad)?,
                end: parse_date(&r["end"]).map_err(bad)?,
            };
            rec.check().map_err(|d| Error::state(&rec.state, format!("{} record: {d}", kind.as_str())))?;
            snap.policies.push(rec);
        }

        let mut rdr = open(dir, STATIC_FILE)?;
        let mut expected = vec!["state"];
        expected.extend(STATIC_COLUMNS);
        let header = check_header(&mut rdr, STATIC_FILE, &expected)?;
        let has_urban = header.iter().any(|h| h == URBAN_COLUMN);
        for (k, r) in records(&mut rdr, STATIC_FILE)?.into_iter().enumerate() {
            let bad = |detail: String| Error::Schema { file: STATIC_FILE.into(), detail: format!("row {}: {detail}", k + 2) };
            let mut row = StaticRow::default();
            for col in STATIC_COLUMNS {
                row.values.insert(col.to_string(), parse_float(&r[col], col).map_err(bad)?);
            }
            if has_urban {
                row.urban = parse_float(&r[URBAN_COLUMN], URBAN_COLUMN).map_err(bad)?;
            }
            if snap.statics.insert(r["state"].clone(), row).is_some() {
                return Err(bad(format!("duplicate state {}", r["state"])));
            }
        }
        Ok(snap)
    }

    pub fn panel(&self, state: &str) -> Result<&StatePanel> {
        self.panels.get(state).ok_or_else(|| Error::state(state, "no panel series"))
    }

    pub fn policies_of<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a PolicyRecord> + 'a {
        self.policies.iter().filter(move |p| p.state == state)
    }

    /// Content checks: 50-state completeness, monotone cumulative series,
    /// value ranges, and coverage of every date in `required_dates`.
    pub fn problems(&self, required_dates: &BTreeMap<String, Vec<NaiveDate>>) -> Vec<Problem> {
        let mut out = Vec::new();
        for st in STATES {
            if !self.panels.contains_key(st) {
                out.push(problem(PANEL_FILE, Some(st), "state missing"));
            }
            if !self.statics.contains_key(st) {
                out.push(problem(STATIC_FILE, Some(st), "state missing"));
            }
        }
        for st in self.panels.keys().chain(self.statics.keys()) {
            if !STATES.contains(&st.as_str()) {
                out.push(problem(PANEL_FILE, Some(st), "not one of the 50 states"));
            }
        }
        for (st, panel) in &self.panels {
            let mut prev: Option<(NaiveDate, &PanelRow)> = None;
            for (date, row) in &panel.series {
                if let Some((pd, p)) = prev {
                    if *date != pd + chrono::Duration::days(1) {
                        out.push(problem(PANEL_FILE, Some(st), format!("gap in series between {pd} and {date}")));
                    }
                    for (what, now, before) in [
                        ("cum_cases", Some(row.cum_cases), Some(p.cum_cases)),
                        ("cum_deaths", Some(row.cum_deaths), Some(p.cum_deaths)),
                        ("cum_tests", row.cum_tests, p.cum_tests),
                    ] {
                        if let (Some(a), Some(b)) = (now, before) {
                            if a < b {
                                out.push(problem(PANEL_FILE, Some(st), format!("{what} decreases on {date} ({b} -> {a})")));
                            }
                        }
                    }
                }
                prev = Some((*date, row));
            }
            if let Some(dates) = required_dates.get(st) {
                for d in dates {
                    if !panel.series.contains_key(d) {
                        out.push(problem(PANEL_FILE, Some(st), format!("required date {d} not covered")));
                    }
                }
            }
        }
        for (st, row) in &self.statics {
            for (col, v) in &row.values {
                match v {
                    None => out.push(problem(STATIC_FILE, Some(st), format!("{col} missing"))),
                    Some(v) if is_percent_column(col) && !(0.0..=100.0).contains(v) => {
                        out.push(problem(STATIC_FILE, Some(st), format!("{col} = {v} outside [0, 100]")))
                    }
                    Some(v) if col == "republican" && *v != 0.0 && *v != 1.0 => {
                        out.push(problem(STATIC_FILE, Some(st), format!("republican = {v} is not 0/1")))
                    }
                    Some(v) if col == "total_population" && !(*v > 0.0) => {
                        out.push(problem(STATIC_FILE, Some(st), "total_population must be positive"))
                    }
                    Some(v) if *v < 0.0 => out.push(problem(STATIC_FILE, Some(st), format!("{col} = {v} is negative"))),
                    _ => {}
                }
            }
        }
        for p in &self.policies {
            if !STATES.contains(&p.state.as_str()) {
                out.push(problem(POLICIES_FILE, Some(&p.state), "not one of the 50 states"));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Problems that prevent reading the snapshot at all, or content problems
/// found after reading it.
pub fn validate_snapshot(dir: &Path, required_dates: &BTreeMap<String, Vec<NaiveDate>>) -> Vec<Problem> {
    if !dir.is_dir() {
        return vec![problem(&dir.display().to_string(), None, "snapshot directory does not exist")];
    }
    match Snapshot::load(dir) {
        Ok(s) => s.problems(required_dates),
        Err(e) => {
            let file = match &e {
                Error::Schema { file, .. } => file.clone(),
                Error::Io { path, .. } => path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
                _ => "snapshot".to_string(),
            };
            vec![problem(&file, None, e.to_string())]
        }
    }
}
