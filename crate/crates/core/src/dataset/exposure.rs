//! Exposure construction from policy records.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::snapshot::{PolicyKind, PolicyRecord, Snapshot};
use crate::error::{Error, Result};

/// Which date makes a policy count as in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateAnchor {
    Enacted,
    Issued,
}

impl DateAnchor {
    /// Start date of a record under this anchor; falls back to the other date
    /// when the preferred one is absent.
    pub fn start(self, p: &PolicyRecord) -> Option<NaiveDate> {
        match self {
            DateAnchor::Enacted => p.enacted.or(p.issued),
            DateAnchor::Issued => p.issued.or(p.enacted),
        }
    }
}

/// Mask level that defines exposure.
pub const FULL_MASK_LEVEL: u8 = 3;

/// Why a state is, or is not, exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureClass {
    /// A full public mandate was in place on the target date.
    Early,
    /// No public masking mandate of any level.
    Never,
    /// Only lower-level public mandates.
    Weaker,
    /// A full public mandate started after the target date.
    Late,
    /// A full public mandate started and ended before the target date.
    Lapsed,
}

/// True when `p` is in place on `target`: started on or before it and not
/// terminated before it.
pub fn in_place(p: &PolicyRecord, target: NaiveDate, anchor: DateAnchor) -> bool {
    match anchor.start(p) {
        Some(start) if start <= target => p.termination().is_none_or(|stop| stop >= target),
        _ => false,
    }
}

fn check_dates(p: &PolicyRecord) -> Result<()> {
    if let (Some(start), Some(stop)) = (p.enacted.or(p.issued), p.termination()) {
        if stop < start {
            return Err(Error::state(&p.state, format!("{} record ended {stop} before it started {start}", p.kind.as_str())));
        }
    }
    Ok(())
}

/// Classify one state's public masking history relative to `target`.
pub fn classify(records: &[&PolicyRecord], target: NaiveDate, anchor: DateAnchor) -> Result<ExposureClass> {
    let public: Vec<&PolicyRecord> = records.iter().copied().filter(|p| p.kind == PolicyKind::PublicMasking).collect();
    for p in &public {
        check_dates(p)?;
    }
    let full: Vec<&PolicyRecord> = public.iter().copied().filter(|p| p.mask_level == Some(FULL_MASK_LEVEL)).collect();
    if full.iter().any(|p| in_place(p, target, anchor)) {
        return Ok(ExposureClass::Early);
    }
    if full.iter().any(|p| anchor.start(p).is_some_and(|s| s > target)) {
        return Ok(ExposureClass::Late);
    }
    if full.iter().any(|p| anchor.start(p).is_some()) {
        return Ok(ExposureClass::Lapsed);
    }
    if public.iter().any(|p| anchor.start(p).is_some()) {
        return Ok(ExposureClass::Weaker);
    }
    Ok(ExposureClass::Never)
}

/// Exposure class for each state in `states`, keyed by state.
pub fn exposure_classes(
    policies: &[PolicyRecord],
    states: &[&str],
    target_dates: &BTreeMap<String, NaiveDate>,
    anchor: DateAnchor,
) -> Result<BTreeMap<String, ExposureClass>> {
    let mut out = BTreeMap::new();
    for &st in states {
        let target = *target_dates.get(st).ok_or_else(|| Error::state(st, "no target date"))?;
        let records: Vec<&PolicyRecord> = policies.iter().filter(|p| p.state == st).collect();
        out.insert(st.to_string(), classify(&records, target, anchor)?);
    }
    Ok(out)
}

/// `A_i = 1` iff a full public masking mandate was in place on state `i`'s
/// target date.
pub fn build_exposure(
    policies: &[PolicyRecord],
    states: &[&str],
    target_dates: &BTreeMap<String, NaiveDate>,
    anchor: DateAnchor,
) -> Result<Vec<u8>> {
    let classes = exposure_classes(policies, states, target_dates, anchor)?;
    Ok(states.iter().map(|s| u8::from(classes[*s] == ExposureClass::Early)).collect())
}

/// Per-state target dates for the stay-at-home analysis, plus the states
/// whose orders never recorded an end and were given `window_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryTargets {
    pub dates: BTreeMap<String, NaiveDate>,
    pub open_ended: Vec<String>,
    pub never_issued: Vec<String>,
}

/// The date each state lifted its stay-at-home order; `default_date` for
/// states that never issued one. A state's lift date is the latest
/// termination over its records. Orders with no recorded termination are
/// taken to run to `window_end`.
pub fn secondary_target_dates(
    snapshot: &Snapshot,
    states: &[&str],
    default_date: NaiveDate,
    window_end: NaiveDate,
) -> Result<SecondaryTargets> {
    let mut out = SecondaryTargets { dates: BTreeMap::new(), open_ended: Vec::new(), never_issued: Vec::new() };
    for &st in states {
        let sah: Vec<&PolicyRecord> = snapshot
            .policies_of(st)
            .filter(|p| p.kind == PolicyKind::StayAtHome && (p.issued.is_some() || p.enacted.is_some()))
            .collect();
        if sah.is_empty() {
            out.never_issued.push(st.to_string());
            out.dates.insert(st.to_string(), default_date);
            continue;
        }
        for p in &sah {
            check_dates(p)?;
        }
        let mut lift = None::<NaiveDate>;
        let mut open = false;
        for p in &sah {
            match p.termination() {
                Some(t) => lift = Some(lift.map_or(t, |l| l.max(t))),
                None => open = true,
            }
        }
        let date = if open {
            out.open_ended.push(st.to_string());
            window_end
        } else {
            lift.expect("at least one terminated record")
        };
        out.dates.insert(st.to_string(), date);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn mask(level: u8, enacted: &str, end: Option<&str>) -> PolicyRecord {
        PolicyRecord {
            state: "XX".into(),
            kind: PolicyKind::PublicMasking,
            mask_level: Some(level),
            issued: Some(d(enacted)),
            enacted: Some(d(enacted)),
            expired: None,
            end: end.map(d),
        }
    }

    #[test]
    fn classes_relative_to_target() {
        let t = d("2020-09-01");
        let a = DateAnchor::Enacted;
        assert_eq!(classify(&[], t, a).unwrap(), ExposureClass::Never);
        assert_eq!(classify(&[&mask(3, "2020-09-01", None)], t, a).unwrap(), ExposureClass::Early);
        assert_eq!(classify(&[&mask(3, "2020-09-02", None)], t, a).unwrap(), ExposureClass::Late);
        assert_eq!(classify(&[&mask(2, "2020-07-01", None)], t, a).unwrap(), ExposureClass::Weaker);
        assert_eq!(classify(&[&mask(3, "2020-07-01", Some("2020-08-01"))], t, a).unwrap(), ExposureClass::Lapsed);
        // ending on the target date still counts as in place
        assert_eq!(classify(&[&mask(3, "2020-07-01", Some("2020-09-01"))], t, a).unwrap(), ExposureClass::Early);
    }

    #[test]
    fn contradictory_dates_are_rejected() {
        let mut p = mask(3, "2020-07-01", None);
        p.end = Some(d("2020-06-01"));
        assert!(classify(&[&p], d("2020-09-01"), DateAnchor::Enacted).is_err());
    }

    #[test]
    fn missing_target_date_is_an_error() {
        let r = build_exposure(&[], &["XX"], &BTreeMap::new(), DateAnchor::Enacted);
        assert!(matches!(r, Err(Error::State { .. })));
    }
}
