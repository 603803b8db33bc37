//! Synthetic snapshots for tests and demonstrations.
//!
//! The values are drawn from a simple epidemic model with confounded mandate
//! adoption. They have the shape of a real snapshot but carry no information
//! about any real state.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use super::snapshot::{
    PanelRow, PolicyKind, PolicyRecord, Snapshot, StatePanel, StaticRow, PANEL_FILE, PANEL_HEADER, POLICIES_FILE,
    POLICIES_HEADER, STATIC_COLUMNS, STATIC_FILE, URBAN_COLUMN,
};
use super::{date, write_atomic, STATES};
use crate::error::{Error, Result};
use crate::stats::expit;

/// First and last dates of a synthetic panel.
pub fn synthetic_window() -> (NaiveDate, NaiveDate) {
    (date(2020, 3, 1), date(2020, 12, 31))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn day_between(rng: &mut ChaCha8Rng, lo: NaiveDate, hi: NaiveDate) -> NaiveDate {
    let span = (hi - lo).num_days();
    lo + Duration::days(rng.random_range(0..=span))
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn record(state: &str, kind: PolicyKind, level: Option<u8>, start: NaiveDate, stop: Option<NaiveDate>) -> PolicyRecord {
    PolicyRecord {
        state: state.to_string(),
        kind,
        mask_level: level,
        issued: Some(start - Duration::days(2)),
        enacted: Some(start),
        expired: None,
        end: stop,
    }
}

/// A complete 50-state snapshot drawn from `seed`.
pub fn synthetic_snapshot(seed: u64) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (first, last) = synthetic_window();
    let mut snap = Snapshot::default();
    let density_law = LogNormal::new(40f64.ln(), 1.0).expect("valid lognormal");
    let population_law = LogNormal::new(4.5e6f64.ln(), 0.9).expect("valid lognormal");

    for (k, st) in STATES.iter().enumerate() {
        let st = *st;
        let density = round1(density_law.sample(&mut rng).clamp(0.5, 500.0));
        let population = population_law.sample(&mut rng).clamp(5.0e5, 4.0e7).round();
        let republican = f64::from(u8::from(rng.random::<f64>() < 0.6));
        let black = round1(uniform(&mut rng, 1.0, 35.0));
        let hispanic = round1(uniform(&mut rng, 2.0, 40.0));
        let asian = round1(uniform(&mut rng, 1.0, 10.0));
        let mixed = round1(uniform(&mut rng, 1.5, 4.0));
        let white = round1((100.0 - black - hispanic - asian - mixed).max(5.0));
        let transit = round1(uniform(&mut rng, 0.3, 10.0));
        let values: Vec<(&str, f64)> = vec![
            ("pct_age_over_65", round1(uniform(&mut rng, 11.0, 21.0))),
            ("pct_black", black),
            ("pct_hispanic", hispanic),
            ("pct_asian", asian),
            ("pct_mixed_race", mixed),
            ("pct_white", white),
            ("median_age", round1(uniform(&mut rng, 31.0, 45.0))),
            ("pct_households_below_poverty", round1(uniform(&mut rng, 8.0, 20.0))),
            ("pct_people_below_poverty", round1(uniform(&mut rng, 7.0, 19.0))),
            ("pct_smokers", round1(uniform(&mut rng, 9.0, 25.0))),
            ("pct_diabetic", round1(uniform(&mut rng, 7.0, 15.0))),
            ("population_density", density),
            ("pct_commute_drive", round1(uniform(&mut rng, 70.0, 85.0))),
            ("pct_commute_work_from_home", round1(uniform(&mut rng, 3.0, 8.0))),
            ("pct_commute_public_transit", transit),
            ("pct_commute_bike", round1(uniform(&mut rng, 0.1, 2.0))),
            ("pct_commute_walk", round1(uniform(&mut rng, 1.0, 6.0))),
            ("pct_commute_other", round1(uniform(&mut rng, 0.5, 2.0))),
            ("total_population", population),
            ("republican", republican),
        ];
        debug_assert_eq!(values.len(), STATIC_COLUMNS.len());
        snap.statics.insert(
            st.to_string(),
            StaticRow {
                values: values.into_iter().map(|(c, v)| (c.to_string(), Some(v))).collect(),
                urban: Some(round1(uniform(&mut rng, 40.0, 95.0))),
            },
        );

        // mandate adoption depends on density and voting
        let score = -0.2 + 0.6 * (density / 40.0).ln() - 1.0 * (republican - 0.6);
        let u: f64 = rng.random();
        let mask_start = if u < expit(score) {
            Some(day_between(&mut rng, date(2020, 4, 15), date(2020, 8, 25)))
        } else if u < expit(score) + 0.3 * (1.0 - expit(score)) {
            Some(day_between(&mut rng, date(2020, 9, 10), date(2020, 11, 25)))
        } else {
            None
        };
        if let Some(s) = mask_start {
            snap.policies.push(record(st, PolicyKind::PublicMasking, Some(3), s, None));
        } else if rng.random::<f64>() < 0.6 {
            let s = day_between(&mut rng, date(2020, 5, 1), date(2020, 8, 1));
            let level = rng.random_range(1..=2);
            snap.policies.push(record(st, PolicyKind::PublicMasking, Some(level), s, None));
        }

        let mut sah_window = None;
        // one state always issues an order and leaves it open
        if rng.random::<f64>() < 0.86 || k == 7 {
            let s = day_between(&mut rng, date(2020, 3, 19), date(2020, 4, 7));
            let stop = if k == 7 { None } else { Some(day_between(&mut rng, date(2020, 4, 25), date(2020, 6, 15))) };
            snap.policies.push(record(st, PolicyKind::StayAtHome, None, s, stop));
            sah_window = Some((s, stop.unwrap_or(last)));
        }
        for (kind, p) in [
            (PolicyKind::GatheringRestriction, 0.98),
            (PolicyKind::RestaurantRestriction, 0.9),
            (PolicyKind::BusinessClosureNonessential, 0.8),
            (PolicyKind::BusinessClosureOther, 0.7),
        ] {
            if rng.random::<f64>() < p {
                let s = day_between(&mut rng, date(2020, 3, 12), date(2020, 4, 1));
                let stop = day_between(&mut rng, date(2020, 5, 1), date(2020, 7, 1));
                snap.policies.push(record(st, kind, None, s, Some(stop)));
            }
        }
        for (kind, p) in [(PolicyKind::BusinessMasking, 0.6), (PolicyKind::SchoolMasking, 0.55)] {
            if rng.random::<f64>() < p {
                let s = day_between(&mut rng, date(2020, 5, 1), date(2020, 8, 20));
                snap.policies.push(record(st, kind, Some(rng.random_range(1..=3)), s, None));
            }
        }

        // daily growth: an early wave, a summer lull and a fall wave
        let base = uniform(&mut rng, 0.7, 1.3);
        let fall = uniform(&mut rng, 0.6, 1.4) * (1.0 + 0.4 * republican);
        let test_ratio = uniform(&mut rng, 8.0, 20.0);
        let fatality = uniform(&mut rng, 0.01, 0.025);
        let mobility_base = uniform(&mut rng, 5.0, 10.0);
        let mut cases = (population * uniform(&mut rng, 1e-5, 5e-5)).max(5.0);
        let mut history: Vec<f64> = Vec::new();
        let mut deaths = 1u64;
        let mut tests = (cases * test_ratio) as u64;
        let mut panel = StatePanel { state: st.to_string(), series: BTreeMap::new() };
        let mut d = first;
        let mut t = 0usize;
        while d <= last {
            let td = t as f64;
            let mut rate = base * (0.25 * (-td / 20.0).exp() + 0.006) + fall * 0.012 * expit((td - 200.0) / 15.0);
            if mask_start.is_some_and(|s| s <= d) {
                rate *= 0.8;
            }
            if sah_window.is_some_and(|(s, e)| s <= d && d <= e) {
                rate *= 0.85;
            }
            if t > 0 {
                let expected = cases * rate;
                let new = Poisson::new(expected.max(1e-9)).map(|p| p.sample(&mut rng)).unwrap_or(expected.round());
                cases += new;
                let lagged = if t >= 14 { history[t - 14] } else { 0.0 };
                deaths = deaths.max(1 + (fatality * lagged) as u64);
                tests += ((new * test_ratio) as u64).max(100);
            }
            history.push(cases);
            let in_sah = sah_window.is_some_and(|(s, e)| s <= d && d <= e);
            let mobility = (mobility_base + if in_sah { 8.0 } else { 0.0 } + uniform(&mut rng, -2.0, 2.0)).round();
            panel.series.insert(
                d,
                PanelRow {
                    cum_cases: cases as u64,
                    cum_deaths: deaths,
                    cum_tests: Some(tests),
                    mobility_residential_pct: Some(mobility),
                },
            );
            d += Duration::days(1);
            t += 1;
        }
        snap.panels.insert(st.to_string(), panel);
    }
    snap
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let err = |e: csv::Error| Error::Data(format!("writing snapshot CSV: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("writing snapshot CSV: {e}")))
}

/// Write `snapshot` as the three CSV files [`Snapshot::load`] reads.
pub fn write_snapshot(snapshot: &Snapshot, dir: &Path) -> Result<()> {
    let panel = csv_bytes(
        &PANEL_HEADER,
        snapshot.panels.iter().flat_map(|(st, p)| {
            p.series.iter().map(move |(d, r)| {
                vec![
                    st.clone(),
                    d.to_string(),
                    r.cum_cases.to_string(),
                    r.cum_deaths.to_string(),
                    opt(r.cum_tests),
                    opt(r.mobility_residential_pct),
                ]
            })
        }),
    )?;
    write_atomic(&dir.join(PANEL_FILE), &panel)?;

    let policies = csv_bytes(
        &POLICIES_HEADER,
        snapshot.policies.iter().map(|p| {
            vec![
                p.state.clone(),
                p.kind.as_str().to_string(),
                opt(p.mask_level),
                opt(p.issued),
                opt(p.enacted),
                opt(p.expired),
                opt(p.end),
            ]
        }),
    )?;
    write_atomic(&dir.join(POLICIES_FILE), &policies)?;

    let with_urban = snapshot.statics.values().any(|r| r.urban.is_some());
    let mut header = vec!["state"];
    header.extend(STATIC_COLUMNS);
    if with_urban {
        header.push(URBAN_COLUMN);
    }
    let statics = csv_bytes(
        &header,
        snapshot.statics.iter().map(|(st, r)| {
            let mut row = vec![st.clone()];
            row.extend(STATIC_COLUMNS.iter().map(|c| opt(r.values.get(*c).copied().flatten())));
            if with_urban {
                row.push(opt(r.urban));
            }
            row
        }),
    )?;
    write_atomic(&dir.join(STATIC_FILE), &statics)
}
