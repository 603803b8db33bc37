//! Acceptance checks. Prints one line per criterion and exits nonzero when an
//! evaluable criterion fails. Criteria that need the frozen data snapshot are
//! reported as failing but not evaluable when it is absent; point
//! `ROADMAP_SNAPSHOT_DIR` at a snapshot (or place one under `data/snapshot`)
//! to evaluate them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadmap_cli::config::{Overrides, RunConfig};
use roadmap_cli::pipeline::{build_datasets, CellResult, MANIFEST_FILE};
use roadmap_cli::report::{etable3, fmt2};
use roadmap_cli::{compute, run_pipeline, RunResults};
use roadmap_core::dataset::synthetic::{synthetic_snapshot, write_snapshot};
use roadmap_core::dataset::{Endpoint, ExposureClass, Snapshot};
use roadmap_core::estimators::{
    bound_outcome, gcomp_from_nuisance, tmle_estimate, unadjusted_estimate, EstimatorKind, NuisanceConfig,
    ObservedData, QMode,
};
use roadmap_core::learners::{Algorithm, Frame, LearnerSpec, Task, TreeParams};
use roadmap_core::simlab::{confounded, generate, replicate_seed, run_experiment, ExperimentConfig, ExperimentReport, Scenario};
use roadmap_core::stats::mean;
use roadmap_core::super_learner::{meta_objective, meta_weights, sl_fit, Loss, SuperLearnerConfig};

const SEED: u64 = 20200901;

enum Outcome {
    Pass(String),
    Fail(String),
    NotEvaluable(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn frozen_snapshot() -> Option<PathBuf> {
    let dir = std::env::var_os("ROADMAP_SNAPSHOT_DIR").map(PathBuf::from).unwrap_or_else(|| workspace().join("data/snapshot"));
    dir.join("panel.csv").is_file().then_some(dir)
}

fn shipped(name: &str, data_dir: &Path, overrides: Overrides) -> RunConfig {
    let o = Overrides { data_dir: Some(data_dir.to_path_buf()), output_dir: Some(std::env::temp_dir()), ..overrides };
    RunConfig::load(Some(&workspace().join("configs").join(name)), &o).expect("shipped config loads")
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// Criteria on the frozen snapshot.

fn exposure_reproduction(dir: &Path) -> Outcome {
    let start = Instant::now();
    let snapshot = match Snapshot::load(dir) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("snapshot does not load: {e}")),
    };
    let classes = |mode: &str| -> Result<BTreeMap<String, ExposureClass>, String> {
        let cfg = shipped(mode, dir, Overrides { horizons: Some(vec![21]), endpoints: Some(vec![Endpoint::Cases]), ..Overrides::default() });
        let ds = build_datasets(&cfg, &snapshot).map_err(|e| e.to_string())?;
        Ok(ds[0].metadata.exposure_classes.clone())
    };
    let (primary, secondary) = match (classes("primary.toml"), classes("secondary.toml")) {
        (Ok(p), Ok(s)) => (p, s),
        (Err(e), _) | (_, Err(e)) => return Outcome::Fail(e),
    };
    let count = |m: &BTreeMap<String, ExposureClass>, c: ExposureClass| m.values().filter(|&&v| v == c).count();
    let split = [ExposureClass::Early, ExposureClass::Never, ExposureClass::Weaker, ExposureClass::Late, ExposureClass::Lapsed]
        .map(|c| count(&primary, c));
    let early_sah: Vec<&str> =
        secondary.iter().filter(|(_, &c)| c == ExposureClass::Early).map(|(s, _)| s.as_str()).collect();
    let named = ["CT", "DE", "IL", "MA", "ME", "NM", "NY", "RI"];
    let elapsed = start.elapsed();
    check(
        split == [25, 7, 12, 6, 0] && early_sah == named && elapsed < Duration::from_secs(1),
        format!(
            "early/never/weaker/late/lapsed = {split:?}, secondary early = {early_sah:?}, {}",
            secs(elapsed)
        ),
    )
}

/// Printed unadjusted rows: early, delayed, RR, RD, each `(est, lo, hi)`.
type Row = [(f64, f64, f64); 4];

const UNADJUSTED_CASES: [Row; 4] = [
    [(1.13, 1.1, 1.16), (1.25, 1.2, 1.29), (0.91, 0.86, 0.95), (-0.12, -0.17, -0.06)],
    [(1.19, 1.15, 1.23), (1.39, 1.3, 1.47), (0.86, 0.8, 0.92), (-0.2, -0.29, -0.1)],
    [(1.33, 1.27, 1.4), (1.7, 1.52, 1.87), (0.79, 0.7, 0.88), (-0.36, -0.55, -0.18)],
    [(1.54, 1.44, 1.65), (2.16, 1.83, 2.49), (0.72, 0.61, 0.85), (-0.61, -0.96, -0.27)],
];

const UNADJUSTED_DEATHS: [Row; 4] = [
    [(1.1, 1.06, 1.15), (1.21, 1.15, 1.27), (0.91, 0.86, 0.98), (-0.1, -0.18, -0.03)],
    [(1.15, 1.08, 1.21), (1.32, 1.23, 1.41), (0.87, 0.8, 0.95), (-0.17, -0.28, -0.06)],
    [(1.22, 1.12, 1.32), (1.53, 1.36, 1.7), (0.8, 0.7, 0.92), (-0.31, -0.5, -0.11)],
    [(1.31, 1.17, 1.44), (1.85, 1.58, 2.12), (0.71, 0.59, 0.85), (-0.54, -0.84, -0.24)],
];

const HORIZONS: [u32; 4] = [21, 30, 45, 60];

fn unadjusted_reproduction(dir: &Path) -> Outcome {
    let start = Instant::now();
    let cfg = shipped("primary.toml", dir, Overrides { estimators: Some(vec![EstimatorKind::Unadjusted]), ..Overrides::default() });
    let results = match Snapshot::load(dir).map_err(|e| e.to_string()).and_then(|s| compute(&cfg, &s).map_err(|e| e.to_string())) {
        Ok((_, r)) => r,
        Err(e) => return Outcome::Fail(e),
    };
    let mut mismatches = Vec::new();
    for (endpoint, table) in [(Endpoint::Cases, &UNADJUSTED_CASES), (Endpoint::Deaths, &UNADJUSTED_DEATHS)] {
        for (h, printed) in HORIZONS.iter().zip(table) {
            let Some(e) = cell(&results, endpoint, *h).and_then(|c| c.estimate(EstimatorKind::Unadjusted)) else {
                mismatches.push(format!("{} {h}: missing", endpoint.as_str()));
                continue;
            };
            let ours = [(e.psi1, e.ci_psi1), (e.psi0, e.ci_psi0), (e.rr, e.ci_rr), (e.rd, e.ci_rd)];
            for (k, ((est, (lo, hi)), &(p, plo, phi))) in ours.iter().zip(printed).enumerate() {
                let point_ok = fmt2(*est) == fmt2(p);
                let ci_ok = (lo - plo).abs() <= 0.01 + 1e-9 && (hi - phi).abs() <= 0.01 + 1e-9;
                if !(point_ok && ci_ok) {
                    mismatches.push(format!("{} {h} column {k}: {est:.3} ({lo:.3}, {hi:.3}) vs {p} ({plo}, {phi})", endpoint.as_str()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches.is_empty() && elapsed < Duration::from_secs(10),
        if mismatches.is_empty() { format!("64 printed values matched, {}", secs(elapsed)) } else { mismatches.join("; ") },
    )
}

fn cell(results: &RunResults, endpoint: Endpoint, horizon: u32) -> Option<&CellResult> {
    results.cells.iter().find(|c| c.endpoint == endpoint && c.horizon_days == horizon)
}

fn tmle_reproduction(dir: &Path) -> (Outcome, Option<RunResults>) {
    let start = Instant::now();
    let cfg = shipped("primary.toml", dir, Overrides::default());
    let results = match Snapshot::load(dir).map_err(|e| e.to_string()).and_then(|s| compute(&cfg, &s).map_err(|e| e.to_string())) {
        Ok((_, r)) => r,
        Err(e) => return (Outcome::Fail(e), None),
    };
    let elapsed = start.elapsed();
    let rr = |e: Endpoint, h: u32| cell(&results, e, h).and_then(|c| c.estimate(EstimatorKind::Tmle)).map(|t| t.rr);
    let cases: Vec<f64> = HORIZONS.iter().filter_map(|&h| rr(Endpoint::Cases, h)).collect();
    let deaths60 = rr(Endpoint::Deaths, 60).unwrap_or(f64::NAN);
    let cases60 = cases.last().copied().unwrap_or(f64::NAN);
    let monotone = cases.len() == 4 && cases.windows(2).all(|w| w[1] <= w[0]);
    let ok = (cases60 - 0.91).abs() <= 0.05
        && (deaths60 - 0.84).abs() <= 0.07
        && monotone
        && elapsed < Duration::from_secs(300);
    (
        check(ok, format!("cases aRR by horizon {cases:.3?}, deaths 60-day aRR {deaths60:.3}, {}", secs(elapsed))),
        Some(results),
    )
}

fn propensity_diagnostics(results: &RunResults) -> Outcome {
    let (_, rows) = etable3(results);
    let format_ok = rows.len() == 8
        && rows.iter().all(|r| r.len() == 8 && r[2..].iter().all(|v| v.split_once('.').is_some_and(|(_, d)| d.len() == 3)));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut inside = true;
    for c in &results.cells {
        let Some((a, b)) = c.propensity_range else {
            inside = false;
            continue;
        };
        inside &= a > c.gbound && b < 1.0 - c.gbound;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    check(
        format_ok && inside && lo > 0.15 && hi < 0.90,
        format!("eTable 3 rows {}, propensity range ({lo:.3}, {hi:.3})", rows.len()),
    )
}

// Criteria on simulated and synthetic data.

fn synthetic_run(dir: &Path, threads: usize) -> BTreeMap<PathBuf, Vec<u8>> {
    let out = tempfile::tempdir().unwrap();
    let o = Overrides {
        seed: Some(SEED),
        data_dir: Some(dir.to_path_buf()),
        output_dir: Some(out.path().to_path_buf()),
        ..Overrides::default()
    };
    let cfg = RunConfig::load(None, &o).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_pipeline(&cfg)).unwrap();
    let mut files = BTreeMap::new();
    let mut stack = vec![out.path().to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.ends_with(MANIFEST_FILE) {
                files.insert(p.strip_prefix(out.path()).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn cell_scores(results: &RunResults) -> f64 {
    results
        .cells
        .iter()
        .filter_map(|c| c.tmle.as_ref())
        .flat_map(|d| d.score_means.iter().chain(&d.ic_means).map(|v| v.abs()))
        .fold(0.0, f64::max)
}

/// Scores and influence-curve means after targeting, over simulated samples of
/// every scenario plus any pipeline results given.
fn score_equations(experiments: &[&ExperimentReport], pipelines: &[&RunResults]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut runs = 0usize;
    for report in experiments {
        if let Some(s) = report.max_abs_score {
            worst = worst.max(s);
        }
        runs += report.replicates;
    }
    for scenario in [Scenario::BothCorrect, Scenario::QMisspecified, Scenario::GMisspecified, Scenario::BothMisspecified] {
        let config = ExperimentConfig::new(500, 10, SEED, scenario);
        let nuisance = config.nuisance_config();
        for r in 0..10 {
            let seed = replicate_seed(SEED, r);
            let sample = generate(&confounded(), 500, seed).unwrap();
            let (fit, _) = tmle_estimate(&sample.data, &nuisance, seed).unwrap();
            for v in fit.score_means.iter().chain(&[mean(&fit.estimate.ic1), mean(&fit.estimate.ic0)]) {
                worst = worst.max(v.abs());
            }
            runs += 1;
        }
    }
    for results in pipelines {
        worst = worst.max(cell_scores(results));
        runs += results.cells.len();
    }
    check(worst < 1e-8, format!("max |score| or |IC mean| {worst:.2e} over {runs} TMLE runs"))
}

/// Two binary covariates; exposure and outcome depend on the stratum.
fn discrete_data(n: usize, seed: u64) -> ObservedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut w1, mut w2, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let x1 = f64::from(u8::from(rng.random::<f64>() < 0.45));
        let x2 = f64::from(u8::from(rng.random::<f64>() < 0.55));
        let treat = u8::from(rng.random::<f64>() < 0.2 + 0.35 * x1 + 0.25 * x2);
        y.push(1.0 + 0.5 * x1 + 0.3 * x2 - 0.25 * f64::from(treat) + 0.1 * x1 * x2 + rng.random::<f64>());
        w1.push(x1);
        w2.push(x2);
        a.push(treat);
    }
    ObservedData::new(Frame::from_columns(vec![("w1".into(), w1), ("w2".into(), w2)]).unwrap(), a, y).unwrap()
}

fn stratified_oracle(data: &ObservedData) -> (f64, f64) {
    let key = |i: usize| (data.w.get(i, 0) as u8, data.w.get(i, 1) as u8);
    let mut psi = [0.0; 2];
    for s in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let rows: Vec<usize> = (0..data.n()).filter(|&i| key(i) == s).collect();
        let p = rows.len() as f64 / data.n() as f64;
        for arm in [0u8, 1] {
            let ys: Vec<f64> = rows.iter().filter(|&&i| data.a[i] == arm).map(|&i| data.y[i]).collect();
            psi[usize::from(arm)] += p * mean(&ys);
        }
    }
    (psi[1], psi[0])
}

fn single(algorithm: Algorithm, task: Task) -> SuperLearnerConfig {
    let loss = if task == Task::BinaryProbability { Loss::LogLoss } else { Loss::SquaredError };
    SuperLearnerConfig::with_library(vec![LearnerSpec::new(algorithm, task)], loss)
}

fn oracle_equivalence() -> Outcome {
    let tree = || Algorithm::RecursivePartitioningTree(TreeParams { max_depth: 3, min_leaf: 1 });
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let data = discrete_data(300 + 100 * seed as usize, seed);
        let (psi1, psi0) = stratified_oracle(&data);
        for q_mode in [QMode::Stratified, QMode::Pooled] {
            let config = NuisanceConfig {
                q: single(tree(), Task::Regression),
                g: single(tree(), Task::BinaryProbability),
                q_mode,
                ..NuisanceConfig::default()
            };
            let (tmle, nuisance) = tmle_estimate(&data, &config, seed).unwrap();
            let gcomp = gcomp_from_nuisance(&data, &nuisance).unwrap();
            for e in [&tmle.estimate, &gcomp] {
                worst = worst.max((e.psi1 - psi1).abs()).max((e.psi0 - psi0).abs());
            }
        }
    }
    check(worst < 1e-6, format!("max deviation from the stratified estimator {worst:.2e} over 5 datasets x 2 Q modes"))
}

fn empty_covariate_collapse() -> Outcome {
    let config = NuisanceConfig {
        q: single(Algorithm::EmpiricalMean, Task::Regression),
        g: single(Algorithm::EmpiricalMean, Task::BinaryProbability),
        ..NuisanceConfig::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let sample = generate(&confounded(), 50 + 20 * seed as usize, seed).unwrap();
        let n = sample.data.n();
        let data = ObservedData::new(Frame::empty(n), sample.data.a.clone(), sample.data.y.clone()).unwrap();
        let t = tmle_estimate(&data, &config, seed).unwrap().0.estimate;
        let u = unadjusted_estimate(&data).unwrap();
        for (x, y) in [(t.psi1, u.psi1), (t.psi0, u.psi0), (t.rr, u.rr), (t.rd, u.rd)] {
            worst = worst.max((x - y).abs());
        }
    }
    check(worst < 1e-8, format!("max |TMLE - unadjusted| {worst:.2e} over 5 datasets"))
}

fn double_robustness() -> (Outcome, Vec<ExperimentReport>) {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut reports = Vec::new();
    for scenario in [Scenario::QMisspecified, Scenario::GMisspecified] {
        let config = ExperimentConfig {
            estimators: vec![EstimatorKind::Tmle, EstimatorKind::Unadjusted],
            ..ExperimentConfig::new(2000, 200, SEED, scenario)
        };
        let report = run_experiment(&confounded(), &config).unwrap();
        let tmle = report.summary(EstimatorKind::Tmle).unwrap().rd.bias;
        let unadjusted = report.summary(EstimatorKind::Unadjusted).unwrap().rd.bias;
        ok &= tmle.abs() < 0.01 && unadjusted.abs() > 5.0 * tmle.abs();
        parts.push(format!("{}: TMLE bias {tmle:+.4}, unadjusted {unadjusted:+.4}", scenario.as_str()));
        reports.push(report);
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    (check(ok, format!("{}, {}", parts.join("; "), secs(elapsed))), reports)
}

fn coverage() -> (Outcome, ExperimentReport) {
    let start = Instant::now();
    let config = ExperimentConfig {
        estimators: vec![EstimatorKind::Tmle],
        ..ExperimentConfig::new(500, 500, SEED, Scenario::BothCorrect)
    };
    let report = run_experiment(&confounded(), &config).unwrap();
    let s = report.summary(EstimatorKind::Tmle).unwrap();
    let (rd, rr) = (s.rd.coverage, s.rr.coverage);
    let elapsed = start.elapsed();
    let inside = |c: f64| (0.90..=0.98).contains(&c);
    (
        check(inside(rd) && inside(rr) && elapsed < Duration::from_secs(600), format!("RD coverage {rd:.3}, RR coverage {rr:.3}, {}", secs(elapsed))),
        report,
    )
}

fn fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/two_learner_meta.csv");
    let mut reader = csv::Reader::from_path(path).unwrap();
    let mut z = vec![Vec::new(), Vec::new()];
    let mut y = Vec::new();
    for rec in reader.records() {
        let v: Vec<f64> = rec.unwrap().iter().map(|s| s.parse().unwrap()).collect();
        z[0].push(v[0]);
        z[1].push(v[1]);
        y.push(v[2]);
    }
    (z, y)
}

fn super_learner_properties() -> Outcome {
    let defaults = NuisanceConfig::default();
    let mut fits = 0;
    let mut failures = Vec::new();
    for seed in 0..6u64 {
        let sample = generate(&confounded(), 200, seed).unwrap();
        let (y_star, _) = bound_outcome(&sample.data.y).unwrap();
        let a = sample.data.a_f64();
        for (config, y, strata) in [(&defaults.q, &y_star, None), (&defaults.g, &a, Some(sample.data.a.as_slice()))] {
            let fit = sl_fit(config, &sample.data.w, y, strata, seed).unwrap();
            fits += 1;
            let simplex = fit.weights.iter().all(|&w| w >= 0.0) && (fit.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            let best = fit.cv_risk.learners.iter().copied().fold(f64::INFINITY, f64::min);
            if !simplex || fit.cv_risk.combined > best + 1e-12 {
                failures.push(format!("seed {seed}: weights {:?}, risk {} vs best {best}", fit.weights, fit.cv_risk.combined));
            }
        }
    }
    let (z, y) = fixture();
    let mut grid_gap: f64 = 0.0;
    for loss in [Loss::SquaredError, Loss::LogLoss] {
        let m = meta_weights(&z, &y, loss);
        let w = (0..=10_000)
            .map(|k| k as f64 / 10_000.0)
            .map(|w| (w, meta_objective(&z, &y, &[w, 1.0 - w], loss)))
            .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0;
        grid_gap = grid_gap.max((m.weights[0] - w).abs()).max((m.weights[1] - (1.0 - w)).abs());
    }
    check(
        failures.is_empty() && grid_gap <= 1e-3,
        if failures.is_empty() {
            format!("{fits} fits on the simplex with stacked risk <= best learner, fixture grid gap {grid_gap:.1e}")
        } else {
            failures.join("; ")
        },
    )
}

fn determinism(one: &BTreeMap<PathBuf, Vec<u8>>, three: &BTreeMap<PathBuf, Vec<u8>>) -> Outcome {
    let differing: Vec<String> = one
        .iter()
        .filter(|(k, v)| three.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .chain(three.keys().filter(|k| !one.contains_key(*k)).map(|k| k.display().to_string()))
        .collect();
    let config = ExperimentConfig::new(300, 12, SEED, Scenario::BothCorrect);
    let sim = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&confounded(), &config)).unwrap()
    };
    let sims_equal = sim(1) == sim(3);
    check(
        differing.is_empty() && sims_equal,
        format!("{} pipeline outputs compared, differing {differing:?}, simulation reports equal: {sims_equal}", one.len()),
    )
}

fn main() -> ExitCode {
    let mut lines: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut frozen_results = None;
    match frozen_snapshot() {
        Some(dir) => {
            lines.push((1, "exposure reproduction", exposure_reproduction(&dir)));
            lines.push((2, "unadjusted reproduction", unadjusted_reproduction(&dir)));
            let (outcome, results) = tmle_reproduction(&dir);
            lines.push((3, "TMLE reproduction", outcome));
            lines.push((
                4,
                "propensity diagnostics",
                match &results {
                    Some(r) => propensity_diagnostics(r),
                    None => Outcome::Fail("no TMLE results".into()),
                },
            ));
            frozen_results = results;
        }
        None => {
            for (k, name) in [(1, "exposure reproduction"), (2, "unadjusted reproduction"), (3, "TMLE reproduction"), (4, "propensity diagnostics")] {
                lines.push((k, name, Outcome::NotEvaluable("frozen snapshot absent".into())));
            }
        }
    }

    let snap = tempfile::tempdir().unwrap();
    write_snapshot(&synthetic_snapshot(SEED), snap.path()).unwrap();
    let synthetic = {
        let cfg = RunConfig::load(
            None,
            &Overrides { seed: Some(SEED), data_dir: Some(snap.path().to_path_buf()), ..Overrides::default() },
        )
        .unwrap();
        compute(&cfg, &Snapshot::load(snap.path()).unwrap()).unwrap().1
    };
    let (dr, dr_reports) = double_robustness();
    let (cov, cov_report) = coverage();
    let mut experiments: Vec<&ExperimentReport> = dr_reports.iter().collect();
    experiments.push(&cov_report);
    let mut pipelines = vec![&synthetic];
    pipelines.extend(frozen_results.as_ref());
    lines.push((5, "score equations", score_equations(&experiments, &pipelines)));
    lines.push((6, "oracle equivalence", oracle_equivalence()));
    lines.push((7, "empty-covariate collapse", empty_covariate_collapse()));
    lines.push((8, "double robustness", dr));
    lines.push((9, "CI coverage", cov));
    lines.push((10, "Super Learner properties", super_learner_properties()));
    let (one, three) = (synthetic_run(snap.path(), 1), synthetic_run(snap.path(), 3));
    lines.push((11, "determinism", determinism(&one, &three)));

    lines.sort_by_key(|l| l.0);
    let mut failed = false;
    for (k, name, outcome) in &lines {
        let status = match outcome {
            Outcome::Pass(d) => format!("PASS ({d})"),
            Outcome::Fail(d) => {
                failed = true;
                format!("FAIL ({d})")
            }
            Outcome::NotEvaluable(why) => format!("FAIL (not evaluable: {why})"),
        };
        println!("criterion {k:>2} {name}: {status}");
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
