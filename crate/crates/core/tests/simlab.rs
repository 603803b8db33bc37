use roadmap_core::estimators::{fit_nuisance, EstimatorKind};
use roadmap_core::simlab::*;
use roadmap_core::stats::{mean, pearson};

fn mc_se(truth: &SimTruth) -> (f64, f64, f64) {
    match truth.method {
        TruthMethod::MonteCarlo { se_ey1, se_ey0, se_crd, .. } => (se_ey1, se_ey0, se_crd),
        TruthMethod::ClosedForm => panic!("expected a Monte Carlo truth"),
    }
}

#[test]
fn closed_form_truth_agrees_with_ten_million_draws() {
    for dgp in [confounded(), randomized_linear(), unmeasured_confounder()] {
        let exact = true_parameters(&dgp).unwrap();
        let mc = monte_carlo_truth(&dgp, 10_000_000, 42).unwrap();
        let (s1, s0, sd) = mc_se(&mc);
        assert!(s1 < 1e-3 && s0 < 1e-3 && sd < 1e-3);
        assert!((mc.ey1 - exact.ey1).abs() < 4.0 * s1 + 1e-12, "{}: ey1 {} vs {}", dgp.name, mc.ey1, exact.ey1);
        assert!((mc.ey0 - exact.ey0).abs() < 4.0 * s0 + 1e-12, "{}: ey0 {} vs {}", dgp.name, mc.ey0, exact.ey0);
        assert!((mc.crd - exact.crd).abs() < 4.0 * sd + 1e-12, "{}: crd {} vs {}", dgp.name, mc.crd, exact.crd);
    }
}

#[test]
fn randomized_linear_effect_is_its_coefficient() {
    let t = true_parameters(&randomized_linear()).unwrap();
    assert!((t.crd + 0.3).abs() < 1e-12);
    assert!((t.crr - t.ey1 / t.ey0).abs() < 1e-15);
}

#[test]
fn null_effect_has_equal_counterfactuals() {
    let s = generate(&null_effect(), 300, 5).unwrap();
    assert_eq!(s.y1, s.y0);
    let t = true_parameters(&null_effect()).unwrap();
    assert_eq!((t.crd, t.crr), (0.0, 1.0));
}

#[test]
fn observed_outcome_is_the_assigned_counterfactual() {
    for name in NAMED_DGPS {
        let s = generate(&named(name).unwrap(), 500, 9).unwrap();
        for i in 0..500 {
            let expected = if s.data.a[i] == 1 { s.y1[i] } else { s.y0[i] };
            assert_eq!(s.data.y[i], expected);
            assert!(s.data.y[i] >= 1.0);
            assert!(s.g1[i] > 0.0 && s.g1[i] < 1.0);
        }
    }
}

#[test]
fn samples_are_determined_by_the_seed() {
    let a = generate(&confounded(), 100, 3).unwrap();
    let b = generate(&confounded(), 100, 3).unwrap();
    let c = generate(&confounded(), 100, 4).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data.y, c.data.y);
}

#[test]
fn replicate_seeds_are_counter_based() {
    let seeds: Vec<u64> = (0..50).map(|r| replicate_seed(7, r)).collect();
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), 50);
    assert_eq!(replicate_seed(7, 31), seeds[31]);
    assert_ne!(replicate_seed(8, 0), seeds[0]);
}

#[test]
fn experiment_report_is_reproducible_and_consistent() {
    let config = ExperimentConfig::new(200, 12, 11, Scenario::BothCorrect);
    let a = run_experiment(&confounded(), &config).unwrap();
    let b = run_experiment(&confounded(), &config).unwrap();
    assert_eq!(a, b);
    for s in &a.summaries {
        for m in [s.rd, s.rr] {
            assert!((0.0..=1.0).contains(&m.coverage));
            // rmse^2 = bias^2 + (r - 1) / r * sd^2 exactly
            let r = a.replicates as f64;
            let rhs = m.bias * m.bias + (r - 1.0) / r * m.empirical_sd * m.empirical_sd;
            assert!((m.rmse * m.rmse - rhs).abs() < 1e-12);
        }
    }
    assert!(a.max_abs_score.unwrap() < 1e-8);
}

#[test]
fn replicate_can_be_regenerated_alone() {
    let config = ExperimentConfig::new(150, 4, 19, Scenario::BothCorrect);
    let report = run_experiment(&confounded(), &config).unwrap();
    let third = &report.outcomes[2];
    let sample = generate(&confounded(), 150, replicate_seed(19, 2)).unwrap();
    let u = roadmap_core::estimators::unadjusted_estimate(&sample.data).unwrap();
    let k = config.estimators.iter().position(|&e| e == EstimatorKind::Unadjusted).unwrap();
    assert_eq!(third.estimates[k].rd, u.rd);
}

#[test]
fn null_effect_estimates_center_on_zero() {
    // TMLE under confounding, and the unadjusted contrast under randomisation
    let config = ExperimentConfig::new(400, 80, 23, Scenario::BothCorrect);
    let confounded_null = run_experiment(&null_effect(), &config).unwrap();
    let tmle = confounded_null.summary(EstimatorKind::Tmle).unwrap();
    assert!(tmle.rd.bias.abs() < 3.0 * tmle.rd.bias_mc_se, "bias {} mc se {}", tmle.rd.bias, tmle.rd.bias_mc_se);

    let randomized_null = DgpSpec { treated_shift: 0.0, ..randomized_linear() };
    let report = run_experiment(&randomized_null, &config).unwrap();
    for kind in [EstimatorKind::Tmle, EstimatorKind::Unadjusted] {
        let s = report.summary(kind).unwrap();
        assert!(s.rd.bias.abs() < 3.0 * s.rd.bias_mc_se, "{kind:?}: bias {} mc se {}", s.rd.bias, s.rd.bias_mc_se);
    }
}

#[test]
fn unadjusted_contrast_is_biased_towards_zero_under_confounding() {
    let config = ExperimentConfig::new(500, 30, 2, Scenario::BothCorrect);
    let report = run_experiment(&confounded(), &config).unwrap();
    let tmle = report.summary(EstimatorKind::Tmle).unwrap();
    let unadjusted = report.summary(EstimatorKind::Unadjusted).unwrap();
    assert!(report.truth.crd < 0.0);
    assert!(unadjusted.rd.bias > 0.1);
    assert!(unadjusted.rd.bias.abs() > 5.0 * tmle.rd.bias.abs());
}

#[test]
fn fitted_propensity_tracks_the_truth() {
    let sample = generate(&confounded(), 2000, 8).unwrap();
    let config = ExperimentConfig::new(2000, 1, 8, Scenario::BothCorrect).nuisance_config();
    let fits = fit_nuisance(&sample.data, &config, 8).unwrap();
    let r = pearson(&fits.g1, &sample.g1).unwrap();
    assert!(r > 0.9, "correlation {r}");
}

#[test]
fn intervals_shrink_with_sample_size() {
    let width = |n: usize| {
        let config = ExperimentConfig { estimators: vec![EstimatorKind::Tmle], ..ExperimentConfig::new(n, 8, 5, Scenario::BothCorrect) };
        let report = run_experiment(&confounded(), &config).unwrap();
        report.summary(EstimatorKind::Tmle).unwrap().rd.mean_ci_width
    };
    let (small, large) = (width(1000), width(4000));
    assert!(large < 0.6 * small, "{large} vs {small}");
}

#[test]
fn latent_confounding_leaves_the_adjusted_functional_only() {
    let dgp = unmeasured_confounder();
    let truth = true_parameters(&dgp).unwrap();
    let estimand = statistical_estimand(&dgp, 1_000_000, 1).unwrap();
    assert!((estimand.crd - truth.crd).abs() > 0.05);
    let config = ExperimentConfig { estimators: vec![EstimatorKind::Tmle], ..ExperimentConfig::new(2000, 20, 6, Scenario::BothCorrect) };
    let report = run_experiment(&dgp, &config).unwrap();
    let rd: Vec<f64> = report.outcomes.iter().map(|o| o.estimates[0].rd).collect();
    let centre = mean(&rd);
    assert!((centre - estimand.crd).abs() < 0.02, "tmle {centre} vs functional {}", estimand.crd);
    assert!((centre - truth.crd).abs() > 0.04);
}

#[test]
fn scenario_names_round_trip() {
    for s in [Scenario::BothCorrect, Scenario::QMisspecified, Scenario::GMisspecified, Scenario::BothMisspecified] {
        assert_eq!(Scenario::parse(s.as_str()), Some(s));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, format!("\"{}\"", s.as_str()));
    }
}
