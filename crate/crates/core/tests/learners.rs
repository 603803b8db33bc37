use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadmap_core::learners::{
    fit_learner, screen_correlation, Algorithm, BoostParams, FittedModel, Frame, LearnerSpec, MarsParams, Node,
    ScreenSpec, SplineParams, Task, TreeParams,
};
use roadmap_core::stats::correlation_p_value;

fn random_frame(n: usize, p: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (0..p).map(|j| (format!("x{j}"), (0..n).map(|_| rng.random::<f64>()).collect())).collect();
    Frame::from_columns(cols).unwrap()
}

fn all_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::EmpiricalMean,
        Algorithm::AdditiveSplineRegression(SplineParams::default()),
        Algorithm::RecursivePartitioningTree(TreeParams::default()),
        Algorithm::GradientBoostedTrees(BoostParams { rounds: 30, ..BoostParams::default() }),
        Algorithm::MultivariateAdaptiveRegressionSplines(MarsParams::default()),
    ]
}

fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let svd = design.clone().svd(true, true);
    let beta = svd.solve(&DVector::from_column_slice(y), 1e-12).unwrap();
    (design * beta).iter().copied().collect()
}

#[test]
fn mean_learner_is_constant() {
    let x = random_frame(3, 2, 1);
    let f = fit_learner(&LearnerSpec::new(Algorithm::EmpiricalMean, Task::Continuous), &x, &[1.0, 2.0, 3.0]).unwrap();
    let other = random_frame(7, 2, 2);
    assert_eq!(f.predict(&other).unwrap(), vec![2.0; 7]);
}

#[test]
fn depth_one_tree_fits_a_step() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let y: Vec<f64> = xs.iter().map(|&v| if v < 0.4 { 0.2 } else { 0.9 }).collect();
    let x = Frame::from_columns(vec![("x".into(), xs)]).unwrap();
    let spec = LearnerSpec::new(
        Algorithm::RecursivePartitioningTree(TreeParams { max_depth: 1, min_leaf: 1 }),
        Task::Regression,
    );
    let pred = fit_learner(&spec, &x, &y).unwrap().predict(&x).unwrap();
    let mse: f64 = pred.iter().zip(&y).map(|(p, v)| (p - v).powi(2)).sum::<f64>() / y.len() as f64;
    assert!(mse < 1e-30, "training mse {mse}");
}

#[test]
fn spline_reproduces_a_line_like_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = xs.iter().map(|v| 3.0 * v).collect();
    let x = Frame::from_columns(vec![("x".into(), xs.clone())]).unwrap();
    let spec = LearnerSpec::new(Algorithm::AdditiveSplineRegression(SplineParams::default()), Task::Continuous);
    let pred = fit_learner(&spec, &x, &y).unwrap().predict(&x).unwrap();
    // the exact least-squares fit on any basis spanning {1, x} is y itself
    let design = DMatrix::from_fn(xs.len(), 2, |i, k| if k == 0 { 1.0 } else { xs[i] });
    let oracle = least_squares(&design, &y);
    for i in 0..y.len() {
        assert!((pred[i] - oracle[i]).abs() < 1e-8, "row {i}: {} vs {}", pred[i], oracle[i]);
        assert!((pred[i] - y[i]).abs() < 1e-8);
    }
}

#[test]
fn tree_prediction_is_the_mean_of_its_leaf() {
    let x = random_frame(60, 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..60).map(|i| (x.get(i, 0) + 0.5 * x.get(i, 1) + 0.1 * rng.random::<f64>()) / 1.6).collect();
    let spec = LearnerSpec::new(Algorithm::RecursivePartitioningTree(TreeParams::default()), Task::Regression);
    let fitted = fit_learner(&spec, &x, &y).unwrap();
    let FittedModel::Tree(tree) = &fitted.model else { panic!("expected a tree") };
    let pred = fitted.predict(&x).unwrap();

    // trace every training row through the split list by hand
    let trace = |row: &[f64]| -> usize {
        let mut at = 0;
        while let Node::Split { feature, threshold, left, right } = &tree.nodes()[at] {
            at = if row[*feature] <= *threshold { *left } else { *right };
        }
        at
    };
    let leaves: Vec<usize> = (0..60).map(|i| trace(&x.row(i))).collect();
    for i in 0..60 {
        let members: Vec<f64> = (0..60).filter(|&j| leaves[j] == leaves[i]).map(|j| y[j]).collect();
        let leaf_mean = members.iter().sum::<f64>() / members.len() as f64;
        assert!((pred[i] - leaf_mean).abs() < 1e-12);
        assert!(members.len() >= 5);
    }
}

#[test]
fn single_hinge_pair_mars_is_least_squares_on_its_hinges() {
    let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
    let y: Vec<f64> = xs.iter().map(|&v| 0.2 + 0.1 * v + 1.5 * (v - 0.6).max(0.0)).collect();
    let x = Frame::from_columns(vec![("x".into(), xs.clone())]).unwrap();
    let params = MarsParams { max_terms: 3, prune: false, ..MarsParams::default() };
    let spec = LearnerSpec::new(Algorithm::MultivariateAdaptiveRegressionSplines(params), Task::Continuous);
    let fitted = fit_learner(&spec, &x, &y).unwrap();
    let FittedModel::Mars(model) = &fitted.model else { panic!("expected MARS") };
    assert!(model.terms.len() <= 2);
    let knot = model.terms[0].knot;
    assert!(model.terms.iter().all(|h| h.knot == knot));

    let hinge_design = |k: f64| {
        DMatrix::from_fn(xs.len(), 3, |i, c| match c {
            0 => 1.0,
            1 => (xs[i] - k).max(0.0),
            _ => (k - xs[i]).max(0.0),
        })
    };
    let rss = |fit: &[f64]| fit.iter().zip(&y).map(|(f, v)| (f - v).powi(2)).sum::<f64>();
    let pred = fitted.predict(&x).unwrap();
    let oracle = least_squares(&hinge_design(knot), &y);
    for i in 0..y.len() {
        assert!((pred[i] - oracle[i]).abs() < 1e-9);
    }
    // no interior knot does better
    let best = xs[1..xs.len() - 1].iter().map(|&k| rss(&least_squares(&hinge_design(k), &y))).fold(f64::INFINITY, f64::min);
    assert!(rss(&pred) <= best + 1e-12);
    assert!((knot - 0.6).abs() < 1e-12);
}

#[test]
fn boosting_training_loss_never_increases() {
    let x = random_frame(80, 3, 6);
    let y: Vec<f64> = (0..80).map(|i| (x.get(i, 0) * x.get(i, 1) + 0.3 * x.get(i, 2)).min(1.0)).collect();
    let spec = LearnerSpec::new(Algorithm::GradientBoostedTrees(BoostParams::default()), Task::Regression);
    let FittedModel::Boost(m) = fit_learner(&spec, &x, &y).unwrap().model else { panic!("expected boosting") };
    assert_eq!(m.train_loss.len(), 101);
    assert!(m.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-15));

    let labels: Vec<f64> = (0..80).map(|i| f64::from(u8::from(x.get(i, 0) + 0.3 * x.get(i, 1) > 0.6))).collect();
    let spec = LearnerSpec::new(Algorithm::GradientBoostedTrees(BoostParams::default()), Task::BinaryProbability);
    let FittedModel::Boost(m) = fit_learner(&spec, &x, &labels).unwrap().model else { panic!("expected boosting") };
    assert!(m.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn screening_p_value_matches_integrated_t_density() {
    // two-sided p-value of r with n - 2 degrees of freedom, integrating the
    // Student t density numerically
    let t_tail = |t: f64, df: f64| {
        let log_c = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let density = |u: f64| (log_c - (df + 1.0) / 2.0 * (1.0 + u * u / df).ln()).exp();
        // Simpson on [0, |t|]
        let m = 20_000;
        let h = t.abs() / m as f64;
        let mut s = density(0.0) + density(t.abs());
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * density(k as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    };
    for (r, n) in [(0.3, 50usize), (-0.45, 20), (0.05, 50), (0.8, 10)] {
        let df = (n - 2) as f64;
        let t = r * (df / (1.0 - r * r)).sqrt();
        let oracle = t_tail(t, df);
        assert!((correlation_p_value(r, n) - oracle).abs() < 1e-8, "r {r} n {n}");
    }
}

#[test]
fn screening_keeps_informative_columns() {
    let x = random_frame(50, 4, 7);
    let y: Vec<f64> = (0..50).map(|i| x.get(i, 2)).collect();
    let mask = screen_correlation(&x, &y, 0.1, 1).unwrap();
    assert!(mask[2]);
    // min_keep tops up with the strongest remaining columns
    let mask = screen_correlation(&x, &y, 1e-12, 3).unwrap();
    assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
}

#[test]
fn missing_retained_column_is_an_error() {
    let x = random_frame(30, 2, 8);
    let y: Vec<f64> = (0..30).map(|i| x.get(i, 0)).collect();
    let spec = LearnerSpec::new(Algorithm::RecursivePartitioningTree(TreeParams::default()), Task::Regression);
    let fitted = fit_learner(&spec, &x, &y).unwrap();
    let narrow = Frame::from_columns(vec![("x1".into(), x.column(1))]).unwrap();
    assert!(fitted.predict(&narrow).is_err());
}

#[test]
fn constant_response_tree_is_constant() {
    let x = random_frame(20, 2, 9);
    let spec = LearnerSpec::new(Algorithm::RecursivePartitioningTree(TreeParams::default()), Task::Regression);
    let pred = fit_learner(&spec, &x, &[0.4; 20]).unwrap().predict(&x).unwrap();
    assert!(pred.iter().all(|&p| (p - 0.4).abs() < 1e-15));
}

fn frame_and_response(n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), n), prop::collection::vec(0.0f64..1.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn screening_ignores_affine_rescaling(
        (rows, y) in frame_and_response(30),
        scale in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        shift in -100.0f64..100.0,
        col in 0usize..3,
    ) {
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let x = Frame::from_rows(names.clone(), &rows).unwrap();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| {
            let mut r = r.clone();
            r[col] = scale * r[col] + shift;
            r
        }).collect();
        let x2 = Frame::from_rows(names, &moved).unwrap();
        prop_assert_eq!(screen_correlation(&x, &y, 0.2, 1).unwrap(), screen_correlation(&x2, &y, 0.2, 1).unwrap());
    }

    #[test]
    fn predictions_stay_in_range_and_are_row_independent(
        (rows, y) in frame_and_response(25),
        perm_seed in any::<u64>(),
    ) {
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let x = Frame::from_rows(names.clone(), &rows).unwrap();
        let labels: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v > 0.5))).collect();
        let mut order: Vec<usize> = (0..25).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..25).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let permuted = x.rows(&order);
        for algorithm in all_algorithms() {
            for (task, resp) in [(Task::Regression, &y), (Task::BinaryProbability, &labels)] {
                if task == Task::BinaryProbability && (labels.iter().all(|&v| v == 1.0) || labels.iter().all(|&v| v == 0.0)) {
                    continue;
                }
                let spec = LearnerSpec::new(algorithm.clone(), task);
                let fitted = fit_learner(&spec, &x, resp).unwrap();
                let p = fitted.predict(&x).unwrap();
                prop_assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
                let q = fitted.predict(&permuted).unwrap();
                for (k, &i) in order.iter().enumerate() {
                    prop_assert_eq!(q[k].to_bits(), p[i].to_bits());
                }
                let again = fit_learner(&spec, &x, resp).unwrap().predict(&x).unwrap();
                prop_assert_eq!(&again, &p);
            }
        }
    }

    #[test]
    fn screened_learners_fit_on_retained_columns_only((rows, y) in frame_and_response(30)) {
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let x = Frame::from_rows(names, &rows).unwrap();
        prop_assume!(y.iter().any(|&v| (v - y[0]).abs() > 1e-9));
        let spec = LearnerSpec::new(Algorithm::AdditiveSplineRegression(SplineParams::default()), Task::Regression)
            .screened(ScreenSpec { alpha: 0.1, min_keep: 1 });
        let fitted = fit_learner(&spec, &x, &y).unwrap();
        let mask = screen_correlation(&x, &y, 0.1, 1).unwrap();
        let kept: Vec<String> = fitted.training_columns.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| c.clone()).collect();
        prop_assert_eq!(fitted.retained_columns.clone(), kept);
    }
}
