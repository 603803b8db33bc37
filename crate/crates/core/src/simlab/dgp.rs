//! Structural equations with known counterfactual means.
//!
//! `W_j` are independent draws from their laws. The exposure follows a
//! constant or logistic-additive propensity, optionally shifted by a binary
//! latent `U` that also enters the outcome. Counterfactual outcomes are
//!
//! `Y_a = 1 + m_a(W) + c_U U + e`, with `m_1 = scale * m_0 + shift`,
//!
//! where `m_0` is an additive function of `W` and `e` non-negative noise
//! shared by both arms. Every piece has closed-form moments, so the true
//! counterfactual means are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as NormalDist};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimators::ObservedData;
use crate::learners::Frame;
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

/// Shape of one additive term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Form {
    Linear,
    Square,
    /// `sin(pi x)`.
    Sine,
    /// `max(0, x - knot)`.
    Hinge { knot: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub covariate: usize,
    pub coef: f64,
    #[serde(flatten)]
    pub form: Form,
}

/// `intercept + sum coef * form(W_covariate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Additive {
    pub intercept: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
}

impl Additive {
    pub fn eval(&self, w: &[f64]) -> f64 {
        self.intercept + self.terms.iter().map(|t| t.coef * form_value(t.form, w[t.covariate])).sum::<f64>()
    }

    fn expectation(&self, laws: &[CovariateLaw]) -> f64 {
        self.intercept + self.terms.iter().map(|t| t.coef * form_moment(t.form, laws[t.covariate])).sum::<f64>()
    }
}

fn form_value(form: Form, x: f64) -> f64 {
    match form {
        Form::Linear => x,
        Form::Square => x * x,
        Form::Sine => (PI * x).sin(),
        Form::Hinge { knot } => (x - knot).max(0.0),
    }
}

fn form_moment(form: Form, law: CovariateLaw) -> f64 {
    match (form, law) {
        (Form::Linear, CovariateLaw::Uniform { lo, hi }) => 0.5 * (lo + hi),
        (Form::Linear, CovariateLaw::Normal { mean, .. }) => mean,
        (Form::Square, CovariateLaw::Uniform { lo, hi }) => (lo * lo + lo * hi + hi * hi) / 3.0,
        (Form::Square, CovariateLaw::Normal { mean, sd }) => mean * mean + sd * sd,
        (Form::Sine, CovariateLaw::Uniform { lo, hi }) => ((PI * lo).cos() - (PI * hi).cos()) / (PI * (hi - lo)),
        (Form::Sine, CovariateLaw::Normal { mean, sd }) => (PI * mean).sin() * (-0.5 * PI * PI * sd * sd).exp(),
        (Form::Hinge { knot }, CovariateLaw::Uniform { lo, hi }) => {
            if knot <= lo {
                0.5 * (lo + hi) - knot
            } else if knot >= hi {
                0.0
            } else {
                (hi - knot).powi(2) / (2.0 * (hi - lo))
            }
        }
        (Form::Hinge { knot }, CovariateLaw::Normal { mean, sd }) => {
            let z = (knot - mean) / sd;
            let std = NormalDist::new(0.0, 1.0).expect("standard normal");
            (mean - knot) * (1.0 - std.cdf(z)) + sd * std.pdf(z)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureModel {
    Constant { p: f64 },
    /// `P(A = 1 | W, U) = expit(linear(W) + latent_coef * U)`.
    Logistic { linear: Additive },
}

/// Binary latent confounder `U ~ Bernoulli(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub p: f64,
    pub exposure_coef: f64,
    pub outcome_coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    None,
    Exponential { mean: f64 },
}

impl NoiseLaw {
    fn mean(self) -> f64 {
        match self {
            NoiseLaw::None => 0.0,
            NoiseLaw::Exponential { mean } => mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub covariates: Vec<CovariateLaw>,
    pub exposure: ExposureModel,
    /// `m_0(W)`; must be non-negative.
    pub baseline: Additive,
    pub treated_scale: f64,
    pub treated_shift: f64,
    pub noise: NoiseLaw,
    #[serde(default)]
    pub latent: Option<Latent>,
}

/// True counterfactual means and contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub ey1: f64,
    pub ey0: f64,
    pub crr: f64,
    pub crd: f64,
    pub method: TruthMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TruthMethod {
    ClosedForm,
    /// Standard errors refer to `ey1`, `ey0` and `crd`.
    MonteCarlo { draws: usize, seed: u64, se_ey1: f64, se_ey0: f64, se_crd: f64 },
}

impl SimTruth {
    fn new(ey1: f64, ey0: f64, method: TruthMethod) -> Self {
        SimTruth { ey1, ey0, crr: ey1 / ey0, crd: ey1 - ey0, method }
    }
}

/// A generated sample together with its counterfactuals.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub data: ObservedData,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    /// True propensity `P(A = 1 | W)` after marginalising any latent.
    pub g1: Vec<f64>,
}

struct Draw {
    w: Vec<f64>,
    a: u8,
    y1: f64,
    y0: f64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let dims = self.covariates.len();
        let check_terms = |f: &Additive| f.terms.iter().all(|t| t.covariate < dims);
        let ok_exposure = match &self.exposure {
            ExposureModel::Constant { p } => *p > 0.0 && *p < 1.0,
            ExposureModel::Logistic { linear } => check_terms(linear),
        };
        if !ok_exposure || !check_terms(&self.baseline) {
            return Err(Error::Config(format!("DGP {}: exposure probability or term index invalid", self.name)));
        }
        for law in &self.covariates {
            let ok = match *law {
                CovariateLaw::Uniform { lo, hi } => hi > lo,
                CovariateLaw::Normal { sd, .. } => sd > 0.0,
            };
            if !ok {
                return Err(Error::Config(format!("DGP {}: degenerate covariate law", self.name)));
            }
        }
        if let Some(l) = self.latent {
            if !(l.p > 0.0 && l.p < 1.0) {
                return Err(Error::Config(format!("DGP {}: latent probability must be in (0, 1)", self.name)));
            }
        }
        if let NoiseLaw::Exponential { mean } = self.noise {
            if !(mean > 0.0) {
                return Err(Error::Config(format!("DGP {}: noise mean must be positive", self.name)));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..=self.dimension()).map(|j| format!("W{j}")).collect()
    }

    /// `P(A = 1 | W, U)`.
    pub fn propensity(&self, w: &[f64], u: f64) -> f64 {
        match &self.exposure {
            ExposureModel::Constant { p } => *p,
            ExposureModel::Logistic { linear } => {
                let shift = self.latent.map_or(0.0, |l| l.exposure_coef * u);
                expit(linear.eval(w) + shift)
            }
        }
    }

    /// `P(A = 1 | W)` with the latent integrated out.
    pub fn marginal_propensity(&self, w: &[f64]) -> f64 {
        match self.latent {
            None => self.propensity(w, 0.0),
            Some(l) => l.p * self.propensity(w, 1.0) + (1.0 - l.p) * self.propensity(w, 0.0),
        }
    }

    /// `m_a(W)`.
    pub fn outcome_mean(&self, w: &[f64], a: u8) -> f64 {
        let m0 = self.baseline.eval(w);
        if a == 1 {
            self.treated_scale * m0 + self.treated_shift
        } else {
            m0
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Draw> {
        let w: Vec<f64> = self
            .covariates
            .iter()
            .map(|law| match *law {
                CovariateLaw::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
                CovariateLaw::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            })
            .collect();
        let u = match self.latent {
            Some(l) => f64::from(u8::from(rng.random::<f64>() < l.p)),
            None => 0.0,
        };
        let p = self.propensity(&w, u);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Simulation(format!("DGP {}: propensity {p} outside (0, 1)", self.name)));
        }
        let a = u8::from(rng.random::<f64>() < p);
        let e = match self.noise {
            NoiseLaw::None => 0.0,
            NoiseLaw::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
        };
        let latent = self.latent.map_or(0.0, |l| l.outcome_coef * u);
        let y0 = 1.0 + self.outcome_mean(&w, 0) + latent + e;
        let y1 = 1.0 + self.outcome_mean(&w, 1) + latent + e;
        if !(y0 >= 1.0 && y1 >= 1.0) {
            return Err(Error::Simulation(format!("DGP {}: counterfactual outcome below 1", self.name)));
        }
        Ok(Draw { w, a, y1, y0 })
    }
}

/// Draw `n` units. Observed `Y` equals `Y_A`; the counterfactuals are returned
/// separately and are never part of the observed data.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<SimSample> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let (mut a, mut y, mut y1, mut y0, mut g1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let d = dgp.draw(&mut rng)?;
        g1.push(dgp.marginal_propensity(&d.w));
        y.push(if d.a == 1 { d.y1 } else { d.y0 });
        a.push(d.a);
        y1.push(d.y1);
        y0.push(d.y0);
        rows.push(d.w);
    }
    let w = Frame::from_rows(dgp.covariate_names(), &rows)?;
    Ok(SimSample { data: ObservedData::new(w, a, y)?, y1, y0, g1 })
}

/// Closed-form counterfactual means.
pub fn true_parameters(dgp: &DgpSpec) -> Result<SimTruth> {
    dgp.validate()?;
    let m0 = dgp.baseline.expectation(&dgp.covariates);
    let common = 1.0 + dgp.latent.map_or(0.0, |l| l.outcome_coef * l.p) + dgp.noise.mean();
    let ey0 = common + m0;
    let ey1 = common + dgp.treated_scale * m0 + dgp.treated_shift;
    Ok(SimTruth::new(ey1, ey0, TruthMethod::ClosedForm))
}

/// Counterfactual means by simulation, with standard errors.
pub fn monte_carlo_truth(dgp: &DgpSpec, draws: usize, seed: u64) -> Result<SimTruth> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s0, mut sd) = (Welford::default(), Welford::default(), Welford::default());
    for _ in 0..draws {
        let d = dgp.draw(&mut rng)?;
        s1.push(d.y1);
        s0.push(d.y0);
        sd.push(d.y1 - d.y0);
    }
    Ok(SimTruth::new(
        s1.mean,
        s0.mean,
        TruthMethod::MonteCarlo { draws, seed, se_ey1: s1.se(), se_ey0: s0.se(), se_crd: sd.se() },
    ))
}

/// The observed-data functional `E[E(Y | A = a, W)]` that adjusted estimators
/// target. It equals the counterfactual mean only without a latent
/// confounder; with one, `E(Y | A = a, W)` averages the latent over its
/// conditional law given `A = a, W`. The outer expectation over `W` is taken
/// by Monte Carlo.
pub fn statistical_estimand(dgp: &DgpSpec, draws: usize, seed: u64) -> Result<SimTruth> {
    dgp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s0, mut sd) = (Welford::default(), Welford::default(), Welford::default());
    let noise = dgp.noise.mean();
    for _ in 0..draws {
        let d = dgp.draw(&mut rng)?;
        let latent_mean = |a: u8| match dgp.latent {
            None => 0.0,
            Some(l) => {
                let weight = |u: f64| {
                    let p = dgp.propensity(&d.w, u);
                    if a == 1 { p } else { 1.0 - p }
                };
                let num = l.p * weight(1.0);
                let den = num + (1.0 - l.p) * weight(0.0);
                l.outcome_coef * num / den
            }
        };
        let q1 = 1.0 + dgp.outcome_mean(&d.w, 1) + latent_mean(1) + noise;
        let q0 = 1.0 + dgp.outcome_mean(&d.w, 0) + latent_mean(0) + noise;
        s1.push(q1);
        s0.push(q0);
        sd.push(q1 - q0);
    }
    Ok(SimTruth::new(
        s1.mean,
        s0.mean,
        TruthMethod::MonteCarlo { draws, seed, se_ey1: s1.se(), se_ey0: s0.se(), se_crd: sd.se() },
    ))
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

fn uniform3(lo: f64, hi: f64) -> Vec<CovariateLaw> {
    vec![CovariateLaw::Uniform { lo, hi }; 3]
}

fn term(covariate: usize, coef: f64, form: Form) -> Term {
    Term { covariate, coef, form }
}

/// Constant propensity 0.5 and a linear outcome; the risk difference equals
/// the exposure coefficient.
pub fn randomized_linear() -> DgpSpec {
    DgpSpec {
        name: "randomized_linear".into(),
        covariates: uniform3(0.0, 1.0),
        exposure: ExposureModel::Constant { p: 0.5 },
        baseline: Additive {
            intercept: 0.5,
            terms: vec![term(0, 0.4, Form::Linear), term(1, 0.3, Form::Linear), term(2, 0.2, Form::Linear)],
        },
        treated_scale: 1.0,
        treated_shift: -0.3,
        noise: NoiseLaw::Exponential { mean: 0.3 },
        latent: None,
    }
}

/// Logistic exposure and a nonlinear additive outcome, both driven upward by
/// `W1`, so the unadjusted contrast is biased towards zero.
pub fn confounded() -> DgpSpec {
    DgpSpec {
        name: "confounded".into(),
        covariates: uniform3(-1.0, 1.0),
        exposure: ExposureModel::Logistic {
            linear: Additive {
                intercept: 0.2,
                terms: vec![term(0, 1.2, Form::Linear), term(1, -0.8, Form::Linear), term(2, 0.5, Form::Linear)],
            },
        },
        // 0.5 + 0.6 (W1 + 1)^2 + 0.4 sin(pi W2) + 0.3 W3^2
        baseline: Additive {
            intercept: 1.1,
            terms: vec![
                term(0, 1.2, Form::Linear),
                term(0, 0.6, Form::Square),
                term(1, 0.4, Form::Sine),
                term(2, 0.3, Form::Square),
            ],
        },
        treated_scale: 0.8,
        treated_shift: 0.0,
        noise: NoiseLaw::Exponential { mean: 0.3 },
        latent: None,
    }
}

/// The confounded design plus a binary latent that raises both the chance of
/// exposure and the outcome. Adjusting for `W` alone cannot recover the
/// counterfactual contrast.
pub fn unmeasured_confounder() -> DgpSpec {
    DgpSpec {
        name: "unmeasured_confounder".into(),
        latent: Some(Latent { p: 0.5, exposure_coef: 1.5, outcome_coef: 0.6 }),
        ..confounded()
    }
}

/// Outcome that ignores the exposure.
pub fn null_effect() -> DgpSpec {
    DgpSpec { name: "null_effect".into(), treated_scale: 1.0, treated_shift: 0.0, ..confounded() }
}

pub fn named(name: &str) -> Option<DgpSpec> {
    match name {
        "randomized_linear" => Some(randomized_linear()),
        "confounded" => Some(confounded()),
        "unmeasured_confounder" => Some(unmeasured_confounder()),
        "null_effect" => Some(null_effect()),
        _ => None,
    }
}

pub const NAMED_DGPS: [&str; 4] = ["randomized_linear", "confounded", "unmeasured_confounder", "null_effect"];
