//! Simulation laboratory: executable structural causal models with known
//! counterfactual truth, and a replicate runner that scores estimators
//! against it.

mod dgp;
mod experiment;

pub use dgp::{
    confounded, generate, monte_carlo_truth, named, null_effect, randomized_linear, statistical_estimand,
    true_parameters, unmeasured_confounder, Additive, CovariateLaw, DgpSpec, ExposureModel, Form, Latent, NoiseLaw,
    SimSample, SimTruth, Term, TruthMethod, NAMED_DGPS,
};
pub use experiment::{
    replicate_seed, run_experiment, EstimatorSummary, ExperimentConfig, ExperimentReport, Metrics, ReplicateEstimate,
    ReplicateOutcome, Scenario,
};
