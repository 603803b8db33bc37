use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the analysis core.
///
/// Variants are grouped by where they originate so that callers (the CLI in
/// particular) can map them onto exit statuses without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("schema error in {file}: {detail}")]
    Schema { file: String, detail: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("state {state}: {detail}")]
    State { state: String, detail: String },

    #[error("missing covariate cells: {}", .0.join("; "))]
    MissingCells(Vec<String>),

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("learner {learner} failed: {detail}")]
    Learner { learner: String, detail: String },

    #[error("no learner in the library could be fitted")]
    EmptyLibrary,

    #[error("fluctuation did not converge after {iterations} iterations (gradient trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("simulation error: {0}")]
    Simulation(String),
}

impl Error {
    pub(crate) fn state(state: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::State { state: state.into(), detail: detail.into() }
    }

    /// True for errors caused by input data rather than by estimation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::Schema { .. }
                | Error::Data(_)
                | Error::State { .. }
                | Error::MissingCells(_)
                | Error::Positivity(_)
        )
    }
}
