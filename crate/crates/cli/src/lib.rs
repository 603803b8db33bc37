//! Pipeline, report rendering and simulation driver behind the `roadmap`
//! command.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod simulate;

pub use config::{AnalysisMode, Overrides, RunConfig};
pub use error::{Category, CliError, CliResult};
pub use pipeline::{compute, run_pipeline, RunResults};
pub use simulate::{run_simulation, SimulationConfig};
