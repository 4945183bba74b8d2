//! Scenario loading, experiment execution, report emission, and
//! model-vs-simulation cross-validation: the crate's top-level surface
//! for running complete experiments.

mod compare;
mod report;
mod runner;
mod scenario;

pub use compare::{compare_model_vs_sim, CheckLine, ComparisonRecord, MismatchError};
pub use report::{emit_report, ReportFormat, ReportTable};
pub use runner::{run_scenario, FreshnessSample, RunOutput};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};

use crate::costmodel::CostError;
use crate::strategies::StrategyError;
use crate::topology::TopologyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Run(#[from] StrategyError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Mismatch(#[from] MismatchError),
}
