//! Ground station: perception and mapping pipeline, safety supervision,
//! scenario runner, network endpoints and the `rvops` command line.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod net;
pub mod pipeline;
pub mod rover;
pub mod scenario;

pub use config::PipelineConfig;
pub use pipeline::{Counters, Output, Pipeline};
pub use scenario::{run_scenario, Metrics, RunOptions, Scenario, ScenarioOutcome};

#[derive(Debug, thiserror::Error)]
pub enum GroundError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error("unsupported scenario version '{0}' on line {1}")]
    ScenarioVersion(String, usize),
    #[error(transparent)]
    Sim(#[from] rvops_core::simkit::SimError),
    #[error(transparent)]
    Wire(#[from] rvops_wire::WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Net(String),
}
