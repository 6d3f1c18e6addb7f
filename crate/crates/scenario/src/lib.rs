//! The vineyard use case as an executable asset: the daily and annual
//! process definitions, a seeded multi-day simulation driven by scripted
//! role agents, journal replay checks and the `agriflow` operator CLI.

pub mod agents;
pub mod config;
pub mod definition;
pub mod replay;
pub mod report;
pub mod simulation;

pub use config::{AgentPolicy, DayOverrides, ScenarioConfig};
pub use definition::{build_pruning_definition, build_scenario_definition};
pub use replay::{replay_check, truncation_check, ReplayCheck, TruncationCheck};
pub use report::{DayReport, SimulationReport};
pub use simulation::{run_simulation, Simulation};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Api(#[from] agriflow_api::ApiError),
    #[error(transparent)]
    Platform(#[from] agriflow_core::platform::PlatformError),
    #[error(transparent)]
    Journal(#[from] agriflow_core::journal::JournalError),
    #[error("replay: {0}")]
    Replay(String),
}
