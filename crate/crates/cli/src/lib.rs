//! Scenario files, run summaries and the `gridrel` subcommands.

pub mod commands;
pub mod scenario_file;
pub mod summary;

pub use commands::{cmd_fit, cmd_run, cmd_sigma, CliError, SigmaQuery};
pub use scenario_file::{parse_scenario, serialize_scenario, ScenarioError, ScenarioFile};
pub use summary::{Ledger, RunSummary};
