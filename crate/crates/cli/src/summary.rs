use gridrel_core::{
    overhead_report, recovery_cost_samples, DefectReport, OverheadReport, Scenario, SimResult,
};
use serde::Serialize;

use crate::scenario_file::ScenarioFile;

pub const TOOL_NAME: &str = "gridrel";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything `run` reports about one simulation. Fields serialize in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub scenario: ScenarioFile,
    pub makespan: f64,
    pub ideal_makespan: f64,
    /// `None` when nothing succeeded, so there is no useful CPU to compare to.
    pub overhead: Option<OverheadReport>,
    pub defects: DefectReport,
    pub ledger: Ledger,
    pub recovery: RecoverySummary,
}

/// Event and CPU bookkeeping. CPU is in integer micro core-seconds so the
/// sums can be checked exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ledger {
    pub events_total: u64,
    pub events_succeeded: u64,
    pub events_lost: u64,
    pub events_recovery_queue: u64,
    pub events_corrupted: u64,
    pub jobs: u64,
    pub attempts: u64,
    pub cpu_successful_micros: u64,
    pub cpu_wasted_micros: u64,
    pub attempt_cpu_micros: u64,
}

impl Ledger {
    pub fn from_result(result: &SimResult) -> Self {
        Ledger {
            events_total: result.events_total,
            events_succeeded: result.events_succeeded,
            events_lost: result.events_lost,
            events_recovery_queue: result.events_recovery_queue,
            events_corrupted: result.events_corrupted,
            jobs: result.jobs().count() as u64,
            attempts: result.attempt_log.len() as u64,
            cpu_successful_micros: result.cpu_successful.as_micros(),
            cpu_wasted_micros: result.cpu_wasted.as_micros(),
            attempt_cpu_micros: result.attempt_cpu_total().as_micros(),
        }
    }

    pub fn events_balance(&self) -> bool {
        self.events_succeeded + self.events_lost + self.events_recovery_queue == self.events_total
    }

    pub fn cpu_balance(&self) -> bool {
        self.cpu_successful_micros + self.cpu_wasted_micros == self.attempt_cpu_micros
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub tasks: usize,
    pub tasks_with_recovery: usize,
    pub total_cpu_hours: f64,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, result: &SimResult, ideal_makespan: f64) -> Self {
        let costs = recovery_cost_samples(result);
        RunSummary {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            seed: scenario.seed,
            scenario: ScenarioFile::from_scenario(scenario),
            makespan: result.makespan,
            ideal_makespan,
            overhead: overhead_report(result, ideal_makespan).ok(),
            defects: DefectReport::from_result(result),
            ledger: Ledger::from_result(result),
            recovery: RecoverySummary {
                tasks: costs.len(),
                tasks_with_recovery: costs.iter().filter(|c| c.has_recovery()).count(),
                total_cpu_hours: costs
                    .iter()
                    .map(|c| c.cpu)
                    .sum::<gridrel_core::CpuTime>()
                    .as_core_hours(),
            },
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(self).expect("summary fields are all serializable");
        out.push('\n');
        out
    }
}
