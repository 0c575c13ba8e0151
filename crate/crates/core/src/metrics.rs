//! Reliability figures derived from a [`SimResult`].
//!
//! Sigma levels use the one-sided upper Gaussian tail: a defect rate `r`
//! sits at the `z` with `Q(z) = r`. The industrial convention adds a fixed
//! 1.5σ process-drift allowance on top of that, so industrial six sigma is
//! `Q(4.5) ≈ 3.4·10⁻⁶`.

use serde::Serialize;

use crate::engine::SimResult;
use crate::error::{Error, Result};
use crate::tail::{inverse_upper_tail, upper_tail};
use crate::units::CpuTime;

pub const INDUSTRIAL_SHIFT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaConvention {
    Mathematical,
    Industrial,
}

impl SigmaConvention {
    fn shift(self) -> f64 {
        match self {
            SigmaConvention::Mathematical => 0.0,
            SigmaConvention::Industrial => INDUSTRIAL_SHIFT,
        }
    }
}

pub fn sigma_from_rate(rate: f64, convention: SigmaConvention) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Domain(format!(
            "rate must lie in (0, 1), got {rate}"
        )));
    }
    Ok(inverse_upper_tail(rate) + convention.shift())
}

/// Inverse of [`sigma_from_rate`]. The sigma, once the convention's shift
/// is removed, must be finite and non-negative.
pub fn rate_from_sigma(sigma: f64, convention: SigmaConvention) -> Result<f64> {
    let z = sigma - convention.shift();
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::Domain(format!(
            "sigma {sigma} is below the {convention:?} floor of {}",
            convention.shift()
        )));
    }
    Ok(upper_tail(z))
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    numerator as f64 / denominator as f64
}

/// Defective events over all events: lost, silently corrupted, or left for
/// the dedicated recovery step.
pub fn defect_rate(result: &SimResult) -> f64 {
    ratio(
        result.events_lost + result.events_corrupted + result.events_recovery_queue,
        result.events_total,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub events_total: u64,
    pub events_lost: u64,
    pub events_corrupted: u64,
    pub events_recovery_queue: u64,
    pub defect_rate: f64,
    /// `None` when no defect was observed.
    pub sigma_math: Option<f64>,
    pub sigma_industrial: Option<f64>,
    /// Defect rate once the recovery step has reprocessed its queue.
    pub defect_rate_after_recovery: f64,
    pub sigma_math_after_recovery: Option<f64>,
}

fn sigma_or_none(rate: f64) -> Option<f64> {
    sigma_from_rate(rate, SigmaConvention::Mathematical).ok()
}

impl DefectReport {
    pub fn from_result(result: &SimResult) -> Self {
        let rate = defect_rate(result);
        let after = ratio(
            result.events_lost + result.events_corrupted,
            result.events_total,
        );
        let sigma_math = sigma_or_none(rate);
        DefectReport {
            events_total: result.events_total,
            events_lost: result.events_lost,
            events_corrupted: result.events_corrupted,
            events_recovery_queue: result.events_recovery_queue,
            defect_rate: rate,
            sigma_math,
            sigma_industrial: sigma_math.map(|s| s + INDUSTRIAL_SHIFT),
            defect_rate_after_recovery: after,
            sigma_math_after_recovery: sigma_or_none(after),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadReport {
    /// CPU spent on failed work per unit of useful CPU.
    pub cpu_overhead: f64,
    /// Fractional makespan excess over the failure-free run.
    pub time_overhead: f64,
}

pub fn overhead_report(result: &SimResult, ideal_makespan: f64) -> Result<OverheadReport> {
    if result.cpu_successful == CpuTime::ZERO {
        return Err(Error::DegenerateData(
            "no successful CPU; the run delivered nothing".into(),
        ));
    }
    if !(ideal_makespan > 0.0 && ideal_makespan.is_finite()) {
        return Err(Error::DegenerateData(format!(
            "ideal makespan must be positive, got {ideal_makespan}"
        )));
    }
    Ok(OverheadReport {
        cpu_overhead: ratio(
            result.cpu_wasted.as_micros(),
            result.cpu_successful.as_micros(),
        ),
        time_overhead: (result.makespan - ideal_makespan) / ideal_makespan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryCost {
    pub task_id: u32,
    pub cpu: CpuTime,
    pub cpu_hours: f64,
}

impl RecoveryCost {
    /// Whether the task needed any recovery at all. Tasks that did not are
    /// kept in the list but cannot enter a Weibull fit.
    pub fn has_recovery(&self) -> bool {
        self.cpu > CpuTime::ZERO
    }
}

/// CPU spent on failed work, one entry per task.
pub fn recovery_cost_samples(result: &SimResult) -> Vec<RecoveryCost> {
    result
        .tasks
        .iter()
        .zip(&result.per_task_recovery)
        .map(|(task, &cpu)| RecoveryCost {
            task_id: task.task_id.0,
            cpu,
            cpu_hours: cpu.as_core_hours(),
        })
        .collect()
}

/// Positive recovery costs in core-hours, and the fraction of tasks left out
/// because they needed no recovery.
pub fn fittable_recovery_costs(samples: &[RecoveryCost]) -> (Vec<f64>, f64) {
    let positive: Vec<f64> = samples
        .iter()
        .filter(|s| s.has_recovery())
        .map(|s| s.cpu_hours)
        .collect();
    let excluded = if samples.is_empty() {
        0.0
    } else {
        1.0 - positive.len() as f64 / samples.len() as f64
    };
    (positive, excluded)
}
