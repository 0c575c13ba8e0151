//! Simulation and reliability analysis of retried grid processing campaigns.
//!
//! A campaign processes a dataset as tasks split into jobs. Jobs fail at
//! one of three stages, are retried under a [`RetryPolicy`], and may keep
//! partial progress depending on the [`CheckpointGranularity`]. The
//! [`engine`] plays a [`Scenario`] forward deterministically; [`metrics`]
//! turns the result into defect rates, sigma levels and overheads; and
//! [`weibull`] fits the distribution of per-task recovery costs.

pub mod engine;
pub mod error;
pub mod failure;
pub mod job;
pub mod metrics;
pub mod tail;
pub mod units;
pub mod weibull;

pub use engine::{ideal_makespan, run, AttemptRecord, RetryPolicy, Scenario, SimResult};
pub use error::{Error, Result};
pub use failure::{
    overall_failure_prob, sample_attempt, AttemptDraft, FailureModel, RngStream, SiteProfile,
};
pub use job::{
    apply_outcome, split_task, task_state, Attempt, CheckpointGranularity, DatasetSpec,
    FailureStage, Job, JobId, JobState, Outcome, Task, TaskId, TaskState,
};
pub use metrics::{
    defect_rate, overhead_report, rate_from_sigma, recovery_cost_samples, sigma_from_rate,
    DefectReport, OverheadReport, RecoveryCost, SigmaConvention,
};
pub use units::CpuTime;
pub use weibull::{fit_mixture, fit_mle, FitOptions, MixtureModel, WeibullParams};
