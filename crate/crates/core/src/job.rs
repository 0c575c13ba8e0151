//! Tasks, jobs and attempts: the unit hierarchy of a processing campaign.
//!
//! A [`Task`] covers a dataset and is split into [`Job`]s of a fixed number
//! of events. Each job keeps an append-only history of [`Attempt`]s. The
//! functions here are pure state transitions; scheduling lives in
//! [`crate::engine`].

use std::fmt;

use serde::Serialize;

use crate::engine::RetryPolicy;
use crate::error::{Error, Result};
use crate::units::CpuTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Size of a dataset and the CPU cost of processing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSpec {
    total_events: u64,
    events_per_job: u64,
    nominal_cpu_per_event: f64,
}

impl DatasetSpec {
    pub fn new(total_events: u64, events_per_job: u64, nominal_cpu_per_event: f64) -> Result<Self> {
        if total_events == 0 {
            return Err(Error::config("dataset.total_events", "must be at least 1"));
        }
        if events_per_job == 0 {
            return Err(Error::config(
                "dataset.events_per_job",
                "must be at least 1",
            ));
        }
        if !(nominal_cpu_per_event.is_finite() && nominal_cpu_per_event > 0.0) {
            return Err(Error::config(
                "dataset.nominal_cpu_per_event",
                format!("must be a positive finite number, got {nominal_cpu_per_event}"),
            ));
        }
        Ok(DatasetSpec {
            total_events,
            events_per_job,
            nominal_cpu_per_event,
        })
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    pub fn events_per_job(&self) -> u64 {
        self.events_per_job
    }

    /// Simulated core-seconds per event.
    pub fn nominal_cpu_per_event(&self) -> f64 {
        self.nominal_cpu_per_event
    }

    pub fn job_count(&self) -> u64 {
        self.total_events.div_ceil(self.events_per_job)
    }

    /// Same per-event parameters over a different number of events.
    pub fn with_total_events(&self, total_events: u64) -> Result<Self> {
        DatasetSpec::new(
            total_events,
            self.events_per_job,
            self.nominal_cpu_per_event,
        )
    }
}

/// How much completed work survives a failed attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointGranularity {
    /// Jobs retry like `Job`, but losing any job loses the whole task.
    Task,
    /// A failed attempt loses all of the job's progress.
    Job,
    /// Events completed before a compute-stage failure are kept.
    Event,
}

impl CheckpointGranularity {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointGranularity::Task => "task",
            CheckpointGranularity::Job => "job",
            CheckpointGranularity::Event => "event",
        }
    }
}

impl fmt::Display for CheckpointGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CheckpointGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task" => Ok(CheckpointGranularity::Task),
            "job" => Ok(CheckpointGranularity::Job),
            "event" => Ok(CheckpointGranularity::Event),
            other => Err(Error::Domain(format!(
                "unknown checkpoint granularity `{other}` (expected task, job or event)"
            ))),
        }
    }
}

/// Stage of a job attempt, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    Setup,
    Compute,
    StageOut,
}

impl FailureStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureStage::Setup => "setup",
            FailureStage::Compute => "compute",
            FailureStage::StageOut => "stageout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    Success,
    TransientFailure(FailureStage),
    /// Not recoverable by a retry. The stage records where it surfaced.
    PermanentFailure(FailureStage),
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Success)
    }

    pub fn stage(self) -> Option<FailureStage> {
        match self {
            Outcome::Success => None,
            Outcome::TransientFailure(stage) | Outcome::PermanentFailure(stage) => Some(stage),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::TransientFailure(_) => "transient",
            Outcome::PermanentFailure(_) => "permanent",
        }
    }
}

/// One execution of a job on a site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub attempt_index: u32,
    /// Index into the scenario's site list.
    pub site: usize,
    pub outcome: Outcome,
    pub cpu_consumed: CpuTime,
    pub wall_start: f64,
    pub wall_end: f64,
    /// Events this attempt set out to process.
    pub events_processed: u64,
    /// Events completed before a compute-stage failure. Zero otherwise.
    pub events_checkpointed: u64,
    /// Share of `cpu_consumed` spent on the checkpointed events.
    pub cpu_checkpointed: CpuTime,
    /// Silently corrupted events; non-zero only on success.
    pub events_corrupted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum JobState {
    Pending,
    Running,
    Succeeded,
    FailedTransient,
    LostPermanent,
    RecoveryQueue,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Succeeded | JobState::LostPermanent | JobState::RecoveryQueue
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub job_id: JobId,
    pub task_id: TaskId,
    pub n_events: u64,
    pub events_done: u64,
    pub state: JobState,
    pub attempts: Vec<Attempt>,
}

impl Job {
    pub fn new(job_id: JobId, task_id: TaskId, n_events: u64) -> Self {
        Job {
            job_id,
            task_id,
            n_events,
            events_done: 0,
            state: JobState::Pending,
            attempts: Vec::new(),
        }
    }

    /// Moves a pending or re-queueable job to `Running`.
    pub fn start(&mut self) -> Result<()> {
        match self.state {
            JobState::Pending | JobState::FailedTransient => {
                self.state = JobState::Running;
                Ok(())
            }
            state => Err(Error::Transition(format!(
                "job {} cannot start from {state:?}",
                self.job_id
            ))),
        }
    }

    /// Events the next attempt has to process.
    pub fn events_remaining(&self) -> u64 {
        self.n_events - self.events_done
    }

    pub fn cpu_total(&self) -> CpuTime {
        self.attempts.iter().map(|a| a.cpu_consumed).sum()
    }

    /// CPU that ended up in delivered output. Everything else the job
    /// consumed is recovery cost.
    pub fn cpu_useful(&self, granularity: CheckpointGranularity) -> CpuTime {
        if self.state != JobState::Succeeded {
            return CpuTime::ZERO;
        }
        let Some((last, earlier)) = self.attempts.split_last() else {
            return CpuTime::ZERO;
        };
        let preserved = if granularity == CheckpointGranularity::Event {
            earlier
                .iter()
                .filter(|a| a.outcome == Outcome::TransientFailure(FailureStage::Compute))
                .map(|a| a.cpu_checkpointed)
                .sum()
        } else {
            CpuTime::ZERO
        };
        last.cpu_consumed + preserved
    }
}

/// Splits a dataset into a single task whose job ids start at zero.
pub fn split_task(spec: &DatasetSpec, granularity: CheckpointGranularity) -> Task {
    Task::split(TaskId(0), JobId(0), spec, granularity)
}

/// Record `attempt` against a running job and return the job in its new
/// state.
///
/// A transient failure leaves the job re-queueable while fewer than
/// `max_retries + 1` attempts have been made; after that, and on any
/// permanent failure, the job goes to the recovery queue (when the policy
/// has one) or is lost.
pub fn apply_outcome(
    mut job: Job,
    attempt: Attempt,
    policy: &RetryPolicy,
    granularity: CheckpointGranularity,
) -> Result<Job> {
    if job.state != JobState::Running {
        return Err(Error::Transition(format!(
            "job {} received an attempt while {:?}",
            job.job_id, job.state
        )));
    }
    if attempt.attempt_index as usize != job.attempts.len() {
        return Err(Error::Transition(format!(
            "job {} expected attempt {}, got {}",
            job.job_id,
            job.attempts.len(),
            attempt.attempt_index
        )));
    }

    let outcome = attempt.outcome;
    let checkpointed = attempt.events_checkpointed;
    job.attempts.push(attempt);
    let exhausted_state = if policy.dedicated_recovery {
        JobState::RecoveryQueue
    } else {
        JobState::LostPermanent
    };

    match outcome {
        Outcome::Success => {
            job.events_done = job.n_events;
            job.state = JobState::Succeeded;
        }
        Outcome::TransientFailure(stage) => {
            match granularity {
                CheckpointGranularity::Event => {
                    if stage == FailureStage::Compute {
                        job.events_done = (job.events_done + checkpointed).min(job.n_events - 1);
                    }
                }
                CheckpointGranularity::Job | CheckpointGranularity::Task => job.events_done = 0,
            }
            job.state = if job.attempts.len() <= policy.max_retries as usize {
                JobState::FailedTransient
            } else {
                exhausted_state
            };
        }
        Outcome::PermanentFailure(_) => job.state = exhausted_state,
    }
    Ok(job)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TaskState {
    Open,
    Complete,
    CompleteWithLoss,
}

pub fn task_state(task: &Task) -> TaskState {
    if task.jobs.iter().any(|j| !j.state.is_terminal()) {
        TaskState::Open
    } else if task.jobs.iter().all(|j| j.state == JobState::Succeeded) {
        TaskState::Complete
    } else {
        TaskState::CompleteWithLoss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Task {
    pub task_id: TaskId,
    pub jobs: Vec<Job>,
    pub granularity: CheckpointGranularity,
    pub state: TaskState,
}

/// Event and CPU accounting of one task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskLedger {
    pub events_total: u64,
    pub events_succeeded: u64,
    pub events_lost: u64,
    pub events_recovery_queue: u64,
    pub events_corrupted: u64,
    pub cpu_useful: CpuTime,
    pub cpu_wasted: CpuTime,
}

impl Task {
    /// Splits `spec` into jobs of `events_per_job` events; the last job takes
    /// the remainder.
    pub fn split(
        task_id: TaskId,
        first_job_id: JobId,
        spec: &DatasetSpec,
        granularity: CheckpointGranularity,
    ) -> Task {
        let per_job = spec.events_per_job();
        let total = spec.total_events();
        let jobs = (0..spec.job_count())
            .map(|i| {
                let n_events = per_job.min(total - i * per_job);
                Job::new(JobId(first_job_id.0 + i), task_id, n_events)
            })
            .collect();
        Task {
            task_id,
            jobs,
            granularity,
            state: TaskState::Open,
        }
    }

    pub fn total_events(&self) -> u64 {
        self.jobs.iter().map(|j| j.n_events).sum()
    }

    pub fn refresh_state(&mut self) {
        self.state = task_state(self);
    }

    /// Closes the books on a task whose jobs are all terminal.
    ///
    /// Under task-level checkpointing any lost job (or, failing that, any
    /// job left for the recovery step) takes the whole task with it.
    pub fn ledger(&self) -> TaskLedger {
        let events_total = self.total_events();
        let cpu_total: CpuTime = self.jobs.iter().map(Job::cpu_total).sum();

        if self.granularity == CheckpointGranularity::Task {
            let any_lost = self.jobs.iter().any(|j| j.state == JobState::LostPermanent);
            let any_queued = self.jobs.iter().any(|j| j.state == JobState::RecoveryQueue);
            if any_lost || any_queued {
                let (events_lost, events_recovery_queue) = if any_lost {
                    (events_total, 0)
                } else {
                    (0, events_total)
                };
                return TaskLedger {
                    events_total,
                    events_succeeded: 0,
                    events_lost,
                    events_recovery_queue,
                    events_corrupted: 0,
                    cpu_useful: CpuTime::ZERO,
                    cpu_wasted: cpu_total,
                };
            }
        }

        let mut ledger = TaskLedger {
            events_total,
            ..TaskLedger::default()
        };
        for job in &self.jobs {
            match job.state {
                JobState::Succeeded => {
                    ledger.events_succeeded += job.n_events;
                    ledger.events_corrupted +=
                        job.attempts.last().map_or(0, |a| a.events_corrupted);
                    ledger.cpu_useful += job.cpu_useful(self.granularity);
                }
                JobState::RecoveryQueue => ledger.events_recovery_queue += job.n_events,
                _ => ledger.events_lost += job.n_events,
            }
        }
        ledger.cpu_wasted = cpu_total - ledger.cpu_useful;
        ledger
    }
}
