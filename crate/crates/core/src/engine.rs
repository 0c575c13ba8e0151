//! Discrete-event simulation of a campaign.
//!
//! Pending jobs are served in `(eligible_time, job_id)` order and placed on
//! the first site, by site id, with a free slot. Completions are handled in
//! `(time, site_id, job_id)` order, and all completions at an instant are
//! handled before the freed slots are refilled. With attempt outcomes drawn
//! from per-(job, attempt) streams, a scenario and seed fully determine the
//! result.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::failure::{overall_failure_prob, sample_attempt, FailureModel, RngStream, SiteProfile};
use crate::job::{
    apply_outcome, Attempt, CheckpointGranularity, DatasetSpec, JobId, JobState, Task, TaskId,
};
use crate::units::CpuTime;

/// Upper bound on `max_retries`.
pub const MAX_RETRIES_LIMIT: u32 = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetryPolicy {
    /// Re-tries allowed after the first attempt.
    pub max_retries: u32,
    /// Simulated seconds a failed job waits before it may run again.
    pub requeue_delay: f64,
    /// Send exhausted jobs to a dedicated recovery step instead of losing them.
    pub dedicated_recovery: bool,
}

impl RetryPolicy {
    pub fn new(max_retries: u32, requeue_delay: f64, dedicated_recovery: bool) -> Result<Self> {
        let policy = RetryPolicy {
            max_retries,
            requeue_delay,
            dedicated_recovery,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(Error::config(
                "retry.max_retries",
                format!(
                    "must be at most {MAX_RETRIES_LIMIT}, got {}",
                    self.max_retries
                ),
            ));
        }
        if !(self.requeue_delay.is_finite() && self.requeue_delay >= 0.0) {
            return Err(Error::config(
                "retry.requeue_delay",
                format!(
                    "must be non-negative and finite, got {}",
                    self.requeue_delay
                ),
            ));
        }
        Ok(())
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            requeue_delay: 0.0,
            dedicated_recovery: false,
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub dataset: DatasetSpec,
    pub sites: Vec<SiteProfile>,
    pub failure_model: FailureModel,
    pub retry_policy: RetryPolicy,
    pub granularity: CheckpointGranularity,
    pub seed: u64,
    /// The dataset is divided evenly over this many independent tasks.
    pub n_tasks: u32,
}

impl Scenario {
    pub fn new(dataset: DatasetSpec, sites: Vec<SiteProfile>) -> Self {
        Scenario {
            dataset,
            sites,
            failure_model: FailureModel::default(),
            retry_policy: RetryPolicy::default(),
            granularity: CheckpointGranularity::Job,
            seed: 0,
            n_tasks: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::config("site", "at least one site is required"));
        }
        for (i, site) in self.sites.iter().enumerate() {
            site.validate(&format!("site[{i}]"))?;
        }
        let mut ids: Vec<&str> = self.sites.iter().map(|s| s.site_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(
                "site.site_id",
                format!("duplicate site id `{}`", dup[0]),
            ));
        }
        self.failure_model.validate()?;
        for site in &self.sites {
            if overall_failure_prob(&self.failure_model, site) >= 1.0 {
                return Err(Error::config(
                    "failure",
                    format!("every attempt on site `{}` would fail", site.site_id),
                ));
            }
        }
        self.retry_policy.validate()?;
        if self.n_tasks == 0 {
            return Err(Error::config("run.n_tasks", "must be at least 1"));
        }
        if u64::from(self.n_tasks) > self.dataset.total_events() {
            return Err(Error::config(
                "run.n_tasks",
                format!(
                    "{} tasks cannot share {} events",
                    self.n_tasks,
                    self.dataset.total_events()
                ),
            ));
        }
        Ok(())
    }

    /// Same scenario with every failure and corruption probability at zero.
    pub fn failure_free(&self) -> Scenario {
        Scenario {
            failure_model: self.failure_model.zeroed(),
            ..self.clone()
        }
    }

    pub fn total_slots(&self) -> u64 {
        self.sites.iter().map(|s| u64::from(s.slots)).sum()
    }

    /// Builds the campaign's tasks. The first `total % n_tasks` tasks carry
    /// one extra event; job ids run consecutively across tasks.
    pub fn build_tasks(&self) -> Result<Vec<Task>> {
        let n_tasks = u64::from(self.n_tasks);
        let total = self.dataset.total_events();
        let (base, extra) = (total / n_tasks, total % n_tasks);
        let mut next_job = 0;
        let mut tasks = Vec::with_capacity(self.n_tasks as usize);
        for t in 0..n_tasks {
            let events = base + u64::from(t < extra);
            let spec = self.dataset.with_total_events(events)?;
            let task = Task::split(TaskId(t as u32), JobId(next_job), &spec, self.granularity);
            next_job += task.jobs.len() as u64;
            tasks.push(task);
        }
        Ok(tasks)
    }
}

/// One line of the attempt log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub job_id: JobId,
    pub task_id: TaskId,
    pub attempt: Attempt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub tasks: Vec<Task>,
    /// Site ids in dispatch order; `Attempt::site` indexes this list.
    pub site_ids: Vec<String>,
    /// Simulated seconds until the last job became terminal.
    pub makespan: f64,
    pub cpu_successful: CpuTime,
    pub cpu_wasted: CpuTime,
    pub events_total: u64,
    pub events_succeeded: u64,
    pub events_lost: u64,
    pub events_corrupted: u64,
    pub events_recovery_queue: u64,
    /// Wasted CPU per task in ledger units.
    pub per_task_recovery: Vec<CpuTime>,
    /// The same, in core-hours.
    pub per_task_recovery_cpu: Vec<f64>,
    /// Attempts in completion order.
    pub attempt_log: Vec<AttemptRecord>,
}

impl SimResult {
    pub fn attempt_cpu_total(&self) -> CpuTime {
        self.attempt_log
            .iter()
            .map(|r| r.attempt.cpu_consumed)
            .sum()
    }

    pub fn jobs(&self) -> impl Iterator<Item = &crate::job::Job> {
        self.tasks.iter().flat_map(|t| t.jobs.iter())
    }
}

/// Simulated time with a total order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Instant(f64);

impl Eq for Instant {}

impl PartialOrd for Instant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Instant {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Location of a job inside the task list.
#[derive(Debug, Clone, Copy)]
struct JobSlot {
    task: usize,
    job: usize,
}

pub fn run(scenario: &Scenario) -> Result<SimResult> {
    scenario.validate()?;
    let mut tasks = scenario.build_tasks()?;

    let mut site_order: Vec<usize> = (0..scenario.sites.len()).collect();
    site_order.sort_by(|&a, &b| scenario.sites[a].site_id.cmp(&scenario.sites[b].site_id));
    let sites: Vec<&SiteProfile> = site_order.iter().map(|&i| &scenario.sites[i]).collect();
    let mut free_slots: Vec<u32> = sites.iter().map(|s| s.slots).collect();
    let mut free_total: u64 = scenario.total_slots();

    let locations: Vec<JobSlot> = tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| (0..task.jobs.len()).map(move |j| JobSlot { task: t, job: j }))
        .collect();

    let cpu_per_event = scenario.dataset.nominal_cpu_per_event();
    let policy = &scenario.retry_policy;
    let granularity = scenario.granularity;

    // (eligible time, job id); job ids index `locations`.
    let mut pending: BTreeSet<(Instant, u64)> = (0..locations.len() as u64)
        .map(|id| (Instant(0.0), id))
        .collect();
    // (end time, site index, job id)
    let mut running: BinaryHeap<Reverse<(Instant, usize, u64)>> = BinaryHeap::new();
    let mut in_flight: Vec<Option<Attempt>> = vec![None; locations.len()];
    let mut attempt_log = Vec::with_capacity(locations.len());
    let mut now = 0.0_f64;
    let mut makespan = 0.0_f64;

    loop {
        // Fill free slots with eligible work.
        while free_total > 0 {
            let Some(&(Instant(eligible), id)) = pending.first() else {
                break;
            };
            if eligible > now {
                break;
            }
            pending.pop_first();
            let site_idx = free_slots
                .iter()
                .position(|&n| n > 0)
                .expect("free_total counts a free slot");
            free_slots[site_idx] -= 1;
            free_total -= 1;

            let loc = locations[id as usize];
            let job = &mut tasks[loc.task].jobs[loc.job];
            job.start()?;
            let attempt_index = job.attempts.len() as u32;
            let events = match granularity {
                CheckpointGranularity::Event => job.events_remaining(),
                CheckpointGranularity::Job | CheckpointGranularity::Task => job.n_events,
            };
            let draft = sample_attempt(
                &scenario.failure_model,
                sites[site_idx],
                events,
                cpu_per_event,
                RngStream::for_attempt(scenario.seed, job.job_id, attempt_index),
            );
            let end = now + draft.wall_duration;
            in_flight[id as usize] = Some(Attempt {
                attempt_index,
                site: site_idx,
                outcome: draft.outcome,
                cpu_consumed: draft.cpu_consumed,
                wall_start: now,
                wall_end: end,
                events_processed: events,
                events_checkpointed: draft.events_checkpointed,
                cpu_checkpointed: draft.cpu_checkpointed,
                events_corrupted: draft.events_corrupted,
            });
            running.push(Reverse((Instant(end), site_idx, id)));
        }

        let next_completion = running.peek().map(|Reverse((t, _, _))| t.0);
        let next_eligible = if free_total > 0 {
            pending.first().map(|(t, _)| t.0)
        } else {
            None
        };
        now = match (next_completion, next_eligible) {
            (None, None) => break,
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
        };

        while let Some(&Reverse((Instant(end), site_idx, id))) = running.peek() {
            if end > now {
                break;
            }
            running.pop();
            free_slots[site_idx] += 1;
            free_total += 1;
            makespan = makespan.max(end);

            let loc = locations[id as usize];
            let attempt = in_flight[id as usize]
                .take()
                .expect("running job has an attempt");
            let job = std::mem::replace(
                &mut tasks[loc.task].jobs[loc.job],
                crate::job::Job::new(JobId(id), TaskId(0), 0),
            );
            attempt_log.push(AttemptRecord {
                job_id: job.job_id,
                task_id: job.task_id,
                attempt: attempt.clone(),
            });
            let job = apply_outcome(job, attempt, policy, granularity)?;
            if job.state == JobState::FailedTransient {
                pending.insert((Instant(now + policy.requeue_delay), id));
            }
            tasks[loc.task].jobs[loc.job] = job;
        }
    }

    let mut result = SimResult {
        tasks: Vec::new(),
        site_ids: sites.iter().map(|s| s.site_id.clone()).collect(),
        makespan,
        cpu_successful: CpuTime::ZERO,
        cpu_wasted: CpuTime::ZERO,
        events_total: scenario.dataset.total_events(),
        events_succeeded: 0,
        events_lost: 0,
        events_corrupted: 0,
        events_recovery_queue: 0,
        per_task_recovery: Vec::with_capacity(tasks.len()),
        per_task_recovery_cpu: Vec::with_capacity(tasks.len()),
        attempt_log,
    };
    for task in &mut tasks {
        task.refresh_state();
        let ledger = task.ledger();
        result.cpu_successful += ledger.cpu_useful;
        result.cpu_wasted += ledger.cpu_wasted;
        result.events_succeeded += ledger.events_succeeded;
        result.events_lost += ledger.events_lost;
        result.events_corrupted += ledger.events_corrupted;
        result.events_recovery_queue += ledger.events_recovery_queue;
        result.per_task_recovery.push(ledger.cpu_wasted);
        result
            .per_task_recovery_cpu
            .push(ledger.cpu_wasted.as_core_hours());
    }
    result.tasks = tasks;
    Ok(result)
}

/// Makespan of the scenario with failures switched off.
pub fn ideal_makespan(scenario: &Scenario) -> Result<f64> {
    Ok(run(&scenario.failure_free())?.makespan)
}
