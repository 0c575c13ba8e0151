//! Seeded stage-wise failure injection.
//!
//! An attempt runs three stages in order: setup, compute and stage-out.
//! Each stage fails independently with its own probability, conditional on
//! the attempt reaching it, and the stage decides how much CPU is burnt:
//!
//! | stage     | CPU consumed on failure            |
//! |-----------|------------------------------------|
//! | setup     | `c_setup` of the nominal attempt   |
//! | compute   | `u` of the nominal, `u ~ U(0, 1)`  |
//! | stage-out | the full nominal attempt           |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::job::{FailureStage, JobId, Outcome};
use crate::units::CpuTime;

pub const DEFAULT_SETUP_COST: f64 = 0.01;

fn check_probability(key: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be a probability in [0, 1], got {value}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureModel {
    pub p_setup: f64,
    pub p_compute: f64,
    pub p_stageout: f64,
    /// Fraction of failures that cannot be cured by a retry.
    pub permanent_fraction: f64,
    /// Per-event silent corruption probability on successful attempts.
    pub corruption_per_event: f64,
    /// Fraction of the nominal attempt CPU burnt by a setup failure.
    pub c_setup: f64,
}

impl Default for FailureModel {
    fn default() -> Self {
        FailureModel {
            p_setup: 0.0,
            p_compute: 0.0,
            p_stageout: 0.0,
            permanent_fraction: 0.0,
            corruption_per_event: 0.0,
            c_setup: DEFAULT_SETUP_COST,
        }
    }
}

impl FailureModel {
    pub fn validate(&self) -> Result<()> {
        check_probability("failure.p_setup", self.p_setup)?;
        check_probability("failure.p_compute", self.p_compute)?;
        check_probability("failure.p_stageout", self.p_stageout)?;
        check_probability("failure.permanent_fraction", self.permanent_fraction)?;
        check_probability("failure.corruption_per_event", self.corruption_per_event)?;
        check_probability("failure.c_setup", self.c_setup)
    }

    /// Failure-free copy, used for the ideal-makespan baseline.
    pub fn zeroed(&self) -> FailureModel {
        FailureModel {
            c_setup: self.c_setup,
            ..FailureModel::default()
        }
    }
}

/// A computing site: its capacity, relative speed and relative flakiness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteProfile {
    pub site_id: String,
    pub slots: u32,
    pub speed_factor: f64,
    pub failure_multiplier: f64,
}

impl SiteProfile {
    pub fn new(site_id: impl Into<String>, slots: u32) -> Self {
        SiteProfile {
            site_id: site_id.into(),
            slots,
            speed_factor: 1.0,
            failure_multiplier: 1.0,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if self.site_id.is_empty() {
            return Err(Error::config(format!("{key}.site_id"), "must not be empty"));
        }
        if self.slots == 0 {
            return Err(Error::config(format!("{key}.slots"), "must be at least 1"));
        }
        if !(self.speed_factor.is_finite() && self.speed_factor > 0.0) {
            return Err(Error::config(
                format!("{key}.speed_factor"),
                format!("must be positive and finite, got {}", self.speed_factor),
            ));
        }
        if !(self.failure_multiplier.is_finite() && self.failure_multiplier >= 0.0) {
            return Err(Error::config(
                format!("{key}.failure_multiplier"),
                format!(
                    "must be non-negative and finite, got {}",
                    self.failure_multiplier
                ),
            ));
        }
        Ok(())
    }

    fn effective(&self, p: f64) -> f64 {
        (p * self.failure_multiplier).min(1.0)
    }
}

/// Identifies an independent random stream.
///
/// Every (seed, stream id) pair gives the same draws on every run and
/// platform, so an attempt's fate depends only on which job and retry it
/// is, never on the order in which the engine dispatched work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    /// Attempt indices are bounded by the retry-policy limit, well under 256.
    pub fn for_attempt(seed: u64, job: JobId, attempt_index: u32) -> Self {
        debug_assert!(attempt_index < 256);
        RngStream {
            seed,
            stream_id: (job.0 << 8) | u64::from(attempt_index),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Outcome and cost of an attempt before it is placed on the timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptDraft {
    pub outcome: Outcome,
    pub cpu_consumed: CpuTime,
    pub wall_duration: f64,
    pub events_checkpointed: u64,
    pub cpu_checkpointed: CpuTime,
    pub events_corrupted: u64,
}

/// `1 − Π (1 − min(1, p_stage · multiplier))`.
pub fn overall_failure_prob(model: &FailureModel, site: &SiteProfile) -> f64 {
    let survive = [model.p_setup, model.p_compute, model.p_stageout]
        .into_iter()
        .map(|p| 1.0 - site.effective(p))
        .product::<f64>();
    1.0 - survive
}

/// Draws the fate of one attempt.
///
/// The stream is consumed in a fixed order (three stage draws, the
/// partial-progress draw, the permanence draw, then corruption) so that the
/// outcome does not depend on how many events the attempt carries.
pub fn sample_attempt(
    model: &FailureModel,
    site: &SiteProfile,
    events_to_process: u64,
    cpu_per_event: f64,
    stream: RngStream,
) -> AttemptDraft {
    let mut rng = stream.rng();
    let stage_draws: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let progress: f64 = rng.random();
    let permanence: f64 = rng.random();

    let nominal = events_to_process as f64 * cpu_per_event;
    let stages = [
        (FailureStage::Setup, model.p_setup),
        (FailureStage::Compute, model.p_compute),
        (FailureStage::StageOut, model.p_stageout),
    ];
    let failed = stages
        .iter()
        .zip(stage_draws)
        .find(|((_, p), draw)| *draw < site.effective(*p))
        .map(|((stage, _), _)| *stage);

    let mut draft = AttemptDraft {
        outcome: Outcome::Success,
        cpu_consumed: CpuTime::from_secs(nominal),
        wall_duration: 0.0,
        events_checkpointed: 0,
        cpu_checkpointed: CpuTime::ZERO,
        events_corrupted: 0,
    };

    match failed {
        None => {
            if model.corruption_per_event > 0.0 {
                // p is validated to [0, 1], so construction cannot fail.
                let binomial = Binomial::new(events_to_process, model.corruption_per_event)
                    .expect("validated corruption probability");
                draft.events_corrupted = binomial.sample(&mut rng);
            }
        }
        Some(stage) => {
            draft.outcome = if permanence < model.permanent_fraction {
                Outcome::PermanentFailure(stage)
            } else {
                Outcome::TransientFailure(stage)
            };
            match stage {
                FailureStage::Setup => {
                    draft.cpu_consumed = CpuTime::from_secs(model.c_setup * nominal);
                }
                FailureStage::Compute => {
                    let checkpointed = (progress * events_to_process as f64).floor() as u64;
                    draft.cpu_consumed = CpuTime::from_secs(progress * nominal);
                    draft.events_checkpointed = checkpointed;
                    draft.cpu_checkpointed =
                        CpuTime::from_secs(checkpointed as f64 * cpu_per_event)
                            .min(draft.cpu_consumed);
                }
                FailureStage::StageOut => {}
            }
        }
    }
    draft.wall_duration = draft.cpu_consumed.as_secs() / site.speed_factor;
    draft
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(p_setup: f64, p_compute: f64, p_stageout: f64) -> FailureModel {
        FailureModel {
            p_setup,
            p_compute,
            p_stageout,
            ..FailureModel::default()
        }
    }

    fn site() -> SiteProfile {
        SiteProfile::new("A", 1)
    }

    #[test]
    fn no_failures_means_success() {
        let draft = sample_attempt(
            &model(0.0, 0.0, 0.0),
            &site(),
            100,
            2.5,
            RngStream::for_attempt(1, JobId(0), 0),
        );
        assert_eq!(draft.outcome, Outcome::Success);
        assert_eq!(draft.cpu_consumed, CpuTime::from_secs(250.0));
        assert_eq!(draft.events_corrupted, 0);
        assert_eq!(draft.wall_duration, 250.0);
    }

    #[test]
    fn forced_stageout_costs_full_attempt() {
        for job in 0..50 {
            let draft = sample_attempt(
                &model(0.0, 0.0, 1.0),
                &site(),
                100,
                2.5,
                RngStream::for_attempt(9, JobId(job), 0),
            );
            assert_eq!(
                draft.outcome,
                Outcome::TransientFailure(FailureStage::StageOut)
            );
            assert_eq!(draft.cpu_consumed, CpuTime::from_secs(250.0));
        }
    }

    #[test]
    fn forced_setup_costs_setup_fraction() {
        let draft = sample_attempt(
            &model(1.0, 0.0, 0.0),
            &site(),
            100,
            1.0,
            RngStream::for_attempt(0, JobId(3), 2),
        );
        assert_eq!(
            draft.outcome,
            Outcome::TransientFailure(FailureStage::Setup)
        );
        assert_eq!(draft.cpu_consumed, CpuTime::from_secs(1.0));
    }

    #[test]
    fn compute_failure_reports_checkpoint() {
        for job in 0..200 {
            let d = sample_attempt(
                &model(0.0, 1.0, 0.0),
                &site(),
                6000,
                1.0,
                RngStream::for_attempt(5, JobId(job), 0),
            );
            assert_eq!(d.outcome, Outcome::TransientFailure(FailureStage::Compute));
            assert!(d.events_checkpointed < 6000);
            assert!(d.cpu_checkpointed <= d.cpu_consumed);
            let progress = d.cpu_consumed.as_secs() / 6000.0;
            assert_eq!(d.events_checkpointed, (progress * 6000.0).floor() as u64);
        }
    }

    #[test]
    fn permanent_fraction_one_makes_all_failures_permanent() {
        let mut m = model(0.0, 0.0, 1.0);
        m.permanent_fraction = 1.0;
        let d = sample_attempt(&m, &site(), 10, 1.0, RngStream::for_attempt(0, JobId(0), 0));
        assert_eq!(d.outcome, Outcome::PermanentFailure(FailureStage::StageOut));
    }

    #[test]
    fn site_multiplier_scales_and_clamps() {
        let m = model(0.3, 0.0, 0.0);
        let mut s = site();
        s.failure_multiplier = 5.0;
        assert_eq!(overall_failure_prob(&m, &s), 1.0);
        s.failure_multiplier = 0.0;
        assert_eq!(overall_failure_prob(&m, &s), 0.0);
    }

    #[test]
    fn speed_factor_shortens_wall_time() {
        let mut s = site();
        s.speed_factor = 2.0;
        let d = sample_attempt(
            &model(0.0, 0.0, 0.0),
            &s,
            100,
            1.0,
            RngStream::for_attempt(0, JobId(0), 0),
        );
        assert_eq!(d.wall_duration, 50.0);
        assert_eq!(d.cpu_consumed, CpuTime::from_secs(100.0));
    }

    #[test]
    fn overall_probability_closed_form() {
        assert_eq!(overall_failure_prob(&model(0.0, 0.0, 0.0), &site()), 0.0);
        assert_eq!(overall_failure_prob(&model(1.0, 0.0, 0.0), &site()), 1.0);
        let p = overall_failure_prob(&model(0.02, 0.02, 0.02), &site());
        assert!((p - 0.058808).abs() < 1e-12, "{p}");
    }

    #[test]
    fn same_stream_same_draft() {
        let mut m = model(0.1, 0.2, 0.3);
        m.corruption_per_event = 0.01;
        for job in 0..100 {
            let stream = RngStream::for_attempt(77, JobId(job), 1);
            assert_eq!(
                sample_attempt(&m, &site(), 500, 1.5, stream),
                sample_attempt(&m, &site(), 500, 1.5, stream)
            );
        }
    }

    #[test]
    fn streams_are_distinct() {
        let a = RngStream::for_attempt(1, JobId(1), 0).rng().random::<u64>();
        let b = RngStream::for_attempt(1, JobId(1), 1).rng().random::<u64>();
        let c = RngStream::for_attempt(2, JobId(1), 0).rng().random::<u64>();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn validation_names_the_key() {
        let m = FailureModel {
            p_compute: 1.5,
            ..FailureModel::default()
        };
        match m.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "failure.p_compute"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
