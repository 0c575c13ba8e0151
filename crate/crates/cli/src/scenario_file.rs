//! TOML scenario files.
//!
//! ```toml
//! [dataset]
//! total_events = 900000000
//! events_per_job = 6000
//! nominal_cpu_per_event = 18.0
//!
//! [[site]]
//! site_id = "T0"
//! slots = 2000
//!
//! [failure]
//! p_stageout = 0.02
//!
//! [run]
//! granularity = "event"
//! seed = 7
//! ```
//!
//! Every `[dataset]` key and at least one `[[site]]` with `site_id` and
//! `slots` are required. Everything else defaults:
//!
//! | key                            | default |
//! |--------------------------------|---------|
//! | `site.speed_factor`            | 1.0     |
//! | `site.failure_multiplier`      | 1.0     |
//! | `failure.p_setup`              | 0.0     |
//! | `failure.p_compute`            | 0.0     |
//! | `failure.p_stageout`           | 0.0     |
//! | `failure.permanent_fraction`   | 0.0     |
//! | `failure.corruption_per_event` | 0.0     |
//! | `failure.c_setup`              | 0.01    |
//! | `retry.max_retries`            | 3       |
//! | `retry.requeue_delay`          | 0.0     |
//! | `retry.dedicated_recovery`     | false   |
//! | `run.granularity`              | "job"   |
//! | `run.seed`                     | 0       |
//! | `run.n_tasks`                  | 1       |
//!
//! Unknown keys are rejected. Seeds are TOML integers, so they must fit in
//! an `i64`.

use std::fmt;

use gridrel_core::{
    CheckpointGranularity, DatasetSpec, FailureModel, RetryPolicy, Scenario, SiteProfile,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dataset: DatasetSection,
    #[serde(rename = "site")]
    pub sites: Vec<SiteSection>,
    #[serde(default)]
    pub failure: FailureSection,
    #[serde(default)]
    pub retry: RetrySection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub total_events: u64,
    pub events_per_job: u64,
    pub nominal_cpu_per_event: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSection {
    pub site_id: String,
    pub slots: u32,
    #[serde(default = "one")]
    pub speed_factor: f64,
    #[serde(default = "one")]
    pub failure_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureSection {
    pub p_setup: f64,
    pub p_compute: f64,
    pub p_stageout: f64,
    pub permanent_fraction: f64,
    pub corruption_per_event: f64,
    pub c_setup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub max_retries: u32,
    pub requeue_delay: f64,
    pub dedicated_recovery: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub granularity: String,
    pub seed: u64,
    pub n_tasks: u32,
}

fn one() -> f64 {
    1.0
}

impl Default for FailureSection {
    fn default() -> Self {
        FailureSection::from(&FailureModel::default())
    }
}

impl Default for RetrySection {
    fn default() -> Self {
        let p = RetryPolicy::default();
        RetrySection {
            max_retries: p.max_retries,
            requeue_delay: p.requeue_delay,
            dedicated_recovery: p.dedicated_recovery,
        }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            granularity: CheckpointGranularity::Job.as_str().to_string(),
            seed: 0,
            n_tasks: 1,
        }
    }
}

impl From<&FailureModel> for FailureSection {
    fn from(m: &FailureModel) -> Self {
        FailureSection {
            p_setup: m.p_setup,
            p_compute: m.p_compute,
            p_stageout: m.p_stageout,
            permanent_fraction: m.permanent_fraction,
            corruption_per_event: m.corruption_per_event,
            c_setup: m.c_setup,
        }
    }
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            dataset: DatasetSection {
                total_events: s.dataset.total_events(),
                events_per_job: s.dataset.events_per_job(),
                nominal_cpu_per_event: s.dataset.nominal_cpu_per_event(),
            },
            sites: s
                .sites
                .iter()
                .map(|site| SiteSection {
                    site_id: site.site_id.clone(),
                    slots: site.slots,
                    speed_factor: site.speed_factor,
                    failure_multiplier: site.failure_multiplier,
                })
                .collect(),
            failure: FailureSection::from(&s.failure_model),
            retry: RetrySection {
                max_retries: s.retry_policy.max_retries,
                requeue_delay: s.retry_policy.requeue_delay,
                dedicated_recovery: s.retry_policy.dedicated_recovery,
            },
            run: RunSection {
                granularity: s.granularity.as_str().to_string(),
                seed: s.seed,
                n_tasks: s.n_tasks,
            },
        }
    }

    pub fn to_scenario(&self) -> gridrel_core::Result<Scenario> {
        let d = &self.dataset;
        let dataset = DatasetSpec::new(d.total_events, d.events_per_job, d.nominal_cpu_per_event)?;
        let sites = self
            .sites
            .iter()
            .map(|s| SiteProfile {
                site_id: s.site_id.clone(),
                slots: s.slots,
                speed_factor: s.speed_factor,
                failure_multiplier: s.failure_multiplier,
            })
            .collect();
        let f = &self.failure;
        let granularity = self
            .run
            .granularity
            .parse::<CheckpointGranularity>()
            .map_err(|e| gridrel_core::Error::Config {
                key: "run.granularity".into(),
                message: e.to_string(),
            })?;
        let scenario = Scenario {
            dataset,
            sites,
            failure_model: FailureModel {
                p_setup: f.p_setup,
                p_compute: f.p_compute,
                p_stageout: f.p_stageout,
                permanent_fraction: f.permanent_fraction,
                corruption_per_event: f.corruption_per_event,
                c_setup: f.c_setup,
            },
            retry_policy: RetryPolicy {
                max_retries: self.retry.max_retries,
                requeue_delay: self.retry.requeue_delay,
                dedicated_recovery: self.retry.dedicated_recovery,
            },
            granularity,
            seed: self.run.seed,
            n_tasks: self.run.n_tasks,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// A scenario file that could not be turned into a valid [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    /// Dotted key, e.g. `failure.p_compute`, when one can be pinned down.
    pub key: Option<String>,
    /// 1-based line in the source text.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("scenario")?;
        if let Some(line) = self.line {
            write!(f, " line {line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, " key `{key}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ScenarioError {}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|span| line_of(text, span.start));
        ScenarioError {
            key: line.and_then(|l| key_at_line(text, l)),
            line,
            message: single_line(e.message()),
        }
    })?;
    file.to_scenario().map_err(|e| match e {
        gridrel_core::Error::Config { key, message } => ScenarioError {
            line: locate_key(text, &key),
            key: Some(key),
            message,
        },
        other => ScenarioError {
            key: None,
            line: None,
            message: other.to_string(),
        },
    })
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(scenario))
        .expect("scenario sections always map onto TOML")
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

enum Line<'a> {
    Header { name: &'a str, array: bool },
    Key(&'a str),
    Other,
}

fn classify(raw: &str) -> Line<'_> {
    let s = raw.trim();
    if let Some(inner) = s.strip_prefix("[[").and_then(|r| r.split("]]").next()) {
        return Line::Header {
            name: inner.trim(),
            array: true,
        };
    }
    if let Some(inner) = s.strip_prefix('[').and_then(|r| r.split(']').next()) {
        return Line::Header {
            name: inner.trim(),
            array: false,
        };
    }
    match s.split_once('=') {
        Some((key, _)) if !s.starts_with('#') => Line::Key(key.trim().trim_matches('"')),
        _ => Line::Other,
    }
}

/// Dotted key defined on a given line, if the line holds an assignment.
fn key_at_line(text: &str, line: usize) -> Option<String> {
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        match classify(raw) {
            Line::Header { name, .. } => section = name.to_string(),
            Line::Key(key) if i + 1 == line => {
                return Some(if section.is_empty() {
                    key.to_string()
                } else {
                    format!("{section}.{key}")
                });
            }
            _ => {}
        }
        if i + 1 >= line {
            break;
        }
    }
    None
}

/// Line on which a dotted key such as `failure.p_compute` or
/// `site[2].slots` is written. Falls back to the section header when the key
/// was defaulted.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let (section, leaf) = key.split_once('.').unwrap_or((key, ""));
    let (name, index) = match section.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (section, None),
    };
    let mut current: Option<&str> = None;
    let mut seen = 0usize;
    let mut header_line = None;
    let mut in_target = false;
    for (i, raw) in text.lines().enumerate() {
        match classify(raw) {
            Line::Header { name: n, array } => {
                current = Some(n);
                in_target = false;
                if n == name {
                    let matches = if array {
                        index.is_none_or(|want| want == seen)
                    } else {
                        true
                    };
                    if array {
                        seen += 1;
                    }
                    if matches {
                        in_target = true;
                        header_line.get_or_insert(i + 1);
                    }
                }
            }
            Line::Key(k) if in_target && current == Some(name) && k == leaf => return Some(i + 1),
            _ => {}
        }
    }
    header_line
}
