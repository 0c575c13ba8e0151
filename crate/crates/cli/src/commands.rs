use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gridrel_core::weibull::{compare_mode_counts, fit_mixture, ks_statistic, FitOptions};
use gridrel_core::{
    ideal_makespan, rate_from_sigma, recovery_cost_samples, run, sigma_from_rate, Scenario,
    SigmaConvention, SimResult,
};
use thiserror::Error;

use crate::scenario_file::{parse_scenario, ScenarioError};
use crate::summary::RunSummary;

pub const SUMMARY_FILE: &str = "summary.json";
pub const RECOVERY_FILE: &str = "recovery_costs.csv";
pub const ATTEMPTS_FILE: &str = "attempts.csv";

/// Mode counts tried by the comparison that `fit` prints.
pub const COMPARE_MODES: usize = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Scenario {
        path: PathBuf,
        source: ScenarioError,
    },
    #[error("{}: {message}", path.display())]
    Samples { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] gridrel_core::Error),
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_scenario(&text).map_err(|source| CliError::Scenario {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a scenario and its failure-free baseline.
pub fn simulate(scenario: &Scenario) -> Result<(SimResult, RunSummary), CliError> {
    let result = run(scenario)?;
    let ideal = ideal_makespan(scenario)?;
    let summary = RunSummary::new(scenario, &result, ideal);
    Ok((result, summary))
}

/// Simulates the scenario file and writes `summary.json`,
/// `recovery_costs.csv` and, on request, `attempts.csv` into `out_dir`.
pub fn cmd_run(
    scenario_path: &Path,
    out_dir: &Path,
    attempts_log: bool,
) -> Result<RunSummary, CliError> {
    let scenario = load_scenario(scenario_path)?;
    let (result, summary) = simulate(&scenario)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, summary.to_json()).map_err(io_err(&path))?;
    write_recovery_costs(&result, &out_dir.join(RECOVERY_FILE))?;
    if attempts_log {
        write_attempts(&result, &out_dir.join(ATTEMPTS_FILE))?;
    }
    Ok(summary)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(io_err(path))
}

pub fn write_recovery_costs(result: &SimResult, path: &Path) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["task_id", "recovery_cpu_hours"])
        .map_err(csv_err(path))?;
    for cost in recovery_cost_samples(result) {
        w.write_record([cost.task_id.to_string(), cost.cpu_hours.to_string()])
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn write_attempts(result: &SimResult, path: &Path) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "job_id",
        "attempt",
        "site_id",
        "outcome",
        "stage",
        "cpu_seconds",
        "wall_start",
        "wall_end",
        "events_corrupted",
    ])
    .map_err(csv_err(path))?;
    for rec in &result.attempt_log {
        let a = &rec.attempt;
        w.write_record([
            rec.job_id.to_string(),
            a.attempt_index.to_string(),
            result.site_ids[a.site].clone(),
            a.outcome.as_str().to_string(),
            a.outcome
                .stage()
                .map(|s| s.as_str())
                .unwrap_or("")
                .to_string(),
            a.cpu_consumed.to_string(),
            a.wall_start.to_string(),
            a.wall_end.to_string(),
            a.events_corrupted.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Samples from the last column of a CSV file. A non-numeric first row is
/// taken as a header. Zeros (tasks that needed no recovery) are dropped and
/// counted.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, usize), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let bad = |message: String| CliError::Samples {
        path: path.to_path_buf(),
        message,
    };
    let (mut samples, mut zeros) = (Vec::new(), 0usize);
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let Some(field) = record.iter().next_back().map(str::trim) else {
            continue;
        };
        let value = match field.parse::<f64>() {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(format!("row {}: `{field}` is not a number", i + 1))),
        };
        if !(value.is_finite() && value >= 0.0) {
            return Err(bad(format!(
                "row {}: sample {value} is not a non-negative number",
                i + 1
            )));
        }
        if value == 0.0 {
            zeros += 1;
        } else {
            samples.push(value);
        }
    }
    Ok((samples, zeros))
}

/// Fits a Weibull mixture and reports it with a KS statistic and a
/// comparison over one to three modes.
pub fn cmd_fit(samples_path: &Path, n_modes: usize) -> Result<String, CliError> {
    let (samples, zeros) = read_samples(samples_path)?;
    let opts = FitOptions::default();
    let fit = fit_mixture(&samples, n_modes, &opts)?;
    let ks = ks_statistic(&samples, &fit.model)?;

    let mut out = String::new();
    writeln!(
        out,
        "samples: {} ({zeros} zero values excluded)",
        samples.len()
    )
    .unwrap();
    writeln!(out, "modes: {n_modes}").unwrap();
    for (i, c) in fit.model.components().iter().enumerate() {
        writeln!(
            out,
            "component {}: weight={:.6} shape={:.6} scale={:.6}",
            i + 1,
            c.weight,
            c.params.shape,
            c.params.scale
        )
        .unwrap();
    }
    writeln!(out, "log_likelihood: {:.6}", fit.log_likelihood).unwrap();
    writeln!(out, "ks_statistic: {ks:.6}").unwrap();
    writeln!(
        out,
        "converged: {} after {} iterations",
        fit.converged, fit.iterations
    )
    .unwrap();
    writeln!(out, "mode comparison:").unwrap();
    for f in compare_mode_counts(&samples, COMPARE_MODES, &opts)? {
        writeln!(
            out,
            "  modes={} log_likelihood={:.6} bic={:.6}",
            f.n_modes(),
            f.log_likelihood,
            f.bic(samples.len())
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaQuery {
    /// Defect rate to sigma level.
    Rate(f64),
    /// Sigma level to defect rate.
    Sigma(f64),
}

pub fn cmd_sigma(query: SigmaQuery, convention: SigmaConvention) -> Result<String, CliError> {
    let value = match query {
        SigmaQuery::Rate(rate) => sigma_from_rate(rate, convention)?,
        SigmaQuery::Sigma(sigma) => rate_from_sigma(sigma, convention)?,
    };
    Ok(format!("{value:?}"))
}

/// Writes a string and a newline to stdout.
pub fn print(text: &str) -> std::io::Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        stdout.write_all(b"\n")?;
    }
    stdout.flush()
}
