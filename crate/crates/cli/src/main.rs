use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridrel_cli::commands::print;
use gridrel_cli::{cmd_fit, cmd_run, cmd_sigma, SigmaQuery};
use gridrel_core::SigmaConvention;

#[derive(Parser)]
#[command(
    name = "gridrel",
    version,
    about = "Grid campaign reliability simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and write the summary and CSVs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write attempts.csv.
        #[arg(long)]
        attempts_log: bool,
    },
    /// Fit a Weibull mixture to the last column of a CSV file.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 1)]
        modes: usize,
    },
    /// Convert between defect rate and sigma level.
    Sigma {
        #[command(flatten)]
        query: Query,
        #[arg(long, value_enum, default_value_t = Convention::Math)]
        convention: Convention,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Query {
    #[arg(long, allow_negative_numbers = true)]
    rate: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Math,
    Industrial,
}

fn fail(message: &str) -> ExitCode {
    let line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error: {}", line.trim_start_matches("error: "));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            return fail(rendered.lines().next().unwrap_or("invalid arguments"));
        }
    };
    let outcome = match cli.command {
        Command::Run {
            scenario,
            out,
            attempts_log,
        } => cmd_run(&scenario, &out, attempts_log)
            .map(|s| format!("wrote {} (seed {})", out.display(), s.seed)),
        Command::Fit { samples, modes } => cmd_fit(&samples, modes),
        Command::Sigma { query, convention } => {
            let q = match (query.rate, query.sigma) {
                (Some(r), _) => SigmaQuery::Rate(r),
                (_, Some(s)) => SigmaQuery::Sigma(s),
                _ => unreachable!("clap requires one of --rate and --sigma"),
            };
            let c = match convention {
                Convention::Math => SigmaConvention::Mathematical,
                Convention::Industrial => SigmaConvention::Industrial,
            };
            cmd_sigma(q, c)
        }
    };
    match outcome {
        Ok(text) => match print(&text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&format!("stdout: {e}")),
        },
        Err(e) => fail(&e.to_string()),
    }
}
