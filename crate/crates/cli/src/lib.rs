//! Command-line front end for `pmfix`: loads a scenario (a built-in name or a
//! JSON file), runs one check, and prints a report.
//!
//! Exit codes: 0 when everything passed or converged, 1 when a violation or
//! non-convergence was found, 2 for input errors.

pub mod commands;
pub mod report;
pub mod scenario;
pub mod text;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{execute, Action, EXIT_INPUT, EXIT_PASS, EXIT_VIOLATION};
pub use report::{to_stable_json, Report};
pub use scenario::{load_scenario, parse_scenario, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid scenario {origin} at `{path}`: {message}")]
    Scenario {
        origin: String,
        path: String,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pmfix::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "pmfix",
    version,
    about = "Check contraction conditions and solve for fixed points in partial metric spaces"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Override the scenario's sampling grid step.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the partial metric axioms and the induced metric on a sample.
    Axioms {
        /// Built-in scenario name or path to a scenario file.
        scenario: String,
    },
    /// Validate the comparison function.
    Phi {
        scenario: String,
        /// Evaluate the n-th iterate of phi at t.
        #[arg(long, num_args = 2, value_names = ["T", "N"])]
        iterate: Option<Vec<String>>,
        /// Evaluate the inverse of f(t) = t - phi(t) at s.
        #[arg(long, value_name = "S")]
        inverse: Option<f64>,
    },
    /// Scan sampled pairs for violations of a contraction condition.
    Contraction {
        scenario: String,
        /// eq3, eq8, eq9 or thm1; defaults to the scenario's condition.
        #[arg(long)]
        condition: Option<String>,
        /// Constant for thm1.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run Picard iteration and certify the limit.
    Solve {
        scenario: String,
        /// Single starting point.
        #[arg(long, conflicts_with = "all_starts")]
        start: Option<f64>,
        /// Every start listed in the scenario (the default).
        #[arg(long)]
        all_starts: bool,
    },
    /// Seeded random search for a violating pair.
    Falsify {
        scenario: String,
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn scenario(&self) -> &str {
        match self {
            Command::Axioms { scenario }
            | Command::Phi { scenario, .. }
            | Command::Contraction { scenario, .. }
            | Command::Solve { scenario, .. }
            | Command::Falsify { scenario, .. } => scenario,
        }
    }

    fn action(&self) -> Result<Action, CliError> {
        Ok(match self {
            Command::Axioms { .. } => Action::Axioms,
            Command::Phi {
                iterate, inverse, ..
            } => {
                let iterate = match iterate.as_deref() {
                    Some([t, n]) => {
                        let t: f64 = t.parse().map_err(|_| {
                            CliError::Usage(format!("--iterate: `{t}` is not a number"))
                        })?;
                        let n: u64 = n.parse().map_err(|_| {
                            CliError::Usage(format!(
                                "--iterate: `{n}` is not a nonnegative integer"
                            ))
                        })?;
                        Some((t, n))
                    }
                    Some(_) => return Err(CliError::Usage("--iterate takes T and N".into())),
                    None => None,
                };
                Action::Phi {
                    iterate,
                    inverse: *inverse,
                }
            }
            Command::Contraction {
                condition, alpha, ..
            } => Action::Contraction {
                condition: condition.clone(),
                alpha: *alpha,
            },
            Command::Solve { start, .. } => Action::Solve { start: *start },
            Command::Falsify {
                condition,
                alpha,
                budget,
                seed,
                ..
            } => Action::Falsify {
                condition: condition.clone(),
                alpha: *alpha,
                budget: *budget,
                seed: *seed,
            },
        })
    }
}

/// What a run prints and how it exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parses `args` (program name first) and runs the command in-process.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_cli(&cli),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_PASS
            };
            let text = e.render().to_string();
            if e.use_stderr() {
                Output {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            } else {
                Output {
                    stdout: text,
                    stderr: String::new(),
                    code,
                }
            }
        }
    }
}

pub fn run_cli(cli: &Cli) -> Output {
    match run_inner(cli) {
        Ok((report, code)) => {
            let stdout = match cli.format {
                Format::Json => to_stable_json(&report),
                Format::Text => text::render(&report),
            };
            Output {
                stdout,
                stderr: String::new(),
                code,
            }
        }
        Err(e) => Output {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            code: EXIT_INPUT,
        },
    }
}

fn run_inner(cli: &Cli) -> Result<(Report, i32), CliError> {
    let mut scenario = load_scenario(cli.command.scenario())?;
    if let Some(step) = cli.grid_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Usage(format!(
                "--grid-step must be positive, got {step}"
            )));
        }
        scenario.sampling.grid_step = step;
    }
    let action = cli.command.action()?;
    execute(&scenario, &action)
}
