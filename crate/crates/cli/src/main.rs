// SPDX-License-Identifier: Apache-2.0

//! `forcetrack` — run force-tracking experiments from a scenario file.
//!
//! Subcommands: `run` (single trajectory + filter pass), `montecarlo`
//! (ensemble accuracy report), `discretize` (print the discrete system).
//! Exit codes: 0 success, 1 configuration error, 2 model infeasibility,
//! 3 I/O error.

mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forcetrack::error::Error;
use forcetrack::experiment::{monte_carlo, run_single, MonteCarloOptions};
use forcetrack::Scenario;

use output::{accuracy_csv, run_csv, MonteCarloSummary, RunSummary};

#[derive(Parser)]
#[command(name = "forcetrack", version, about = "Track an unknown force acting on a linear Gaussian system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory, filter it and estimate the force.
    ///
    /// Writes run.csv and summary.json to the output directory.
    Run(CommonArgs),
    /// Run a Monte Carlo ensemble and compare numerical with theoretical
    /// accuracy.
    ///
    /// Writes accuracy.csv and summary.json to the output directory.
    Montecarlo(MonteCarloArgs),
    /// Print the discretized system matrices.
    Discretize(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory (overrides the scenario's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Debug: give every run the same noise sub-stream.
    #[arg(long)]
    identical_seeds: bool,
    /// Execute runs serially instead of across threads.
    #[arg(long)]
    serial: bool,
}

enum CliError {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Infeasible(_)
            | Error::NotPositiveDefinite(_)
            | Error::NotPositiveSemiDefinite(..)
            | Error::NotSymmetric(_)
            | Error::RankDeficient(_) => CliError::Infeasible(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
        Command::Discretize(args) => cmd_discretize(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Loads the scenario and applies command-line overrides.
fn load_scenario(args: &CommonArgs) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::load(&args.config)?;
    if let Some(seed) = args.seed {
        scenario.experiment.seed = seed;
    }
    if let Some(runs) = args.runs {
        scenario.experiment.n_runs = runs;
    }
    if let Some(out) = &args.out {
        scenario.output.dir = Some(out.clone());
    }
    scenario.validate()?;
    Ok(scenario)
}

fn out_dir(scenario: &Scenario) -> Result<PathBuf, CliError> {
    let dir = scenario
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_run(args: CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args)?;
    let dm = scenario.build_discrete()?;
    let sig = scenario.build_force()?;
    let init = scenario.build_filter_init()?;
    let result = run_single(
        &dm,
        &sig,
        &init,
        &scenario.x0(),
        scenario.experiment.steps,
        scenario.experiment.seed,
    )?;

    let steady_from = scenario
        .experiment
        .steady_from
        .min(result.mse_theory.len().saturating_sub(1));
    let steady = &result.mse_theory[steady_from..];
    let steady_state_force_mse = steady.iter().map(|m| m[(0, 0)]).sum::<f64>() / steady.len().max(1) as f64;
    let e_t_bias = forcetrack::experiment::time_average_bias(&result.f_err)?[0];
    let rms_force_error = (result.f_err.iter().map(|e| e.norm_squared()).sum::<f64>()
        / result.f_err.len().max(1) as f64)
        .sqrt();

    let dir = out_dir(&scenario)?;
    write_artifact(
        &dir,
        "run.csv",
        &run_csv(&result, dm.n_states(), dm.n_outputs(), dm.n_inputs()),
    )?;
    let summary = RunSummary {
        command: "run",
        seed: scenario.experiment.seed,
        e_t_bias,
        rms_force_error,
        steady_state_force_mse,
        config: &scenario,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("summary encode: {e}")))?;
    write_artifact(&dir, "summary.json", &json)?;
    Ok(())
}

fn cmd_montecarlo(args: MonteCarloArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.common)?;
    if scenario.experiment.n_runs < 2 {
        return Err(CliError::Config(format!(
            "montecarlo needs n_runs >= 2, got {}",
            scenario.experiment.n_runs
        )));
    }
    let dm = scenario.build_discrete()?;
    let sig = scenario.build_force()?;
    let init = scenario.build_filter_init()?;
    let opts = MonteCarloOptions {
        parallel: !args.serial,
        identical_seeds: args.identical_seeds,
        steady_from: scenario.experiment.steady_from,
    };
    let report = monte_carlo(
        &dm,
        &sig,
        &init,
        &scenario.x0(),
        scenario.experiment.steps,
        scenario.experiment.n_runs,
        scenario.experiment.seed,
        &opts,
    )?;

    let dir = out_dir(&scenario)?;
    write_artifact(
        &dir,
        "accuracy.csv",
        &accuracy_csv(&report, dm.dt(), dm.n_inputs()),
    )?;
    let summary = MonteCarloSummary {
        command: "montecarlo",
        seed: scenario.experiment.seed,
        n_runs: report.n_runs,
        steady_from: report.steady_from,
        grand_ratio: report.grand_ratio,
        grand_bias_f: report.grand_bias_f[0],
        config: &scenario,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("summary encode: {e}")))?;
    write_artifact(&dir, "summary.json", &json)?;
    Ok(())
}

fn cmd_discretize(args: CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args)?;
    let dm = scenario.build_discrete()?;
    let mut text = String::new();
    for (name, matrix) in [
        ("A", dm.a()),
        ("B", dm.b()),
        ("H", dm.h()),
        ("Q", dm.q()),
        ("R", dm.r()),
    ] {
        let _ = writeln!(text, "{name} ({}x{})", matrix.nrows(), matrix.ncols());
        for i in 0..matrix.nrows() {
            let row: Vec<String> = (0..matrix.ncols())
                .map(|j| format!("{:.16e}", matrix[(i, j)]))
                .collect();
            let _ = writeln!(text, "  {}", row.join("  "));
        }
    }
    let _ = writeln!(text, "dt = {:.16e}", dm.dt());

    // Tolerate a closed pipe (e.g. `discretize ... | head`).
    use std::io::Write as _;
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
