//! Scenario runner. Exit codes: 0 clean run, 1 bad input or I/O trouble,
//! 2 the run finished but at least one collision was recorded.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iavsim_core::engine::{EngineOptions, World};
use iavsim_core::metrics;
use iavsim_core::scenario;
use iavsim_core::trace::Trace;

#[derive(Parser)]
#[command(
    name = "iavsim",
    version,
    about = "Deterministic warehouse fleet simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and report per-station metrics.
    Run {
        scenario: PathBuf,
        /// Override the scenario's step count.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Record the full event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Recompute metrics from a recorded trace, without simulating.
    Replay {
        trace: PathBuf,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Parse a scenario file and report whether it is usable.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            steps,
            seed,
            trace,
            metrics,
        } => run(scenario, steps, seed, trace, metrics),
        Command::Replay { trace, metrics } => replay(trace, metrics),
        Command::Validate { scenario } => validate(scenario),
    }
}

fn fail(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(1)
}

/// Print to stdout, shrugging off a closed pipe (e.g. piping into `head`).
fn print_out(text: &str) -> Result<(), String> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(format!("stdout: {e}")),
    }
}

fn load_scenario(path: &PathBuf) -> Result<scenario::Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    scenario::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit_csv(csv: &str, target: Option<PathBuf>) -> Result<(), String> {
    match target {
        Some(path) => fs::write(&path, csv).map_err(|e| format!("{}: {e}", path.display())),
        None => print_out(csv),
    }
}

fn run(
    scenario_path: PathBuf,
    steps: Option<u64>,
    seed: Option<u64>,
    trace_path: Option<PathBuf>,
    metrics_path: Option<PathBuf>,
) -> ExitCode {
    let mut scenario = match load_scenario(&scenario_path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Some(steps) = steps {
        scenario.steps = steps;
    }
    if let Some(seed) = seed {
        scenario.seed = seed;
    }

    let world = match World::new(&scenario, EngineOptions::default()) {
        Ok(w) => w,
        Err(e) => return fail(e.to_string()),
    };
    let result = match world.run() {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };

    if let Some(path) = trace_path {
        if let Err(e) = fs::write(&path, result.trace.serialize()) {
            return fail(format!("{}: {e}", path.display()));
        }
    }

    let summary = format!(
        "steps={} collisions={} mutex_violations={}\n",
        result.steps, result.collisions, result.mutex_violations
    );
    if let Err(e) = print_out(&summary) {
        return fail(e);
    }
    let report = metrics::compute(&result.trace);
    if let Err(e) = emit_csv(&metrics::to_csv(&report), metrics_path) {
        return fail(e);
    }

    if result.collisions > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn replay(trace_path: PathBuf, metrics_path: Option<PathBuf>) -> ExitCode {
    let text = match fs::read_to_string(&trace_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", trace_path.display())),
    };
    let trace = match Trace::parse(&text) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", trace_path.display())),
    };
    let report = metrics::compute(&trace);
    let collisions = report.fleet_collisions;
    if let Err(e) = emit_csv(&metrics::to_csv(&report), metrics_path) {
        return fail(e);
    }
    if collisions > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(scenario_path: PathBuf) -> ExitCode {
    match load_scenario(&scenario_path) {
        Ok(s) => {
            let line = format!(
                "ok: {} vehicles, {} obstacles, {} pedestrians, {} steps\n",
                s.vehicles.len(),
                s.obstacles.len(),
                s.pedestrians.len(),
                s.steps
            );
            match print_out(&line) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Err(e) => fail(e),
    }
}
