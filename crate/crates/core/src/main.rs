use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use wingpitch::checks;
use wingpitch::controller::ControllerMode;
use wingpitch::scenario::{self, ModeSwitch, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "wingpitch",
    version,
    about = "Adaptive-critic wing pitch controller and scenario runner"
)]
struct Cli {
    /// Print the full default configuration of a scenario and exit.
    #[arg(long, value_name = "SCENARIO")]
    dump_default_config: Option<ScenarioKind>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write telemetry, summary and final weights.
    Run {
        scenario: ScenarioKind,
        /// Configuration file; unknown keys are an error. Start from
        /// `--dump-default-config`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Weight snapshot to start from (required by frozen_policy).
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Controller mode for the whole run, replacing the configured schedule.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ControllerMode>,
        /// Also write a gnuplot script next to the telemetry.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run the gradient, value-iteration and integrator invariant suite.
    Check,
    /// Recompute error metrics from a telemetry CSV.
    Metrics {
        csv: PathBuf,
        /// Seconds excluded from the start of the record.
        #[arg(long, default_value_t = 2.0)]
        warm_up: f64,
    },
}

fn parse_mode(s: &str) -> std::result::Result<ControllerMode, String> {
    s.parse::<ControllerMode>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(kind) = cli.dump_default_config {
        print!("{}", ScenarioSpec::default_for(kind).to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    match cli.command {
        Some(Command::Run {
            scenario,
            config,
            seed,
            out,
            snapshot,
            mode,
            gnuplot,
        }) => run(scenario, config, seed, out, snapshot, mode, gnuplot),
        Some(Command::Check) => check(),
        Some(Command::Metrics { csv, warm_up }) => metrics(csv, warm_up),
        None => {
            eprintln!("nothing to do; see --help");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn run(
    kind: ScenarioKind,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    snapshot: Option<PathBuf>,
    mode: Option<ControllerMode>,
    gnuplot: bool,
) -> Result<ExitCode> {
    let mut spec = match &config {
        Some(path) => ScenarioSpec::load(path)?,
        None => ScenarioSpec::default_for(kind),
    };
    if spec.name != kind {
        anyhow::bail!(
            "configuration is for {} but {} was requested",
            spec.name.as_str(),
            kind.as_str()
        );
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if snapshot.is_some() {
        spec.snapshot = snapshot;
    }
    if let Some(mode) = mode {
        spec.mode_schedule = vec![ModeSwitch { at: 0.0, mode }];
    }
    let run = scenario::run_scenario(&spec)?;
    scenario::write_outputs(&run, &out, gnuplot)
        .with_context(|| format!("writing results to {}", out.display()))?;
    print!("{}", run.summary.to_text());
    if let Some(halt) = &run.summary.halt {
        eprintln!(
            "run stopped at t = {:.2} s: {} (telemetry up to that point is in {})",
            halt.time,
            halt.reason,
            out.display()
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn check() -> Result<ExitCode> {
    let reports = checks::run_all()?;
    for r in &reports {
        println!("{}", r.line());
    }
    Ok(if reports.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn metrics(csv: PathBuf, warm_up: f64) -> Result<ExitCode> {
    let rows = scenario::read_telemetry(&csv)?;
    let m = scenario::compute_metrics(&rows, warm_up)?;
    println!("abs_avg_error_deg = {:?}", m.abs_avg_error);
    println!("max_abs_error_deg = {:?}", m.max_abs_error);
    println!("samples = {}", m.samples);
    println!("warm_up_excluded_s = {:?}", m.warm_up);
    println!(
        "final_value_tracking = {:?}",
        m.value_tracking.last().copied().unwrap_or(0.0)
    );
    println!(
        "final_value_stabilizing = {:?}",
        m.value_stabilizing.last().copied().unwrap_or(0.0)
    );
    Ok(ExitCode::SUCCESS)
}
