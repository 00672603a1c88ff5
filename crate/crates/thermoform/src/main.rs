//! Thin command-line front end of the forming-process estimation pipeline.
//!
//! All heavy lifting lives in the library (`thermoform::pipeline`); this
//! binary only parses arguments, loads the configuration and maps errors to
//! exit codes: `0` success, `1` invalid input or configuration, `2`
//! numerical failure during a run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use thermoform::pipeline::{
    cmd_estimate, cmd_evaluate, cmd_reduce, cmd_simulate, EstimateOptions, ExperimentConfig,
    PlantSource,
};

#[derive(Parser)]
#[command(
    name = "thermoform",
    version,
    about = "Temperature and disturbance estimation for hot sheet metal forming"
)]
struct Cli {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed of the sensor-noise generator (used by `simulate`).
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    seed: u64,

    /// Directory for artifacts, tables and reports.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order plant and record state history and sensor data.
    Simulate,
    /// Sweep process corners, build the reduced basis and freeze the schedule.
    Reduce,
    /// Estimate temperatures and disturbances from recorded measurements.
    Estimate {
        /// Measurement source: `fom` (the recorded plant run in the output
        /// directory) or `external:PATH` (a plant-run container from
        /// elsewhere).
        #[arg(long, default_value = "fom")]
        plant: String,

        /// Track temperatures only; leave the disturbance channels out of
        /// the filter.
        #[arg(long)]
        no_disturbance_estimation: bool,
    },
    /// Re-run the built-in verification checks and map end-of-cycle
    /// properties from recorded histories.
    Evaluate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    match run(cli) {
        Ok((line, healthy)) => {
            println!("{line}");
            if healthy {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

/// Returns the summary line and whether the run is numerically healthy.
fn run(cli: Cli) -> thermoform::Result<(String, bool)> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };

    match cli.command {
        Command::Simulate => {
            let s = cmd_simulate(&cfg, &cli.out, cli.seed)?;
            Ok((
                format!(
                    "simulated {} steps on {} nodes in {:.2} s; final field {:.1}..{:.1} K",
                    s.n_steps, s.n_nodes, s.runtime_s, s.final_min_kelvin, s.final_max_kelvin
                ),
                true,
            ))
        }
        Command::Reduce => {
            let s = cmd_reduce(&cfg, &cli.out)?;
            Ok((
                format!(
                    "reduced {} snapshots from {} runs to rank {} (energy {:.4}) in {:.2} s",
                    s.n_snapshots, s.n_runs, s.rank, s.energy_first_powers, s.runtime_s
                ),
                true,
            ))
        }
        Command::Estimate {
            plant,
            no_disturbance_estimation,
        } => {
            let opts = EstimateOptions {
                plant: PlantSource::parse(&plant)?,
                estimate_disturbance: !no_disturbance_estimation,
            };
            let s = cmd_estimate(&cfg, &cli.out, &opts)?;
            let rmse = s
                .rmse_mean
                .map_or("n/a (no recorded truth)".to_string(), |v| {
                    format!("{v:.2} K")
                });
            Ok((
                format!(
                    "estimated {} states + {} disturbances from {} sensors; field error {}",
                    s.rank,
                    if s.estimate_disturbance {
                        s.n_disturbances
                    } else {
                        0
                    },
                    s.n_outputs,
                    rmse
                ),
                true,
            ))
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&cfg, &cli.out)?;
            for c in &s.checks {
                println!(
                    "check {:<34} {}  (measured {:.3e}, tolerance {:.3e})",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.measured,
                    c.tolerance
                );
            }
            if let Some(sp) = &s.speedup {
                println!(
                    "speedup {:.0}x: full order {:.3} s vs reduced {:.5} s \
                     ({} nodes, rank {}, {} steps, medians of 3)",
                    sp.factor, sp.fom_median_s, sp.rom_median_s, sp.n_nodes, sp.rank, sp.n_steps
                );
            }
            Ok((
                format!(
                    "{}/{} verification checks passed",
                    s.checks_passed,
                    s.checks.len()
                ),
                s.all_checks_passed,
            ))
        }
    }
}
