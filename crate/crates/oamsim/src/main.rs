//! Thin command-line front end over [`oamsim::scenario`]: validates and runs
//! scenario files and lists the built-in kinds. Exit codes: 0 on success, 2
//! on validation failure, 3 on numerical failure, 1 on io trouble.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oamsim::scenario::{list_scenarios, run_scenario, validate_config, ScenarioError};

/// Local discrimination of photon orbital angular momentum with a
/// two-crystal shear interferometer: scenario files in, CSV + SVG + JSON
/// bundles out.
#[derive(Parser)]
#[command(name = "oamsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (TOML config or metadata.json sidecar) and write
    /// its output bundle.
    Run {
        scenario_file: PathBuf,
        /// Directory receiving the bundle directory. Defaults to
        /// $OAMSIM_OUTPUT_ROOT, then ./out.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// List the scenario kinds and the defaults each runs with.
    ListScenarios,
    /// Parse a scenario file and print its normalized form.
    Validate { scenario_file: PathBuf },
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("OAMSIM_OUTPUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn fail(err: &ScenarioError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().command {
        Command::Run { scenario_file, output_root: root } => {
            let scenario = match validate_config(&scenario_file) {
                Ok(scenario) => scenario,
                Err(err) => return fail(&err),
            };
            match run_scenario(&scenario, &output_root(root)) {
                Ok(report) => {
                    println!("{}", report.output_dir.display());
                    for file in &report.files {
                        println!("  {file}");
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => fail(&err),
            }
        }
        Command::ListScenarios => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Command::Validate { scenario_file } => match validate_config(&scenario_file) {
            Ok(scenario) => {
                match toml::to_string(&scenario) {
                    Ok(text) => print!("{text}"),
                    Err(err) => {
                        eprintln!("error: serializing normalized scenario: {err}");
                        return ExitCode::FAILURE;
                    }
                }
                ExitCode::SUCCESS
            }
            Err(err) => fail(&err),
        },
    }
}
