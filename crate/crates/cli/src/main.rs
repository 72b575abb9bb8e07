//! `cvtel`: scenario runner for the CV-teleportation response-ratio engine.
//!
//! Subcommands map one-to-one onto scenario task kinds; `--config` loads a
//! scenario file (the sidecar written by any previous run is itself a valid
//! config). Exit codes: 0 success, 2 configuration error, 3 numerical error.

mod runner;
mod scenario;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cv_teleport::gaussian_states::{ChannelParams, ComplexDef, StateDescriptor};
use cv_teleport::pv_ops::{ModeOp, OperationDescriptor};

use runner::{parse_precision, run_scenario, CliError};
use scenario::{GridSpec, InputDescriptor, LabeledOperation, Scenario, Task};

#[derive(Parser)]
#[command(
    name = "cvtel",
    version,
    about = "CV teleportation with photon-varying operations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file; must match the subcommand's task kind.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for all stochastic components (overrides the scenario value).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Numeric policy: machine | extended:`<bits>`.
    #[arg(long, global = true)]
    precision: Option<String>,

    /// Worker threads (output is identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Response-ratio curves for photon-varying operations.
    ResponseRatio,
    /// Teleportation fidelity for a chosen input state.
    Fidelity,
    /// Swarm optimization of the integrated response ratio.
    Optimize,
    /// Dissipative-scenario ratio over a grid.
    HPrime,
    /// Cross-check the analytic engine against the Fock oracle.
    OracleValidate,
    /// Reproduce a built-in figure dataset.
    Figure {
        /// One of fig2a..fig5b.
        id: String,
    },
}

fn default_seed() -> u64 {
    42
}

fn default_scenario(command: &Command) -> Scenario {
    let tmsv8 = StateDescriptor::tmsv_db(8.0);
    let (name, resource, task) = match command {
        Command::ResponseRatio => (
            "response_ratio",
            tmsv8,
            Task::ResponseRatioGrid {
                operations: vec![LabeledOperation {
                    label: "H_sub1".into(),
                    op: OperationDescriptor::Pv {
                        pv: vec![ModeOp::subtract(1), ModeOp::subtract(1)],
                    },
                }],
                grid: GridSpec::Radial {
                    max: 3.0,
                    points: 60,
                },
                include_h_max: true,
            },
        ),
        Command::Fidelity => (
            "fidelity",
            tmsv8,
            Task::Fidelity {
                operation: None,
                input: InputDescriptor::Coherent {
                    alpha: ComplexDef::Real(1.0),
                },
                radial_cutoff: 6.0,
                nodes: 400,
            },
        ),
        Command::Optimize => (
            "optimize",
            tmsv8,
            Task::Optimize {
                schemes: vec![1],
                orders: vec![4],
                xi_lim: 2.0,
                radial_nodes: 64,
                domain: "radial_line".into(),
                dagger: true,
                swarm: 50,
                iters: 500,
                restarts: 4,
                curve_grid: Some(GridSpec::Radial {
                    max: 3.0,
                    points: 60,
                }),
            },
        ),
        Command::HPrime => {
            let mut resource = StateDescriptor::tmsv_db(8.0);
            resource.loss = Some(ChannelParams { t1: 0.8, t2: 0.8 });
            (
                "h_prime",
                resource,
                Task::HPrimeGrid {
                    operation: OperationDescriptor::Pv {
                        pv: vec![ModeOp::subtract(1), ModeOp::subtract(1)],
                    },
                    grid: GridSpec::Radial {
                        max: 3.0,
                        points: 60,
                    },
                },
            )
        }
        Command::OracleValidate => (
            "oracle_validate",
            tmsv8,
            Task::OracleValidate {
                r_values: vec![0.3, 0.7],
                max_total_photons: 3,
                max_order: 2,
                grid_points: 10,
                tolerance: 1e-8,
            },
        ),
        Command::Figure { id } => ("figure", tmsv8, Task::Figure { id: id.clone() }),
    };
    Scenario {
        name: name.to_string(),
        seed: default_seed(),
        precision: "machine".to_string(),
        resource,
        task,
        artifact_defaults: vec!["built-in defaults (no --config given)".to_string()],
        engine_version: Some(env!("CARGO_PKG_VERSION").to_string()),
    }
}

fn task_matches(command: &Command, task: &Task) -> bool {
    matches!(
        (command, task),
        (Command::ResponseRatio, Task::ResponseRatioGrid { .. })
            | (Command::Fidelity, Task::Fidelity { .. })
            | (Command::Optimize, Task::Optimize { .. })
            | (Command::HPrime, Task::HPrimeGrid { .. })
            | (Command::OracleValidate, Task::OracleValidate { .. })
            | (Command::Figure { .. }, Task::Figure { .. })
    )
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut scenario = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path:?}: {e}")))?;
            let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("{path:?}:{}:{}: {e}", e.line(), e.column()))
            })?;
            if !task_matches(&cli.command, &scenario.task) {
                return Err(CliError::Config(
                    "scenario task kind does not match the subcommand".into(),
                ));
            }
            scenario
        }
        None => default_scenario(&cli.command),
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(precision) = &cli.precision {
        parse_precision(precision)?; // validate early
        scenario.precision = precision.clone();
    }
    if let (Command::Figure { id }, Task::Figure { id: task_id }) =
        (&cli.command, &mut scenario.task)
    {
        *task_id = id.clone();
    }
    Ok(scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("configuration error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    let scenario = match load_scenario(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match run_scenario(&scenario, &cli.out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Numerical(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
