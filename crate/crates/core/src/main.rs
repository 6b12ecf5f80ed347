use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade::runner::{run_experiment, EXIT_FAULT};
use cascade::scenario::{load_scenario, Model, Scenario};

/// Discrete-event simulator and stability analyzer for cascade queueing
/// systems.
#[derive(Parser)]
#[command(name = "cascade", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replications and emit steady-state metrics.
    Simulate(RunArgs),
    /// Solve the truncated CTMC oracle for an exponential two-station system.
    Ctmc(RunArgs),
    /// Classify stability (closed form for two stations, backward
    /// induction otherwise).
    Stability(RunArgs),
    /// Sweep one parameter, classifying and simulating each point.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Master seed; overrides the file and the CASCADE_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<f64>,
    /// Replication count override.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event budget per replication override.
    #[arg(long)]
    event_cap: Option<u64>,
    /// Write per-replication event logs.
    #[arg(long)]
    event_log: bool,
}

impl Command {
    fn model(&self) -> Model {
        match self {
            Command::Simulate(_) => Model::Simulate,
            Command::Ctmc(_) => Model::Ctmc,
            Command::Stability(_) => Model::Stability,
            Command::Sweep(_) => Model::Sweep,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::Ctmc(a) | Command::Stability(a) | Command::Sweep(a) => {
                a
            }
        }
    }
}

fn apply_overrides(scenario: &mut Scenario, args: &RunArgs) {
    let env_seed = std::env::var("CASCADE_SEED")
        .ok()
        .and_then(|s| s.parse::<u64>().ok());
    if let Some(seed) = args.seed.or(env_seed) {
        scenario.config.seed = seed;
    }
    if let Some(horizon) = args.horizon {
        scenario.horizon = horizon;
    }
    if let Some(reps) = args.reps {
        scenario.replications = reps;
    }
    if let Some(out) = &args.out {
        scenario.out_dir = out.clone();
    }
    if let Some(cap) = args.event_cap {
        scenario.event_cap = cap;
    }
    if args.event_log {
        scenario.event_log = true;
    }
}

fn run(cli: Cli) -> cascade::Result<i32> {
    let args = cli.command.args();
    let mut scenario = load_scenario(&args.scenario)?;
    let invoked = cli.command.model();
    if scenario.model != invoked {
        return Err(cascade::Error::Config(format!(
            "scenario `{}` declares model = \"{}\" but was invoked as `{invoked}`",
            scenario.name, scenario.model
        )));
    }
    apply_overrides(&mut scenario, args);
    Ok(run_experiment(&scenario)?.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_FAULT as u8)
        }
    }
}
