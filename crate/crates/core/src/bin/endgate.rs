use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use endgate::config::{ExperimentConfig, ExperimentKind};
use endgate::experiment::{execute, run_config, run_sweep};
use endgate::schedule::{Schedule, REPLAY_TOLERANCE};
use endgate::Error;

#[derive(Parser)]
#[command(
    name = "endgate",
    version,
    about = "End-gate state transfer along spin chains"
)]
struct Cli {
    /// Worker threads for sweeps (0 picks the number of cores).
    #[arg(long, global = true, env = "ENDGATE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disorder seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write trajectory, summary and schedule.
    Run(RunArgs),
    /// Run a parameter sweep and write one row per value.
    Sweep(RunArgs),
    /// Run an experiment and write only its schedule file.
    Export(RunArgs),
    /// Re-simulate a schedule file and compare with its recorded probabilities.
    Replay { schedule: PathBuf },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if args.seed.is_some() {
        config.seed = args.seed;
        config.validate()?;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output.path.clone());
    Ok((config, out))
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    );
}

fn replay(path: &Path) -> Result<(), Error> {
    let schedule = Schedule::import(path)?;
    let replayed = schedule.replay()?;
    let deviation = schedule.replay_deviation()?;
    print_json(&serde_json::json!({
        "steps": replayed.len(),
        "final_p": replayed.last().copied().unwrap_or(0.0),
        "max_deviation": deviation,
    }));
    if deviation > REPLAY_TOLERANCE {
        return Err(Error::Numerical(format!(
            "replay deviates from the recorded probabilities by {deviation:e}"
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let (config, out) = load(&args)?;
            let summary = run_config(&config, &out)?;
            print_json(&serde_json::to_value(&summary).expect("summaries serialize"));
        }
        Command::Sweep(args) => {
            let (config, out) = load(&args)?;
            if config.experiment != ExperimentKind::Sweep {
                return Err(Error::Config(
                    "this config is not a sweep; use `run`".into(),
                ));
            }
            let rows = run_sweep(&config, &out, cli.threads)?;
            print_json(&serde_json::to_value(&rows).expect("rows serialize"));
        }
        Command::Export(args) => {
            let (config, out) = load(&args)?;
            if config.experiment == ExperimentKind::Sweep {
                return Err(Error::Config("sweeps have no single schedule".into()));
            }
            let output = execute(&config, &config.effective_chain())?;
            let path = out.join("schedule.json");
            output
                .schedule
                .expect("every run records a schedule")
                .export(&path)?;
            println!("{}", path.display());
        }
        Command::Replay { schedule } => replay(&schedule)?,
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
