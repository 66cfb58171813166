use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;
use tsp_cli::{commands, CliError, CliResult, Overrides, PipelineConfig};
use tsp_core::propagation::LiftingMode;

/// Worker thread count for the parallel kernels. Unset uses all cores.
const THREADS_VAR: &str = "TSP_THREADS";

#[derive(Parser)]
#[command(name = "tsp", version, about = "Test-time simplicial propagation for graph recommenders")]
struct Cli {
    /// JSON pipeline config; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the split and the backbone.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Recommendation list length for evaluation.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Share of least popular items counted as tail.
    #[arg(long = "tail-frac", global = true)]
    tail_frac: Option<f64>,
    /// Lifting of node embeddings onto simplices.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Unsigned,
    Signed,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Split interactions into train, validation and test.
    Split,
    /// Train the backbone on the train split.
    Train,
    /// Check the energy lemmas on the trained backbone.
    Diagnose,
    /// Build the semantic graph and its clique complex.
    Lift,
    /// Run simplicial propagation on the backbone embeddings.
    Propagate,
    /// Score backbone and propagated embeddings on the test split.
    Evaluate,
    /// All of the above in order.
    Pipeline,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Field {
        field: THREADS_VAR.into(),
        message: format!("expected a positive integer, got {raw:?}"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Field {
            field: THREADS_VAR.into(),
            message: e.to_string(),
        })
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        output: cli.output,
        k: cli.k,
        tail_fraction: cli.tail_frac,
        mode: cli.mode.map(|m| match m {
            Mode::Unsigned => LiftingMode::UnsignedMean,
            Mode::Signed => LiftingMode::SignedBoundary,
        }),
    });
    match cli.command {
        Command::Split => commands::cmd_split(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Diagnose => commands::cmd_diagnose(&cfg),
        Command::Lift => commands::cmd_lift(&cfg),
        Command::Propagate => commands::cmd_propagate(&cfg),
        Command::Evaluate => commands::cmd_evaluate(&cfg).map(|r| print!("{}", r.to_csv())),
        Command::Pipeline => commands::cmd_pipeline(&cfg).map(|r| print!("{}", r.to_csv())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
