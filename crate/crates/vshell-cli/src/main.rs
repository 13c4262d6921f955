//! `vshell`: steady shells of the spherically symmetric Vlasov-Poisson
//! system with a central point mass, from declarative configs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vshell_core::CoreError;

#[derive(Parser)]
#[command(
    name = "vshell",
    version,
    about = "Static shells of the Vlasov-Poisson system with a central point mass"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's out_dir; default ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the particle loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Model (.json) or ensemble (.bin) record to diagnose.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the static shell and write its model record and profile.
    Steady,
    /// Verify the rescaling identities and the negative-energy witness.
    Scalecheck,
    /// Sample the shell and evolve it, streaming diagnostics.
    Evolve,
    /// Run the perturbation-response stability experiment.
    Stability,
    /// Run consistency checks on a model or ensemble record.
    Diagnose,
}

/// CLI failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    Io(std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// 0 success, 2 config error, 3 solver nonconvergence, 4 invariant
    /// violation, 5 I/O error.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) => 2,
                CoreError::NonConvergence { .. }
                | CoreError::EmptyShell
                | CoreError::BracketingFailure(_)
                | CoreError::SamplingFailure { .. }
                | CoreError::WitnessFailure { .. } => 3,
                CoreError::InvariantViolation(_)
                | CoreError::ConstraintViolation(_)
                | CoreError::InvalidState(_)
                | CoreError::IntegratorBlowup { .. } => 4,
                CoreError::Record(_) | CoreError::Io(_) => 5,
            },
            CliError::Io(_) => 5,
        }
    }

    /// Machine-readable reason token.
    fn reason(&self) -> String {
        match self {
            CliError::Config(_) => "config-error".into(),
            CliError::Io(_) => "io-error".into(),
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(msg) if msg.starts_with("E0-nonnegative") => {
                    "E0-nonnegative".into()
                }
                CoreError::InvalidArgument(_) => "invalid-argument".into(),
                CoreError::NonConvergence { .. } => "nonconvergence".into(),
                CoreError::EmptyShell => "empty-shell".into(),
                CoreError::BracketingFailure(_) => "bracketing-failure".into(),
                CoreError::SamplingFailure { .. } => "sampling-failure".into(),
                CoreError::WitnessFailure { .. } => "witness-failure".into(),
                CoreError::InvariantViolation(_) => "invariant-violation".into(),
                CoreError::ConstraintViolation(_) => "constraint-violation".into(),
                CoreError::InvalidState(_) => "invalid-state".into(),
                CoreError::IntegratorBlowup { .. } => "integrator-blowup".into(),
                CoreError::Record(_) => "record-error".into(),
                CoreError::Io(_) => "io-error".into(),
            },
        }
    }

    fn detail(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("VSHELL_LOG")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("{{\"reason\":\"config-error\",\"detail\":\"--threads must be positive\"}}");
            return ExitCode::from(2);
        }
        // worker count never changes results: all reductions are fixed-order
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("{{\"reason\":\"config-error\",\"detail\":\"{e}\"}}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"reason": e.reason(), "detail": e.detail()})
            );
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Diagnose => {
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)?;
            let input = cli
                .input
                .as_ref()
                .ok_or_else(|| CliError::Config("diagnose needs --input <record>".into()))?;
            commands::diagnose::run(input, &out_dir)
        }
        _ => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| CliError::Config("missing --config <path>".into()))?;
            let mut loaded = config::load_config(path)?;
            if let Some(seed) = cli.seed {
                loaded.run.seed = seed;
            }
            let out_dir = cli
                .out
                .clone()
                .or_else(|| loaded.run.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)?;
            match cli.command {
                Command::Steady => commands::steady::run(&loaded, &out_dir),
                Command::Scalecheck => commands::scalecheck::run(&loaded, &out_dir),
                Command::Evolve => commands::evolve::run(&loaded, &out_dir),
                Command::Stability => commands::stability::run(&loaded, &out_dir),
                Command::Diagnose => unreachable!(),
            }
        }
    }
}
