//! `banditmt` command line.

mod data;
mod estimator;
mod io;
mod policy;
mod reliability;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use banditmt::Error;

pub use io::Manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "banditmt", version, about = "Human bandit feedback for sequence-to-sequence translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic token-substitution translation task.
    GenSynthetic(data::GenSyntheticArgs),
    /// Select rating items from out-of-domain/in-domain candidate pairs.
    PrepareItems(data::PrepareItemsArgs),
    /// Lay out a rating plan with repeated items.
    BuildSessions(data::BuildSessionsArgs),
    /// Run the rating service.
    Serve(ServeArgs),
    /// Inter/intra-rater reliability, filter sweeps and tests.
    AnalyzeReliability(reliability::AnalyzeArgs),
    /// Train a reward estimator with the MSE or pairwise objective.
    TrainEstimator(estimator::TrainArgs),
    /// Spearman correlation of estimator predictions with TER.
    EvalEstimator(estimator::EvalArgs),
    /// Simulated estimator supervision from policy beam ranks.
    MakeAuxData(estimator::AuxArgs),
    /// Maximum-likelihood training of the translation policy.
    TrainMle(policy::MleArgs),
    /// REINFORCE fine-tuning from a reward source.
    TrainRl(policy::RlArgs),
    /// Off-policy learning from a logged feedback file.
    TrainOpl(policy::OplArgs),
    /// Decode and score, optionally against a baseline system.
    Evaluate(policy::EvaluateArgs),
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    /// Service configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the bind address.
    #[arg(long)]
    bind: Option<String>,
}

/// Errors surfaced to the process exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(Error::Numerical(_)) => EXIT_NUMERICAL,
            CliError::Lib(Error::File { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenSynthetic(a) => data::gen_synthetic(a),
        Command::PrepareItems(a) => data::prepare_items(a),
        Command::BuildSessions(a) => data::build_sessions(a),
        Command::Serve(a) => serve(a),
        Command::AnalyzeReliability(a) => reliability::analyze(a),
        Command::TrainEstimator(a) => estimator::train(a),
        Command::EvalEstimator(a) => estimator::eval(a),
        Command::MakeAuxData(a) => estimator::aux(a),
        Command::TrainMle(a) => policy::mle(a),
        Command::TrainRl(a) => policy::rl(a),
        Command::TrainOpl(a) => policy::opl(a),
        Command::Evaluate(a) => policy::evaluate(a),
    }
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let mut cfg = banditmt::service::ServiceConfig::load(&a.config)?;
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    cfg.validate()?;
    let mut m = Manifest::new("serve", 0, &cfg);
    m.input(&a.config)?;
    m.write(&cfg.log_path.with_extension("manifest.json"))?;
    let rt = tokio::runtime::Runtime::new().map_err(Error::from)?;
    rt.block_on(banditmt::service::serve(cfg))?;
    Ok(())
}
