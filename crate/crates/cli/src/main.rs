use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rprae::evalkit::Mode;

mod commands;
mod config;

use config::{CommonArgs, RunConfig};

/// Bad flags, unreadable configuration or inconsistent inputs. Exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "rprae", version, about = "Paired description/action autoencoders with retrofitted word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Act2dsc,
    Dsc2act,
}

#[derive(Clone, Debug, Default, clap::Args)]
struct DataArgs {
    /// Cross-validation fold.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    fold: Option<u8>,
    /// Dataset directory written by gen-data; generated in memory otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fold of the paired dataset.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        fold: Option<u8>,
        /// Write only manifest.json.
        #[arg(long)]
        manifest_only: bool,
    },
    /// Train a model and write a checkpoint and loss log.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Train the ablation without the retrofit layer.
        #[arg(long)]
        prae: bool,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint in one translation direction.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Cosine maps, PCA plots and cluster statistics of the embeddings.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic and numerical gradients of every kernel op.
    Gradcheck,
}

fn setup(common: &CommonArgs, edit: impl FnOnce(&mut RunConfig)) -> anyhow::Result<RunConfig> {
    let mut run = RunConfig::resolve(common)?;
    edit(&mut run);
    let run = run.finish()?;
    if let Some(n) = run.threads {
        // Only fails if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    commands::ensure_dir(&run.out)?;
    run.write_snapshot()?;
    Ok(run)
}

fn apply_data(run: &mut RunConfig, data: &DataArgs) {
    if let Some(f) = data.fold {
        run.data.fold = f as usize;
    }
    if data.data.is_some() {
        run.dataset = data.data.clone();
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenData { common, fold, manifest_only } => {
            let run = setup(&common, |r| {
                if let Some(f) = fold {
                    r.data.fold = f as usize;
                }
            })?;
            commands::gen_data(&run, manifest_only)?;
        }
        Command::Train { common, data, prae, resume } => {
            let run = setup(&common, |r| {
                apply_data(r, &data);
                r.train.prae |= prae;
                if resume.is_some() {
                    r.checkpoint = resume.clone();
                }
            })?;
            commands::train(&run)?;
        }
        Command::Eval { common, data, mode, checkpoint } => {
            let run = setup(&common, |r| {
                apply_data(r, &data);
                if checkpoint.is_some() {
                    r.checkpoint = checkpoint.clone();
                }
            })?;
            let mode = match mode {
                ModeArg::Act2dsc => Mode::Act2Dsc,
                ModeArg::Dsc2act => Mode::Dsc2Act,
            };
            commands::eval(&run, mode)?;
        }
        Command::Analyze { common, checkpoint } => {
            let run = setup(&common, |r| {
                if checkpoint.is_some() {
                    r.checkpoint = checkpoint.clone();
                }
            })?;
            commands::analyze(&run)?;
        }
        Command::Gradcheck => {
            if !commands::gradcheck()? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
