use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deepsmote_cli::{commands, config, CliError, Overrides};

#[derive(Parser)]
#[command(name = "deepsmote", version, about = "Autoencoder oversampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the autoencoder and write checkpoints.
    Train(Common),
    /// Balance the training set with a trained autoencoder.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint directory; defaults to <out>/checkpoints.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train classifiers per method and score both test protocols.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Reuse this autoencoder instead of training one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Repeat the evaluation over imbalance ratios.
    Sweep(Common),
}

fn resolve(c: &Common) -> Result<config::Resolved, CliError> {
    config::load(
        &c.config,
        &Overrides {
            seed: c.seed,
            out: c.out.clone(),
        },
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            let r = resolve(&c)?;
            let s = commands::cmd_train(&r)?;
            if let Some(last) = s.history.last() {
                println!(
                    "trained {} epochs{}: total loss {:.6}",
                    last.epoch,
                    if s.plateaued { " (plateau)" } else { "" },
                    last.total
                );
            }
            println!("checkpoints in {}", s.checkpoint_dir.display());
        }
        Command::Generate { common, checkpoint } => {
            let r = resolve(&common)?;
            let s = commands::cmd_generate(&r, checkpoint.as_deref())?;
            println!("class counts {:?}", s.class_counts);
            println!("wrote {} and {} grid(s)", s.images_path.display(), s.grids.len());
        }
        Command::Evaluate { common, checkpoint } => {
            let r = resolve(&common)?;
            let s = commands::cmd_evaluate(&r, checkpoint.as_deref())?;
            print!("{}", commands::summary_table(&s.records));
            println!("wrote {}", s.csv_path.display());
        }
        Command::Sweep(c) => {
            let r = resolve(&c)?;
            let result = commands::cmd_sweep(&r)?;
            for p in &result.points {
                println!(
                    "{:<12} ratio {:>6} acsa {:.4}±{:.4} gm {:.4}±{:.4} f1 {:.4}±{:.4}",
                    p.method.as_str(),
                    p.ratio,
                    p.mean[0],
                    p.sd[0],
                    p.mean[1],
                    p.sd[1],
                    p.mean[2],
                    p.sd[2]
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
