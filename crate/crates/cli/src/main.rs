use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hisd::commands::{self, EvalMode, RunOptions};

/// Unsupervised skill segmentation and hierarchy discovery.
///
/// Set HISD_LOG to error, warn, info or debug for diagnostics on stderr.
#[derive(Debug, Parser)]
#[command(name = "hisd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Seg,
    Tree,
    Both,
}

impl From<Mode> for EvalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Seg => EvalMode::Seg,
            Mode::Tree => EvalMode::Tree,
            Mode::Both => EvalMode::Both,
        }
    }
}

#[derive(Debug, clap::Args)]
struct Run {
    /// Dataset directory holding manifest.toml
    #[arg(long)]
    dataset: PathBuf,
    /// Solver config; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-episode work
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a generator spec
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit prototypes and write per-episode skill labels
    Segment(Run),
    /// Induce a grammar from a directory of label files
    Induce {
        /// Directory of *.labels files
        #[arg(long, alias = "dataset")]
        labels: PathBuf,
        /// Grammar text file to write
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-episode DOT trees
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Score predicted labels against truth
    Eval {
        /// Directory of predicted *.labels files
        #[arg(long)]
        pred: PathBuf,
        /// Dataset directory, manifest file or directory of truth labels
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
    },
    /// Segment, induce and evaluate in one run
    Pipeline {
        #[command(flatten)]
        run: Run,
        /// Also write DOT trees under <out>/trees
        #[arg(long)]
        dot: bool,
    },
}

fn run(cli: Cli) -> hisd::Result<()> {
    match cli.command {
        Command::Synth { config, out, seed } => {
            println!("{}", commands::cmd_synth(&config, &out, seed)?);
        }
        Command::Segment(r) => {
            let opts = RunOptions {
                seed: r.seed,
                threads: r.threads,
                dot: false,
            };
            let s = commands::cmd_segment(&r.dataset, r.config.as_deref(), &r.out, opts)?;
            println!("{s}");
        }
        Command::Induce { labels, out, dot } => {
            println!("{}", commands::cmd_induce(&labels, &out, dot.as_deref())?);
        }
        Command::Eval { pred, truth, mode } => {
            print!("{}", commands::cmd_eval(&pred, &truth, mode.into())?);
        }
        Command::Pipeline { run: r, dot } => {
            let opts = RunOptions {
                seed: r.seed,
                threads: r.threads,
                dot,
            };
            let s = commands::cmd_pipeline(&r.dataset, r.config.as_deref(), &r.out, opts)?;
            println!("{s}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HISD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
