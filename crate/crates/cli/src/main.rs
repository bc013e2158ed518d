use std::path::PathBuf;
use std::process::ExitCode;

use causal_cdr::pipeline::Ablation;
use clap::{Args, Parser, Subcommand};

mod commands;
mod http;

use commands::{EvaluateArgs, RunContext};

/// Cross-domain out-of-distribution recommendation with dual-level causal
/// structures and LLM-guided confounder discovery.
#[derive(Parser)]
#[command(name = "causal-cdr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); missing fields take their defaults.
    #[arg(long, short)]
    config: PathBuf,

    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build splits and candidate sets for every seed.
    PrepareData {
        #[command(flatten)]
        common: Common,
        /// Write a synthetic two-domain corpus to the configured event paths first.
        #[arg(long, value_name = "SEED")]
        synthetic: Option<u64>,
    },
    /// Run confounder discovery and build the confounder subspaces.
    DiscoverConfounders {
        #[command(flatten)]
        common: Common,
        /// Use the offline keyword-driven model instead of the HTTP endpoint.
        #[arg(long)]
        mock_llm: bool,
        /// Single-shot extraction instead of the iterative loop.
        #[arg(long)]
        direct: bool,
    },
    /// Two-phase training and evaluation for every seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mock_llm: bool,
    },
    /// Score a checkpoint on a candidate file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint manifest (`<tag>.json`).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to `candidates.json` beside the checkpoint.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Defaults to `split.json` beside the checkpoint, else the split is regenerated.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Defaults to `<out>/evaluation.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Retrain and evaluate at every configured shift ratio.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mock_llm: bool,
    },
    /// Train and evaluate ablation variants.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Variant name, e.g. "w/o dual-level" or wo-dual-level; repeatable. Defaults to all.
        #[arg(long = "variant", value_parser = clap::value_parser!(Ablation))]
        variants: Vec<Ablation>,
        #[arg(long)]
        mock_llm: bool,
    },
    /// Re-run discovery against a recorded replay log.
    ReplayLlm {
        #[command(flatten)]
        common: Common,
        /// Directory holding `replay_<role>.jsonl`; defaults to `<out>/confounders`.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        direct: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::PrepareData { common, synthetic } => {
            commands::prepare_data(&RunContext::load(&common.config, common.out)?, synthetic)
        }
        Command::DiscoverConfounders { common, mock_llm, direct } => {
            commands::discover_confounders(&RunContext::load(&common.config, common.out)?, mock_llm, direct)
        }
        Command::Train { common, mock_llm } => commands::train(&RunContext::load(&common.config, common.out)?, mock_llm),
        Command::Evaluate {
            common,
            checkpoint,
            candidates,
            split,
            output,
        } => commands::evaluate_checkpoint(
            &RunContext::load(&common.config, common.out)?,
            &EvaluateArgs {
                checkpoint,
                candidates,
                split,
                output,
            },
        ),
        Command::Sweep { common, mock_llm } => commands::sweep(&RunContext::load(&common.config, common.out)?, mock_llm),
        Command::Ablate {
            common,
            variants,
            mock_llm,
        } => {
            let variants = if variants.is_empty() { Ablation::ALL.to_vec() } else { variants };
            commands::ablate(&RunContext::load(&common.config, common.out)?, &variants, mock_llm)
        }
        Command::ReplayLlm { common, log_dir, direct } => {
            commands::replay_llm(&RunContext::load(&common.config, common.out)?, log_dir, direct)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
