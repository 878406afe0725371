//! Command-line front end over the pipeline stages. Each subcommand reads
//! and writes fixed file names inside one data directory, so a full run is
//! a sequence of invocations against the same `--data-dir`.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use weaklink_core::config::PipelineConfig;
use weaklink_core::model::ModelVariant;
use weaklink_core::pipeline::{self, Artifacts, Split};

#[derive(Parser)]
#[command(name = "weaklink", version, about = "Weakly supervised entity linking pipeline")]
struct Cli {
    /// TOML configuration file. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory holding corpus files and stage outputs.
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,

    /// Worker threads for parallel stages. Defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known annotations.
    Synth,
    /// Build the entity link graph and anchor prior from the page corpus.
    BuildGraph,
    /// Produce weakly labeled candidate sets for all splits.
    Annotate,
    /// Train the disambiguation model on the annotated training split.
    Train(TrainArgs),
    /// Link raw documents with the trained model.
    Link(LinkArgs),
    /// Score the trained model and the untrained baselines on one split.
    Eval(EvalArgs),
    /// Train every model variant across seeds and compare on the test split.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Override the configured training seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the configured model variant: full, no-local, or no-attention.
    #[arg(long)]
    variant: Option<ModelVariant>,
}

#[derive(Args)]
struct LinkArgs {
    /// Documents to link, one JSON object per line.
    #[arg(long)]
    input: PathBuf,

    /// Where to write the linking decisions, one JSON object per line.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Which split to score.
    #[arg(long, default_value = "test")]
    split: Split,
}

#[derive(Args)]
struct AblateArgs {
    /// Training seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WEAKLINK_LOG", "info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let arts = Artifacts::new(&cli.data_dir);
    match cli.command {
        Command::Synth => print_json(&pipeline::cmd_synth(&arts, &cfg.synth)?),
        Command::BuildGraph => print_json(&pipeline::cmd_build_graph(&arts, &cfg)?),
        Command::Annotate => print_json(&pipeline::cmd_annotate(&arts, &cfg)?),
        Command::Train(args) => {
            print_json(&pipeline::cmd_train(&arts, &cfg, args.variant, args.seed)?)
        }
        Command::Link(args) => {
            print_json(&pipeline::cmd_link(&arts, &cfg, &args.input, &args.output)?)
        }
        Command::Eval(args) => print_json(&pipeline::cmd_eval(&arts, &cfg, args.split)?),
        Command::Ablate(args) => print_json(&pipeline::cmd_ablate(&arts, &cfg, &args.seeds)?),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
