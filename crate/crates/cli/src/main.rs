//! Command-line driver for the possession pipeline. Verbs map onto the
//! pipeline stages; `run` executes all of them and writes the artifact
//! manifest. Exit codes identify the failing stage (1-based), with 1 for
//! anything outside a stage.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gaffer::pipeline::{self, PipelineConfig, StageVerb};
use gaffer::state::StateType;

#[derive(Parser)]
#[command(
    name = "gaffer",
    version,
    about = "Possession pipeline: match logs to an evaluated decision policy"
)]
struct Cli {
    /// TOML config file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; overrides every per-stage seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// State encoding: I (event scalars), II (+ raw locations),
    /// III (+ pressure counts).
    #[arg(long, global = true, value_parser = parse_state_type)]
    state_type: Option<StateType>,

    /// Artifact directory; overrides the config's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Directory with events.csv and frames.csv to ingest.
    #[arg(long, global = true, value_name = "DIR")]
    input: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a seeded synthetic corpus into the artifact directory.
    Generate,
    /// Normalize an external corpus into the artifact directory.
    Ingest,
    /// Segment events into possessions and episodes.
    Segment,
    /// Compute spectral pressure features for every tracking frame.
    Pressure,
    /// Encode possessions as padded state tensors.
    States,
    /// Fit and cross-validate the shot-quality model.
    TrainXg,
    /// Train the behavioral outcome classifier.
    TrainOutcome,
    /// Optimize the target policy against the logged corpus.
    TrainPolicy,
    /// Score the trained policy with off-policy estimators.
    Evaluate,
    /// Rank counterfactual scenarios by reward delta.
    Report,
    /// Run every stage and write the content-hash manifest.
    Run,
}

fn parse_state_type(s: &str) -> Result<StateType, String> {
    StateType::parse(s).ok_or_else(|| format!("expected I, II, or III, got {s:?}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Error displays already chain their sources; print the top.
            eprintln!("error: {err}");
            let stage = err
                .downcast_ref::<gaffer::Error>()
                .map(gaffer::Error::stage_index)
                .unwrap_or(0);
            ExitCode::from(if stage == 0 { 1 } else { stage.min(255) as u8 })
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(state_type) = cli.state_type {
        cfg.state_type = state_type;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(input) = cli.input {
        cfg.input_dir = Some(input);
    }

    match cli.command {
        Command::Run => {
            let manifest = pipeline::run_pipeline(&cfg)?;
            let files: usize = manifest.stages.values().map(|f| f.len()).sum();
            println!(
                "wrote {files} artifacts and {} to {}",
                pipeline::MANIFEST_FILE,
                cfg.out_dir.display()
            );
        }
        verb => {
            let files = pipeline::run_stage(&cfg, stage_verb(verb))?;
            for file in files {
                println!("wrote {}", file.display());
            }
        }
    }
    Ok(())
}

fn stage_verb(command: Command) -> StageVerb {
    match command {
        Command::Generate => StageVerb::Generate,
        Command::Ingest => StageVerb::Ingest,
        Command::Segment => StageVerb::Segment,
        Command::Pressure => StageVerb::Pressure,
        Command::States => StageVerb::States,
        Command::TrainXg => StageVerb::TrainXg,
        Command::TrainOutcome => StageVerb::TrainOutcome,
        Command::TrainPolicy => StageVerb::TrainPolicy,
        Command::Evaluate => StageVerb::Evaluate,
        Command::Report => StageVerb::Report,
        Command::Run => unreachable!("run is handled separately"),
    }
}
