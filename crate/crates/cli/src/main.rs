//! `strata` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod attribute;
mod config;
mod error;
mod eval;
mod ingest;
mod output;
mod probes;
mod sae;
mod synth;
mod trajectory;

use config::RunConfig;
use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "strata", version, about = "Feature store, SAE, probing and open-vocabulary evaluation workflows")]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags that override values from the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Text encoder: "hashed" or the id of a precomputed embedding table.
    #[arg(long, global = true)]
    encoder: Option<String>,
    #[arg(long, global = true)]
    max_pred: Option<usize>,
    #[arg(long, global = true)]
    min_conf: Option<f64>,
    /// Multiply confidence by objectness.
    #[arg(long, global = true)]
    objectness: bool,
    /// Expand detections into their top-k classes.
    #[arg(long, global = true)]
    topk: bool,
    /// Add negative prompts to the label space.
    #[arg(long, global = true)]
    negatives: bool,
    /// Add part prompts to the label space.
    #[arg(long, global = true)]
    parts: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Raw tensor dumps and layout descriptors to a feature table.
    Ingest {
        /// Directory holding `dump.json` and the tensor files.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Train an SAE, or a transcoder when a target point is set.
    TrainSae {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        target_point: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-layer classification and localization probes.
    TrainProbes {
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Prediction point used as approximation targets.
        #[arg(long)]
        predictions: Option<String>,
    },
    /// Map free-text detections onto the label space.
    MapLabels {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Map and score detections; runs the sweep grid when configured.
    Evaluate {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Top-activating records per SAE latent.
    Attribute {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Transition layer of a probe trajectory.
    Trajectory {
        /// JSON array of numbers, or of `{layer_index, task, ap50}`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Seeded synthetic fixtures.
    Synth {
        #[arg(long, value_enum, default_value_t = synth::Kind::All)]
        kind: synth::Kind,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::TrainSae { .. } => "train-sae",
            Command::TrainProbes { .. } => "train-probes",
            Command::MapLabels { .. } => "map-labels",
            Command::Evaluate { .. } => "evaluate",
            Command::Attribute { .. } => "attribute",
            Command::Trajectory { .. } => "trajectory",
            Command::Synth { .. } => "synth",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let f = &cli.flags;
    if let Some(v) = &f.encoder {
        cfg.eval.encoder_id = v.clone();
    }
    if let Some(v) = f.max_pred {
        cfg.eval.max_pred = v;
    }
    if let Some(v) = f.min_conf {
        cfg.eval.min_conf = v;
    }
    cfg.eval.use_objectness |= f.objectness;
    cfg.eval.use_topk |= f.topk;
    cfg.eval.use_negatives |= f.negatives;
    cfg.eval.use_parts |= f.parts;
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = &f.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &f.store {
        cfg.paths.store = Some(v.clone());
    }
    if let Some(v) = &f.checkpoint {
        cfg.paths.checkpoint = Some(v.clone());
    }
    match &cli.command {
        Command::Ingest { dump } => {
            if let Some(v) = dump {
                cfg.paths.dump = Some(v.clone());
            }
        }
        Command::TrainSae {
            point,
            target_point,
            epochs,
        } => {
            if let Some(v) = point {
                cfg.sae.point = Some(v.clone());
            }
            if let Some(v) = target_point {
                cfg.sae.target_point = Some(v.clone());
            }
            if let Some(v) = epochs {
                cfg.sae.epochs = *v;
            }
        }
        Command::TrainProbes { targets, predictions } => {
            if let Some(v) = targets {
                cfg.paths.targets = Some(v.clone());
            }
            if let Some(v) = predictions {
                cfg.probes.predictions = Some(v.clone());
            }
        }
        Command::MapLabels { gt, detections } | Command::Evaluate { gt, detections } => {
            if let Some(v) = gt {
                cfg.paths.ground_truth = Some(v.clone());
            }
            if let Some(v) = detections {
                cfg.paths.detections = Some(v.clone());
            }
        }
        Command::Attribute { point, top_n } => {
            if let Some(v) = point {
                cfg.attribute.point = Some(v.clone());
            }
            if let Some(v) = top_n {
                cfg.attribute.n = *v;
            }
        }
        Command::Trajectory { input, delta } => {
            if let Some(v) = input {
                cfg.paths.trajectory = Some(v.clone());
            }
            if let Some(v) = delta {
                cfg.trajectory.delta = *v;
            }
        }
        Command::Synth { .. } => {}
    }
    cfg.propagate_seed();
    let issues = cfg.validate(cli.command.name());
    if !issues.is_empty() {
        return Err(CliError::config(issues));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    let cfg = resolve(cli)?;
    output::prepare(&cfg)?;
    let summary = match &cli.command {
        Command::Ingest { .. } => ingest::run(&cfg)?,
        Command::TrainSae { .. } => sae::run(&cfg)?,
        Command::TrainProbes { .. } => probes::run(&cfg)?,
        Command::MapLabels { .. } => eval::map_labels(&cfg)?,
        Command::Evaluate { .. } => eval::evaluate(&cfg)?,
        Command::Attribute { .. } => attribute::run(&cfg)?,
        Command::Trajectory { .. } => trajectory::run(&cfg)?,
        Command::Synth { kind } => synth::run(&cfg, *kind)?,
    };
    let summary = serde_json::json!({ "command": cli.command.name(), "summary": summary });
    output::write_json(&cfg.out_dir.join(output::SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
