//! `otloss train-toy`: run the deterministic toy training loop from a JSON
//! config, writing the trajectory CSV and a model dump.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use otloss::toy::{evaluate_toy, synth_corpus, train, write_trajectory_csv, ToyModel, TrainConfig};

use crate::{json_parse_error, CliError};

#[derive(Args)]
pub struct TrainToyArgs {
    /// Training config JSON: {"steps", "learning_rate", "seed", "samples",
    /// "objective", "sinkhorn"}.
    #[arg(long)]
    pub config: PathBuf,
    /// Trajectory CSV output path.
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
    /// Model JSON dump output path.
    #[arg(long, default_value = "model.json")]
    pub model_out: PathBuf,
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    final_total: Option<f64>,
    ingredient_recall: Option<f64>,
    action_distance: Option<f64>,
}

pub fn run(args: TrainToyArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::parse(format!("cannot read {:?}: {e}", args.config)))?;
    let cfg: TrainConfig =
        serde_json::from_str(&text).map_err(|e| json_parse_error("config", &e))?;
    cfg.validate().map_err(|e| CliError::parse(e.to_string()))?;

    let corpus = synth_corpus(cfg.seed, cfg.samples);
    let model = ToyModel::init(cfg.seed);
    let (trained, trajectory) = train(&model, &corpus, &cfg)?;

    let mut csv_bytes = Vec::new();
    write_trajectory_csv(&trajectory, &mut csv_bytes)?;
    fs::write(&args.out, csv_bytes)?;

    let model_json =
        serde_json::to_vec_pretty(&trained).map_err(|e| CliError::other(e.to_string()))?;
    let mut model_json = model_json;
    model_json.push(b'\n');
    fs::write(&args.model_out, model_json)?;

    let eval = evaluate_toy(&trained, &corpus)?;
    let summary = TrainSummary {
        steps: trajectory.len(),
        final_total: trajectory.last().map(|r| r.total),
        ingredient_recall: eval.ingredient_recall,
        action_distance: eval.action_distance,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::other(e.to_string()))?
    );
    Ok(())
}
