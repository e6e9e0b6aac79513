//! `otloss loss`: evaluate a composite objective on tensor dumps and print
//! `{value, components, grad_norm}` as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use otloss::losses::{DEFAULT_DICE_SMOOTH, DEFAULT_FOCAL_GAMMA};
use otloss::{
    composite, cross_entropy, dice, focal, topological_loss, CompositeSpec, LossKind, LossResult,
    SinkhornConfig, SpanMask, Tensor,
};

use crate::{json_parse_error, CliError};

#[derive(Args)]
pub struct LossArgs {
    /// Logits tensor JSON ({"shape": [T, V], "data": [...]}).
    #[arg(long)]
    pub logits: PathBuf,
    /// Target token ids: a JSON array of length T.
    #[arg(long)]
    pub targets: PathBuf,
    /// Embedding matrix tensor JSON ({"shape": [V, d], "data": [...]}).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Ingredient-section span as start:end (half-open), applied to both the
    /// predicted and target sides.
    #[arg(long)]
    pub span: String,
    /// Composite weights as inline JSON, e.g. {"ce":0.6,"topo":0.4}.
    #[arg(long, default_value = r#"{"ce":1.0}"#)]
    pub spec: String,
    /// Focal focusing exponent.
    #[arg(long, default_value_t = DEFAULT_FOCAL_GAMMA)]
    pub gamma: f64,
    /// Sinkhorn entropic regularization.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Sinkhorn marginal tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

fn read_tensor(path: &Path) -> Result<Tensor, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| json_parse_error(&format!("{path:?}"), &e))
}

fn read_targets(path: &Path) -> Result<Vec<usize>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| json_parse_error(&format!("{path:?}"), &e))
}

fn parse_span(text: &str) -> Result<SpanMask, CliError> {
    let (start, end) = text
        .split_once(':')
        .ok_or_else(|| CliError::parse(format!("span must be start:end, got {text:?}")))?;
    let start: usize = start
        .trim()
        .parse()
        .map_err(|_| CliError::parse(format!("invalid span start {start:?}")))?;
    let end: usize = end
        .trim()
        .parse()
        .map_err(|_| CliError::parse(format!("invalid span end {end:?}")))?;
    SpanMask::new(start, end).map_err(CliError::from)
}

#[derive(Serialize)]
struct Components {
    ce: f64,
    focal: f64,
    dice: f64,
    topo: f64,
}

#[derive(Serialize)]
struct LossOut {
    value: f64,
    components: Components,
    grad_norm: f64,
}

pub fn run(args: LossArgs) -> Result<(), CliError> {
    let spec: CompositeSpec = serde_json::from_str(&args.spec)
        .map_err(|e| CliError::parse(format!("invalid --spec: {e}")))?;
    spec.validate().map_err(CliError::from)?;

    let logits = read_tensor(&args.logits)?;
    let targets = read_targets(&args.targets)?;
    let embeddings = read_tensor(&args.embeddings)?;
    let span = parse_span(&args.span)?;
    let sinkhorn = SinkhornConfig {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        tolerance: args.tolerance,
    };

    let mut parts: Vec<(LossKind, LossResult)> = Vec::new();
    let mut components = Components {
        ce: 0.0,
        focal: 0.0,
        dice: 0.0,
        topo: 0.0,
    };
    if spec.ce > 0.0 {
        let r = cross_entropy(&logits, &targets)?;
        components.ce = r.value;
        parts.push((LossKind::Ce, r));
    }
    if spec.focal > 0.0 {
        let r = focal(&logits, &targets, args.gamma)?;
        components.focal = r.value;
        parts.push((LossKind::Focal, r));
    }
    if spec.dice > 0.0 {
        let r = dice(&logits, &targets, DEFAULT_DICE_SMOOTH)?;
        components.dice = r.value;
        parts.push((LossKind::Dice, r));
    }
    if spec.topo > 0.0 {
        let r = topological_loss(&logits, &targets, &embeddings, span, span, &sinkhorn)?;
        components.topo = r.value;
        parts.push((LossKind::Topo, r));
    }
    let borrowed: Vec<(LossKind, &LossResult)> = parts.iter().map(|(k, r)| (*k, r)).collect();
    let combined = composite(&spec, &borrowed)?;

    let out = LossOut {
        value: combined.value,
        components,
        grad_norm: combined.grad.norm(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).map_err(|e| CliError::other(e.to_string()))?
    );
    Ok(())
}
