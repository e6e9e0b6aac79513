//! A desk-scale differentiable model — learned embedding table plus a
//! per-position linear decoder over a tiny vocabulary — trained by
//! full-batch gradient descent under any composite objective on a synthetic
//! micro-corpus of templated recipes.
//!
//! The point is behavioral: the losses optimize end to end, their
//! trajectories are bit-deterministic for a fixed seed, and decoded outputs
//! can be scored with the real metric suite. Nothing here tries to be a
//! language model.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::SpanMask;
use crate::error::{Error, Result};
use crate::losses::{
    composite, cross_entropy, dice, focal, CompositeSpec, LossKind, LossResult,
    DEFAULT_DICE_SMOOTH, DEFAULT_FOCAL_GAMMA,
};
use crate::metrics::{action_distance, ingredient_recall, MetricConfig, Recipe};
use crate::tensor::Tensor;
use crate::transport::{topological_loss, SinkhornConfig};

/// Embedding width of the toy model.
pub const EMBED_DIM: usize = 8;
/// Fixed context window (sequences are much shorter in practice).
pub const CONTEXT: usize = 32;

const BOS: usize = 0;

/// The toy vocabulary: sentinel, dish names, ingredient words, action words.
pub const VOCAB: &[&str] = &[
    "<s>", // 0
    "carbonara",
    "risotto",
    "panino",
    "spaghetti",
    "guanciale",
    "egg",
    "pecorino",
    "pepper",
    "salt",
    "rice",
    "butter",
    "onion",
    "broth",
    "parmesan",
    "bread",
    "ham",
    "cheese",
    "tomato",
    "oil",
    "boil",
    "fry",
    "stir",
    "combine",
    "serve",
    "toast",
    "simmer",
    "mix",
    "bake",
];

fn token_id(word: &str) -> usize {
    VOCAB
        .iter()
        .position(|w| *w == word)
        .expect("toy templates only use vocabulary words")
}

struct DishTemplate {
    dish: &'static str,
    ingredients: &'static [&'static str],
    optional: &'static str,
    actions: &'static [&'static str],
}

const TEMPLATES: &[DishTemplate] = &[
    DishTemplate {
        dish: "carbonara",
        ingredients: &["spaghetti", "guanciale", "egg", "pecorino", "pepper"],
        optional: "salt",
        actions: &["boil", "fry", "combine", "serve"],
    },
    DishTemplate {
        dish: "risotto",
        ingredients: &["rice", "butter", "onion", "broth"],
        optional: "parmesan",
        actions: &["stir", "simmer", "mix", "serve"],
    },
    DishTemplate {
        dish: "panino",
        ingredients: &["bread", "ham", "cheese"],
        optional: "tomato",
        actions: &["toast", "combine", "serve"],
    },
];

/// One teacher-forced training sample: the prompt feeds the model, the
/// target is what it should emit, and `span` marks the ingredient section of
/// the target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub prompt: Vec<usize>,
    pub target: Vec<usize>,
    pub span: SpanMask,
}

/// Deterministic templated micro-corpus: dish name, ingredient span, action
/// tail. The same seed always yields the identical corpus.
pub fn synth_corpus(seed: u64, n: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let template = &TEMPLATES[i % TEMPLATES.len()];
            let with_optional = rng.gen_bool(0.5);
            let mut target = vec![token_id(template.dish)];
            for w in template.ingredients {
                target.push(token_id(w));
            }
            if with_optional {
                target.push(token_id(template.optional));
            }
            let span_end = target.len();
            for w in template.actions {
                target.push(token_id(w));
            }
            let mut prompt = vec![BOS];
            prompt.extend_from_slice(&target[..target.len() - 1]);
            Sample {
                prompt,
                target,
                span: SpanMask::new(1, span_end).expect("template spans are non-empty"),
            }
        })
        .collect()
}

/// Embedding table plus per-position linear decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub embeddings: Tensor,
    pub decoder: Tensor,
    #[serde(skip, default = "default_context")]
    pub context: usize,
}

fn default_context() -> usize {
    CONTEXT
}

impl ToyModel {
    /// Deterministic random initialization at unit scale.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15));
        let v = VOCAB.len();
        let emb: Vec<f64> = (0..v * EMBED_DIM)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let dec: Vec<f64> = (0..EMBED_DIM * v)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            embeddings: Tensor::new(v, EMBED_DIM, emb).expect("valid init"),
            decoder: Tensor::new(EMBED_DIM, v, dec).expect("valid init"),
            context: CONTEXT,
        }
    }

    /// Teacher-forced logits: row t is `embeddings[prompt[t]] · decoder`.
    pub fn forward(&self, prompt: &[usize]) -> Result<Tensor> {
        let v = self.embeddings.rows();
        if prompt.len() > self.context {
            return Err(Error::InvalidShape {
                expected: format!("sequence within context {}", self.context),
                actual: format!("{} tokens", prompt.len()),
            });
        }
        let mut data = Vec::with_capacity(prompt.len() * v);
        for &tok in prompt {
            if tok >= v {
                return Err(Error::InvalidToken { id: tok, vocab: v });
            }
            let e = self.embeddings.row(tok);
            for c in 0..v {
                let mut acc = 0.0;
                for (k, ek) in e.iter().enumerate() {
                    acc += ek * self.decoder.get(k, c);
                }
                data.push(acc);
            }
        }
        Tensor::new(prompt.len(), v, data)
    }
}

/// Training configuration; serialized as the CLI's `train-toy` config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Synthetic corpus size drawn with [`synth_corpus`].
    pub samples: usize,
    pub objective: CompositeSpec,
    #[serde(default)]
    pub sinkhorn: SinkhornConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidShape {
                expected: "at least one sample".into(),
                actual: "samples = 0".into(),
            });
        }
        self.objective.validate()?;
        self.sinkhorn.validate()
    }
}

/// Per-step loss record: the composite total plus each component's value
/// (0 when that component's weight is 0 and it was not evaluated).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub total: f64,
    pub ce: f64,
    pub dice: f64,
    pub topo: f64,
    pub focal: f64,
}

/// Writes the trajectory CSV (`step,total,ce,dice,topo,focal`) with
/// full-precision floats, byte-deterministic for a given trajectory.
pub fn write_trajectory_csv<W: Write>(records: &[StepRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "step,total,ce,dice,topo,focal")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step, r.total, r.ce, r.dice, r.topo, r.focal
        )?;
    }
    Ok(())
}

struct BatchEval {
    records: StepRecord,
    grad_decoder: Tensor,
    grad_embeddings: Tensor,
}

fn eval_batch(model: &ToyModel, corpus: &[Sample], cfg: &TrainConfig, step: usize) -> Result<BatchEval> {
    let v = model.embeddings.rows();
    let mut grad_w = Tensor::zeros(EMBED_DIM, v);
    let mut grad_e = Tensor::zeros(v, EMBED_DIM);
    let (mut total, mut ce_v, mut dice_v, mut topo_v, mut focal_v) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let n = corpus.len() as f64;

    for sample in corpus {
        let logits = model.forward(&sample.prompt)?;
        let mut parts: Vec<(LossKind, LossResult)> = Vec::new();
        if cfg.objective.ce > 0.0 {
            parts.push((LossKind::Ce, cross_entropy(&logits, &sample.target)?));
        }
        if cfg.objective.focal > 0.0 {
            parts.push((
                LossKind::Focal,
                focal(&logits, &sample.target, DEFAULT_FOCAL_GAMMA)?,
            ));
        }
        if cfg.objective.dice > 0.0 {
            parts.push((
                LossKind::Dice,
                dice(&logits, &sample.target, DEFAULT_DICE_SMOOTH)?,
            ));
        }
        if cfg.objective.topo > 0.0 {
            parts.push((
                LossKind::Topo,
                topological_loss(
                    &logits,
                    &sample.target,
                    &model.embeddings,
                    sample.span,
                    sample.span,
                    &cfg.sinkhorn,
                )?,
            ));
        }
        let borrowed: Vec<(LossKind, &LossResult)> =
            parts.iter().map(|(k, r)| (*k, r)).collect();
        let combined = composite(&cfg.objective, &borrowed)?;

        total += combined.value / n;
        for (kind, part) in &parts {
            match kind {
                LossKind::Ce => ce_v += part.value / n,
                LossKind::Dice => dice_v += part.value / n,
                LossKind::Topo => topo_v += part.value / n,
                LossKind::Focal => focal_v += part.value / n,
            }
        }

        // Backprop through logits[t] = embeddings[prompt[t]] · decoder.
        for (t, &tok) in sample.prompt.iter().enumerate() {
            let g_row = combined.grad.row(t);
            let e_row = model.embeddings.row(tok).to_vec();
            for k in 0..EMBED_DIM {
                let gw = &mut grad_w.data_mut()[k * v..(k + 1) * v];
                let ek = e_row[k] / n;
                for (c, gwc) in gw.iter_mut().enumerate() {
                    *gwc += ek * g_row[c];
                }
            }
            let ge = &mut grad_e.data_mut()[tok * EMBED_DIM..(tok + 1) * EMBED_DIM];
            for (k, gek) in ge.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, gc) in g_row.iter().enumerate() {
                    acc += gc * model.decoder.get(k, c);
                }
                *gek += acc / n;
            }
        }
    }

    if !total.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "non-finite loss at step {step}"
        )));
    }
    Ok(BatchEval {
        records: StepRecord {
            step,
            total,
            ce: ce_v,
            dice: dice_v,
            topo: topo_v,
            focal: focal_v,
        },
        grad_decoder: grad_w,
        grad_embeddings: grad_e,
    })
}

/// Full-batch gradient descent on the composite objective. Deterministic for
/// a fixed seed and config; a 0-step run returns the model unchanged with an
/// empty trajectory.
pub fn train(
    model: &ToyModel,
    corpus: &[Sample],
    cfg: &TrainConfig,
) -> Result<(ToyModel, Vec<StepRecord>)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidShape {
            expected: "non-empty corpus".into(),
            actual: "0 samples".into(),
        });
    }
    let mut model = model.clone();
    let mut trajectory = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let eval = eval_batch(&model, corpus, cfg, step)
            .map_err(|e| match e {
                Error::NumericalFailure(msg) if !msg.contains("step") => {
                    Error::NumericalFailure(format!("{msg} (step {step})"))
                }
                other => other,
            })?;
        trajectory.push(eval.records);
        for (w, g) in model
            .decoder
            .data_mut()
            .iter_mut()
            .zip(eval.grad_decoder.data())
        {
            *w -= cfg.learning_rate * g;
        }
        for (e, g) in model
            .embeddings
            .data_mut()
            .iter_mut()
            .zip(eval.grad_embeddings.data())
        {
            *e -= cfg.learning_rate * g;
        }
    }
    Ok((model, trajectory))
}

/// Greedy-decoded corpus summary: mean ingredient recall and mean action
/// distance of decoded samples against their targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyEvaluation {
    pub ingredient_recall: Option<f64>,
    pub action_distance: Option<f64>,
}

fn decode_greedy(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|t| {
            let row = logits.row(t);
            let mut best = 0;
            for (v, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = v;
                }
            }
            best
        })
        .collect()
}

fn tokens_to_recipe(tokens: &[usize], span: SpanMask) -> Recipe {
    let words = |range: std::ops::Range<usize>| {
        range
            .map(|t| VOCAB[tokens[t]].to_string())
            .collect::<Vec<_>>()
    };
    Recipe {
        ingredients: words(span.start()..span.end()),
        instructions: words(span.end()..tokens.len()),
    }
}

/// Greedy-decodes every sample, maps tokens back to words, and scores the
/// decoded "recipes" with the real metric suite.
pub fn evaluate_toy(model: &ToyModel, corpus: &[Sample]) -> Result<ToyEvaluation> {
    let cfg = MetricConfig::default();
    let mut irs = Vec::new();
    let mut ads = Vec::new();
    for sample in corpus {
        let logits = model.forward(&sample.prompt)?;
        let decoded = decode_greedy(&logits);
        let pred = tokens_to_recipe(&decoded, sample.span);
        let gold = tokens_to_recipe(&sample.target, sample.span);
        if let Ok(ir) = ingredient_recall(&pred, &gold) {
            irs.push(ir);
        }
        if let Ok(ad) = action_distance(&pred, &gold, &cfg) {
            ads.push(ad);
        }
    }
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };
    Ok(ToyEvaluation {
        ingredient_recall: mean(&irs),
        action_distance: mean(&ads),
    })
}
