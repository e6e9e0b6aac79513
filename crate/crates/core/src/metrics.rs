//! Recipe-specific evaluation: ingredient recall, quantity precision,
//! action precision, time/temperature precision, action and step edit
//! distances, ROUGE-1, and corpus aggregation.
//!
//! Matching is greedy and in order everywhere; numeric tolerances default to
//! 1% relative for quantities, 10% relative for times, and 10 °C absolute
//! for temperatures. A metric whose denominator is empty is *undefined*: it
//! is carried as absent, never as 0 or 100, and excluded from corpus means.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{
    extract_actions, extract_temperatures, extract_times, parse_ingredient, ActionLexicon,
    IngredientEntry, TemperatureMention, TimeMention,
};

/// A structured recipe: ingredient lines plus instruction steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub ingredients: Vec<String>,
    pub instructions: Vec<String>,
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        if self.ingredients.is_empty() {
            return Err(Error::InvalidRecipe("empty ingredient list".into()));
        }
        if self.instructions.is_empty() {
            return Err(Error::InvalidRecipe("empty instruction list".into()));
        }
        if self
            .ingredients
            .iter()
            .chain(&self.instructions)
            .any(|s| s.trim().is_empty())
        {
            return Err(Error::InvalidRecipe("blank entry".into()));
        }
        Ok(())
    }
}

/// Tolerances and lexicon shared by the metric suite.
#[derive(Clone, Debug)]
pub struct MetricConfig {
    /// Relative tolerance on quantity values (fraction of the gold value).
    pub quantity_rel_tol: f64,
    /// Relative tolerance on time durations, in seconds.
    pub time_rel_tol: f64,
    /// Absolute tolerance on temperatures, in Celsius.
    pub temperature_abs_tol: f64,
    pub lexicon: ActionLexicon,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            quantity_rel_tol: 0.01,
            time_rel_tol: 0.10,
            temperature_abs_tol: 10.0,
            lexicon: ActionLexicon::builtin().clone(),
        }
    }
}

/// Per-metric denominator sizes. In a per-pair report these are the
/// denominators themselves (gold heads, gold mentions, predicted actions,
/// ...); in a corpus report they are the number of pairs on which the
/// metric was defined. A zero count always accompanies an absent score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub r1: usize,
    pub ap: usize,
    pub qp: usize,
    pub ir: usize,
    pub tep: usize,
    pub tip: usize,
    pub ad: usize,
    pub sd: usize,
}

/// The nine-score report for one recipe pair or a corpus aggregate.
/// Percentages live in [0, 100]; the two distances are normalized to the
/// same scale. Undefined scores are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r1: Option<f64>,
    pub ap: Option<f64>,
    pub qp: Option<f64>,
    pub ir: Option<f64>,
    pub tep: Option<f64>,
    pub tip: Option<f64>,
    pub ad: Option<f64>,
    pub sd: Option<f64>,
    pub counts: MetricCounts,
}

fn parsed_heads(recipe: &Recipe) -> Vec<IngredientEntry> {
    recipe
        .ingredients
        .iter()
        .filter_map(|line| parse_ingredient(line).ok())
        .collect()
}

fn head_tokens(head: &str) -> Vec<&str> {
    head.split_whitespace().collect()
}

fn contains_phrase(hay: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn heads_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let ta = head_tokens(a);
    let tb = head_tokens(b);
    contains_phrase(&ta, &tb) || contains_phrase(&tb, &ta)
}

/// Greedy in-gold-order assignment of predicted heads to gold heads; each
/// predicted head is consumed by at most one gold head.
fn match_ingredients(pred: &[IngredientEntry], gold: &[IngredientEntry]) -> Vec<Option<usize>> {
    let mut used = vec![false; pred.len()];
    gold.iter()
        .map(|g| {
            let hit = pred
                .iter()
                .enumerate()
                .find(|(j, p)| !used[*j] && heads_match(&p.head, &g.head))
                .map(|(j, _)| j);
            if let Some(j) = hit {
                used[j] = true;
            }
            hit
        })
        .collect()
}

/// Fraction of gold ingredients that some predicted ingredient matches, as a
/// percentage. Additions on the predicted side are ignored.
pub fn ingredient_recall(pred: &Recipe, gold: &Recipe) -> Result<f64> {
    let pred_heads = parsed_heads(pred);
    let gold_heads = parsed_heads(gold);
    if gold_heads.is_empty() {
        return Err(Error::UndefinedMetric("ingredient_recall"));
    }
    let matched = match_ingredients(&pred_heads, &gold_heads)
        .iter()
        .filter(|m| m.is_some())
        .count();
    Ok(100.0 * matched as f64 / gold_heads.len() as f64)
}

/// Accuracy of quantities on recalled ingredients: over matched pairs whose
/// gold side carries a quantity, a prediction is correct when the canonical
/// unit agrees and the value is within the relative tolerance.
pub fn quantity_precision(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    let pred_heads = parsed_heads(pred);
    let gold_heads = parsed_heads(gold);
    let assignment = match_ingredients(&pred_heads, &gold_heads);
    let mut considered = 0usize;
    let mut correct = 0usize;
    for (g, hit) in gold_heads.iter().zip(&assignment) {
        let Some(gq) = &g.quantity else { continue };
        let Some(j) = hit else { continue };
        considered += 1;
        if let Some(pq) = &pred_heads[*j].quantity {
            if pq.unit == gq.unit && (pq.value - gq.value).abs() / gq.value <= cfg.quantity_rel_tol
            {
                correct += 1;
            }
        }
    }
    if considered == 0 {
        return Err(Error::UndefinedMetric("quantity_precision"));
    }
    Ok(100.0 * correct as f64 / considered as f64)
}

fn recipe_actions(recipe: &Recipe, lexicon: &ActionLexicon) -> Vec<String> {
    recipe
        .instructions
        .iter()
        .flat_map(|step| extract_actions(step, lexicon))
        .map(|m| m.verb)
        .collect()
}

fn multiset(items: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for item in items {
        *counts.entry(item.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Precision of cooking verbs: multiset intersection of predicted and gold
/// action multisets over the predicted multiset size.
pub fn action_precision(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    let pred_actions = recipe_actions(pred, &cfg.lexicon);
    if pred_actions.is_empty() {
        return Err(Error::UndefinedMetric("action_precision"));
    }
    let gold_actions = recipe_actions(gold, &cfg.lexicon);
    let gold_counts = multiset(&gold_actions);
    let pred_counts = multiset(&pred_actions);
    let intersection: usize = pred_counts
        .iter()
        .map(|(verb, &n)| n.min(gold_counts.get(verb).copied().unwrap_or(0)))
        .sum();
    Ok(100.0 * intersection as f64 / pred_actions.len() as f64)
}

fn recipe_times(recipe: &Recipe) -> Vec<TimeMention> {
    recipe.instructions.iter().flat_map(|s| extract_times(s)).collect()
}

fn recipe_temperatures(recipe: &Recipe) -> Vec<TemperatureMention> {
    recipe
        .instructions
        .iter()
        .flat_map(|s| extract_temperatures(s))
        .collect()
}

fn time_within(pred: f64, gold: f64, tol: f64) -> bool {
    (pred - gold).abs() / gold <= tol
}

/// Accuracy of time durations: gold mentions pair positionally with
/// predicted mentions (k-th with k-th); a pair is correct within the
/// relative tolerance, and unpaired gold mentions count as incorrect.
pub fn time_precision(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    let gold_times = recipe_times(gold);
    if gold_times.is_empty() {
        return Err(Error::UndefinedMetric("time_precision"));
    }
    let pred_times = recipe_times(pred);
    let correct = gold_times
        .iter()
        .enumerate()
        .filter(|(k, g)| {
            pred_times
                .get(*k)
                .is_some_and(|p| time_within(p.seconds, g.seconds, cfg.time_rel_tol))
        })
        .count();
    Ok(100.0 * correct as f64 / gold_times.len() as f64)
}

/// Accuracy of temperatures, matched like [`time_precision`] but with an
/// absolute Celsius tolerance.
pub fn temperature_precision(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    let gold_temps = recipe_temperatures(gold);
    if gold_temps.is_empty() {
        return Err(Error::UndefinedMetric("temperature_precision"));
    }
    let pred_temps = recipe_temperatures(pred);
    let correct = gold_temps
        .iter()
        .enumerate()
        .filter(|(k, g)| {
            pred_temps
                .get(*k)
                .is_some_and(|p| (p.celsius - g.celsius).abs() <= cfg.temperature_abs_tol)
        })
        .count();
    Ok(100.0 * correct as f64 / gold_temps.len() as f64)
}

/// Unit-cost Levenshtein distance between two sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    levenshtein_by(a, b, |x, y| x == y)
}

/// Levenshtein distance under a caller-supplied equality predicate.
pub fn levenshtein_by<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(!eq(x, y));
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized action edit distance: Levenshtein over the in-order verb
/// sequences, divided by the longer length, times 100.
pub fn action_distance(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    let gold_actions = recipe_actions(gold, &cfg.lexicon);
    if gold_actions.is_empty() {
        return Err(Error::UndefinedMetric("action_distance"));
    }
    let pred_actions = recipe_actions(pred, &cfg.lexicon);
    let dist = levenshtein(&pred_actions, &gold_actions);
    let denom = pred_actions.len().max(gold_actions.len());
    Ok(100.0 * dist as f64 / denom as f64)
}

fn normalize_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    lowered
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two steps count as equal when their normalized text matches, or when they
/// carry the same action multiset and every time/temperature mention pairs
/// within the precision thresholds.
fn steps_equal(pred: &str, gold: &str, cfg: &MetricConfig) -> bool {
    if normalize_text(pred) == normalize_text(gold) {
        return true;
    }
    let mut pa = extract_actions(pred, &cfg.lexicon)
        .into_iter()
        .map(|m| m.verb)
        .collect::<Vec<_>>();
    let mut ga = extract_actions(gold, &cfg.lexicon)
        .into_iter()
        .map(|m| m.verb)
        .collect::<Vec<_>>();
    pa.sort();
    ga.sort();
    if pa != ga {
        return false;
    }
    let pt = extract_times(pred);
    let gt = extract_times(gold);
    if pt.len() != gt.len()
        || !pt
            .iter()
            .zip(&gt)
            .all(|(p, g)| time_within(p.seconds, g.seconds, cfg.time_rel_tol))
    {
        return false;
    }
    let ptemps = extract_temperatures(pred);
    let gtemps = extract_temperatures(gold);
    ptemps.len() == gtemps.len()
        && ptemps
            .iter()
            .zip(&gtemps)
            .all(|(p, g)| (p.celsius - g.celsius).abs() <= cfg.temperature_abs_tol)
}

/// Normalized step edit distance over whole instruction steps, with two
/// steps equal per the normalized-text / action-multiset / numeric-threshold
/// rule above.
pub fn step_distance(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<f64> {
    if gold.instructions.is_empty() {
        return Err(Error::UndefinedMetric("step_distance"));
    }
    let dist = levenshtein_by(&pred.instructions, &gold.instructions, |p, g| {
        steps_equal(p, g, cfg)
    });
    let denom = pred.instructions.len().max(gold.instructions.len());
    Ok(100.0 * dist as f64 / denom as f64)
}

fn recipe_tokens(recipe: &Recipe) -> Vec<String> {
    recipe
        .ingredients
        .iter()
        .chain(&recipe.instructions)
        .flat_map(|line| {
            normalize_text(line)
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Unigram F1 over lowercased, punctuation-stripped tokens of the whole
/// recipe text, with clipped (multiset) overlap.
pub fn rouge1(pred: &Recipe, gold: &Recipe) -> Result<f64> {
    let gold_tokens = recipe_tokens(gold);
    if gold_tokens.is_empty() {
        return Err(Error::UndefinedMetric("rouge1"));
    }
    let pred_tokens = recipe_tokens(pred);
    if pred_tokens.is_empty() {
        return Ok(0.0);
    }
    let gold_counts = multiset(&gold_tokens);
    let pred_counts = multiset(&pred_tokens);
    let overlap: usize = pred_counts
        .iter()
        .map(|(tok, &n)| n.min(gold_counts.get(tok).copied().unwrap_or(0)))
        .sum();
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Scores one pair, recording undefined metrics as absent and per-metric
/// denominators in `counts`.
pub fn score_pair(pred: &Recipe, gold: &Recipe, cfg: &MetricConfig) -> Result<MetricReport> {
    pred.validate()?;
    gold.validate()?;

    let gold_heads = parsed_heads(gold);
    let pred_heads = parsed_heads(pred);
    let assignment = match_ingredients(&pred_heads, &gold_heads);
    let qp_considered = gold_heads
        .iter()
        .zip(&assignment)
        .filter(|(g, hit)| g.quantity.is_some() && hit.is_some())
        .count();

    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    };

    let report = MetricReport {
        r1: defined(rouge1(pred, gold))?,
        ap: defined(action_precision(pred, gold, cfg))?,
        qp: defined(quantity_precision(pred, gold, cfg))?,
        ir: defined(ingredient_recall(pred, gold))?,
        tep: defined(temperature_precision(pred, gold, cfg))?,
        tip: defined(time_precision(pred, gold, cfg))?,
        ad: defined(action_distance(pred, gold, cfg))?,
        sd: defined(step_distance(pred, gold, cfg))?,
        counts: MetricCounts {
            r1: recipe_tokens(gold).len(),
            ap: recipe_actions(pred, &cfg.lexicon).len(),
            qp: qp_considered,
            ir: gold_heads.len(),
            tep: recipe_temperatures(gold).len(),
            tip: recipe_times(gold).len(),
            ad: recipe_actions(gold, &cfg.lexicon).len(),
            sd: gold.instructions.len(),
        },
    };
    Ok(report)
}

/// Corpus aggregate: per-metric mean over the pairs where the metric is
/// defined, with `counts` recording how many pairs contributed.
pub fn score_corpus(pairs: &[(Recipe, Recipe)], cfg: &MetricConfig) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyReport);
    }
    let reports: Vec<MetricReport> = pairs
        .iter()
        .map(|(pred, gold)| score_pair(pred, gold, cfg))
        .collect::<Result<_>>()?;
    aggregate(&reports)
}

/// Aggregates already-computed per-pair reports (the mean/`counts`
/// convention of [`score_corpus`]).
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }
    fn mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
        let defined: Vec<f64> = values.flatten().collect();
        if defined.is_empty() {
            (None, 0)
        } else {
            (
                Some(defined.iter().sum::<f64>() / defined.len() as f64),
                defined.len(),
            )
        }
    }
    let (r1, n_r1) = mean(reports.iter().map(|r| r.r1));
    let (ap, n_ap) = mean(reports.iter().map(|r| r.ap));
    let (qp, n_qp) = mean(reports.iter().map(|r| r.qp));
    let (ir, n_ir) = mean(reports.iter().map(|r| r.ir));
    let (tep, n_tep) = mean(reports.iter().map(|r| r.tep));
    let (tip, n_tip) = mean(reports.iter().map(|r| r.tip));
    let (ad, n_ad) = mean(reports.iter().map(|r| r.ad));
    let (sd, n_sd) = mean(reports.iter().map(|r| r.sd));
    if [n_r1, n_ap, n_qp, n_ir, n_tep, n_tip, n_ad, n_sd]
        .iter()
        .all(|&n| n == 0)
    {
        return Err(Error::EmptyReport);
    }
    Ok(MetricReport {
        r1,
        ap,
        qp,
        ir,
        tep,
        tip,
        ad,
        sd,
        counts: MetricCounts {
            r1: n_r1,
            ap: n_ap,
            qp: n_qp,
            ir: n_ir,
            tep: n_tep,
            tip: n_tip,
            ad: n_ad,
            sd: n_sd,
        },
    })
}
