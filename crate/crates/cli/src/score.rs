//! `otloss score`: per-pair metric rows plus a final aggregate row, as CSV
//! or JSON.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use otloss::extract::ActionLexicon;
use otloss::metrics::{aggregate, score_pair, MetricConfig, MetricReport, Recipe};

use crate::{json_parse_error, CliError};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Recipe-pair file: a JSON array of {"id", "pred", "gold"} records.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Relative tolerance for quantity matching.
    #[arg(long, default_value_t = 0.01)]
    pub qty_tol: f64,
    /// Relative tolerance for time matching.
    #[arg(long, default_value_t = 0.10)]
    pub time_tol: f64,
    /// Absolute Celsius tolerance for temperature matching.
    #[arg(long, default_value_t = 10.0)]
    pub temp_tol: f64,
    /// Action lexicon file overriding the built-in (one verb per line,
    /// '#' comments); the OTLOSS_LEXICON env var is the fallback.
    #[arg(long, env = "OTLOSS_LEXICON")]
    pub action_lexicon: Option<PathBuf>,
}

pub fn metric_config(
    qty_tol: f64,
    time_tol: f64,
    temp_tol: f64,
    lexicon_path: Option<&PathBuf>,
) -> Result<MetricConfig, CliError> {
    let lexicon = match lexicon_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::parse(format!("cannot read lexicon {path:?}: {e}")))?;
            ActionLexicon::parse(&text)
                .map_err(|e| CliError::parse(format!("invalid lexicon {path:?}: {e}")))?
        }
        None => ActionLexicon::builtin().clone(),
    };
    Ok(MetricConfig {
        quantity_rel_tol: qty_tol,
        time_rel_tol: time_tol,
        temperature_abs_tol: temp_tol,
        lexicon,
    })
}

struct PairRecord {
    id: String,
    pred: Recipe,
    gold: Recipe,
}

/// Parses and schema-checks the pairs file. Structural JSON problems are
/// parse errors (exit 2); record-level problems are schema violations
/// (exit 3) naming the offending id.
fn load_pairs(path: &PathBuf) -> Result<Vec<PairRecord>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {path:?}: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| json_parse_error(&format!("{path:?}"), &e))?;
    let items = value
        .as_array()
        .ok_or_else(|| CliError::schema("pairs file must be a JSON array"))?;

    let mut records = Vec::with_capacity(items.len());
    let mut seen = std::collections::HashSet::new();
    for (index, item) in items.iter().enumerate() {
        let id = item
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                CliError::schema(format!("record {index} is missing a string \"id\""))
            })?;
        if !seen.insert(id.clone()) {
            return Err(CliError::schema(format!("duplicate record id '{id}'")));
        }
        let field = |name: &str| -> Result<Recipe, CliError> {
            let value = item.get(name).ok_or_else(|| {
                CliError::schema(format!("record '{id}' is missing \"{name}\""))
            })?;
            let recipe: Recipe = serde_json::from_value(value.clone()).map_err(|e| {
                CliError::schema(format!("record '{id}': invalid \"{name}\": {e}"))
            })?;
            recipe
                .validate()
                .map_err(|e| CliError::schema(format!("record '{id}': {e}")))?;
            Ok(recipe)
        };
        records.push(PairRecord {
            pred: field("pred")?,
            gold: field("gold")?,
            id,
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct RowOut<'a> {
    id: &'a str,
    #[serde(flatten)]
    report: &'a MetricReport,
}

#[derive(Serialize)]
struct ReportOut<'a> {
    pairs: Vec<RowOut<'a>>,
    aggregate: RowOut<'a>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv<W: Write>(
    out: &mut W,
    rows: &[(String, MetricReport)],
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record([
            "id", "r1", "ap", "qp", "ir", "tep", "tip", "ad", "sd", "n_r1", "n_ap", "n_qp",
            "n_ir", "n_tep", "n_tip", "n_ad", "n_sd",
        ])
        .map_err(|e| CliError::other(e.to_string()))?;
    for (id, r) in rows {
        writer
            .write_record([
                id.clone(),
                opt_cell(r.r1),
                opt_cell(r.ap),
                opt_cell(r.qp),
                opt_cell(r.ir),
                opt_cell(r.tep),
                opt_cell(r.tip),
                opt_cell(r.ad),
                opt_cell(r.sd),
                r.counts.r1.to_string(),
                r.counts.ap.to_string(),
                r.counts.qp.to_string(),
                r.counts.ir.to_string(),
                r.counts.tep.to_string(),
                r.counts.tip.to_string(),
                r.counts.ad.to_string(),
                r.counts.sd.to_string(),
            ])
            .map_err(|e| CliError::other(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn run(args: ScoreArgs) -> Result<(), CliError> {
    let cfg = metric_config(
        args.qty_tol,
        args.time_tol,
        args.temp_tol,
        args.action_lexicon.as_ref(),
    )?;
    let records = load_pairs(&args.pairs)?;
    let mut rows: Vec<(String, MetricReport)> = Vec::with_capacity(records.len() + 1);
    for record in &records {
        let report = score_pair(&record.pred, &record.gold, &cfg)
            .map_err(|e| CliError::schema(format!("record '{}': {e}", record.id)))?;
        rows.push((record.id.clone(), report));
    }
    let agg = aggregate(
        &rows
            .iter()
            .map(|(_, r)| r.clone())
            .collect::<Vec<_>>(),
    )?;
    rows.push(("aggregate".to_string(), agg));

    let mut buffer: Vec<u8> = Vec::new();
    match args.format {
        Format::Csv => write_csv(&mut buffer, &rows)?,
        Format::Json => {
            let (aggregate_row, pair_rows) = rows.split_last().expect("aggregate exists");
            let report = ReportOut {
                pairs: pair_rows
                    .iter()
                    .map(|(id, r)| RowOut { id, report: r })
                    .collect(),
                aggregate: RowOut {
                    id: &aggregate_row.0,
                    report: &aggregate_row.1,
                },
            };
            serde_json::to_writer_pretty(&mut buffer, &report)
                .map_err(|e| CliError::other(e.to_string()))?;
            buffer.push(b'\n');
        }
    }
    match &args.out {
        Some(path) => fs::write(path, buffer)?,
        None => std::io::stdout().write_all(&buffer)?,
    }
    Ok(())
}
