//! Probe result files: per-run CSV rows, loss curves and the summary.

use imgidx_core::probe::{AblationConfig, EvalSet, ProbeResult, ProbeSpec};
use serde::Serialize;

use crate::canon::{format_float, to_canonical};
use crate::error::{CliError, Result};

pub const RESULTS_HEADER: [&str; 9] = [
    "config",
    "seed",
    "eval_set",
    "image_counts",
    "correct",
    "total",
    "accuracy",
    "final_loss",
    "failure",
];

pub const CURVES_HEADER: [&str; 4] = ["config", "seed", "step", "loss"];

fn float_cell(x: f64) -> String {
    if x.is_finite() {
        format_float(x)
    } else {
        String::new()
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::BadInput(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::BadInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn counts_cell(spec: &ProbeSpec, set: EvalSet) -> String {
    set.counts(spec).iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";")
}

pub fn results_csv(spec: &ProbeSpec, result: &ProbeResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            r.config.name().to_string(),
            r.seed.to_string(),
            r.eval_set.name().to_string(),
            counts_cell(spec, r.eval_set),
            r.correct.to_string(),
            r.total.to_string(),
            float_cell(r.accuracy),
            float_cell(r.final_loss),
            r.failure.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn curves_csv(result: &ProbeResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CURVES_HEADER).map_err(csv_err)?;
    for c in &result.curves {
        for &(step, loss) in &c.points {
            w.write_record([c.config.name().to_string(), c.seed.to_string(), step.to_string(), float_cell(loss)])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub config: String,
    pub eval_set: String,
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedGap {
    pub seed: u64,
    pub full: f64,
    pub rope_only: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Accuracy of uniform guessing over the vocabulary.
    pub chance: f64,
    pub cells: Vec<Cell>,
    /// Full minus rope-only accuracy on the extrapolated set, per seed.
    pub extrapolation_gap: Vec<SeedGap>,
}

pub fn summarize(spec: &ProbeSpec, result: &ProbeResult) -> Summary {
    let mut cells = Vec::new();
    for config in AblationConfig::ALL {
        for set in [EvalSet::InDist, EvalSet::Extrapolated] {
            let rows: Vec<_> = result.rows.iter().filter(|r| r.config == config && r.eval_set == set).collect();
            if rows.is_empty() {
                continue;
            }
            let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            cells.push(Cell {
                config: config.name().into(),
                eval_set: set.name().into(),
                runs: rows.len(),
                failures: rows.iter().filter(|r| !r.failure.is_empty()).count(),
                mean: accs.iter().sum::<f64>() / accs.len() as f64,
                min: accs.iter().copied().fold(f64::INFINITY, f64::min),
                max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let mut gaps = Vec::new();
    for seed in result.seeds() {
        let full = result.accuracy(AblationConfig::Full, seed, EvalSet::Extrapolated);
        let base = result.accuracy(AblationConfig::RopeOnly, seed, EvalSet::Extrapolated);
        if let (Some(full), Some(rope_only)) = (full, base) {
            gaps.push(SeedGap {
                seed,
                full,
                rope_only,
                gap: full - rope_only,
            });
        }
    }
    Summary {
        chance: 1.0 / spec.vocab as f64,
        cells,
        extrapolation_gap: gaps,
    }
}

pub fn summary_json(spec: &ProbeSpec, result: &ProbeResult) -> Result<String> {
    to_canonical(&summarize(spec, result))
}
