//! Report assembly and the on-disk formats: records.json, report.json,
//! tables.csv and one PR curve CSV per scenario-gesture pair.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::metrics::{confusion_at, macro_average, mean_rows, metrics, pr_sweep, FULL_ROW_COUNT};
use super::{ConfusionMatrix, EvalError, Metrics, PrCurve, TrialRecord};
use crate::config::RunConfig;
use crate::scenario::ScenarioGesture;

/// Thresholds per PR curve.
pub const PR_POINTS: usize = 1000;

/// Persisted trial records with the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub config: RunConfig,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgRow {
    pub sg: ScenarioGesture,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Per-pair tables and macro averages at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub config: RunConfig,
    pub rows: Vec<SgRow>,
    pub macro_accuracy: f64,
    pub macro_f1: f64,
}

impl ReportBundle {
    pub fn delta(&self) -> f64 {
        self.config.pipeline.confidence_threshold
    }

    /// Whether the macro values cover all 14 pairs.
    pub fn is_complete(&self) -> bool {
        self.rows.len() == FULL_ROW_COUNT
    }
}

/// Evaluates `records` at `config.pipeline.confidence_threshold` over the
/// pairs of `config`, with one PR curve per pair. Macro values are strict
/// 14-row averages for a full run and plain means for a scenario subset.
pub fn build_report(records: &[TrialRecord], config: &RunConfig) -> Result<(ReportBundle, Vec<PrCurve>), EvalError> {
    let delta = config.pipeline.confidence_threshold;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for sg in config.scenario_gestures() {
        let confusion = confusion_at(records, sg, delta)?;
        rows.push(SgRow { sg, confusion, metrics: metrics(&confusion)? });
        curves.push(pr_sweep(records, sg, PR_POINTS)?);
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.metrics.accuracy, r.metrics.f1)).collect();
    let m = if pairs.len() == FULL_ROW_COUNT { macro_average(&pairs)? } else { mean_rows(&pairs) };
    Ok((
        ReportBundle { config: config.clone(), rows, macro_accuracy: m.macro_accuracy, macro_f1: m.macro_f1 },
        curves,
    ))
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Sorts object keys and rounds every float to 6 decimal places.
fn canonical(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => json!(round6(n.as_f64().unwrap_or(0.0))),
        v => v,
    }
}

pub fn report_json(bundle: &ReportBundle) -> Value {
    let rows: Vec<Value> = bundle
        .rows
        .iter()
        .map(|r| {
            json!({
                "scenario": r.sg.scenario.get(),
                "gesture": r.sg.gesture.name(),
                "accuracy": r.metrics.accuracy,
                "precision": r.metrics.precision,
                "recall": r.metrics.recall,
                "f1": r.metrics.f1,
                "tp": r.confusion.tp,
                "fp": r.confusion.fp,
                "tn": r.confusion.tn,
                "fn": r.confusion.fn_,
            })
        })
        .collect();
    canonical(json!({
        "config": serde_json::to_value(&bundle.config).expect("config serializes"),
        "master_seed": bundle.config.master_seed,
        "trials_per_sg": bundle.config.trials_per_sg,
        "delta": bundle.delta(),
        "macro_accuracy": bundle.macro_accuracy,
        "macro_f1": bundle.macro_f1,
        "macro_rows": bundle.rows.len(),
        "rows": rows,
    }))
}

pub fn tables_csv(bundle: &ReportBundle) -> String {
    let mut s = String::from("scenario,gesture,accuracy,f1,tp,fp,tn,fn\n");
    for r in &bundle.rows {
        let c = &r.confusion;
        writeln!(
            s,
            "{},{},{:.6},{:.6},{},{},{},{}",
            r.sg.scenario.get(),
            r.sg.gesture.name(),
            r.metrics.accuracy,
            r.metrics.f1,
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )
        .unwrap();
    }
    s
}

pub fn pr_csv(curve: &PrCurve) -> String {
    let mut s = String::from("delta,precision,recall\n");
    for p in &curve.points {
        writeln!(s, "{:.6},{:.6},{:.6}", p.delta, p.precision, p.recall).unwrap();
    }
    s
}

pub fn pr_file_name(sg: ScenarioGesture) -> String {
    format!("pr_{}_{}.csv", sg.scenario.get(), sg.gesture.name())
}

fn write(path: PathBuf, contents: &[u8]) -> Result<PathBuf, EvalError> {
    fs::write(&path, contents).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}

/// Writes report.json, tables.csv and the PR curve files into `dir`,
/// returning the paths written.
pub fn write_report(bundle: &ReportBundle, curves: &[PrCurve], dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let mut json = serde_json::to_string_pretty(&report_json(bundle)).expect("report serializes");
    json.push('\n');
    let mut out = vec![
        write(dir.join("report.json"), json.as_bytes())?,
        write(dir.join("tables.csv"), tables_csv(bundle).as_bytes())?,
    ];
    for c in curves {
        out.push(write(dir.join(pr_file_name(c.sg)), pr_csv(c).as_bytes())?);
    }
    Ok(out)
}

pub fn write_records(file: &RecordsFile, path: &Path) -> Result<(), EvalError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    }
    let mut json = serde_json::to_string_pretty(file).expect("records serialize");
    json.push('\n');
    fs::write(path, json).map_err(|e| EvalError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<RecordsFile, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| EvalError::Json { path: path.to_owned(), source })
}
