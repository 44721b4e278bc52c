//! Scoring predictions against survey gold labels.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::community::CommunityLabel;
use crate::stance::StancePrediction;
use crate::survey::{SurveyCatalog, SurveyError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("predictions and gold labels are misaligned: {0}")]
    Misaligned(String),
    #[error("no prediction for catalog item {0}")]
    MissingItem(String),
    #[error("prediction for unknown item {0}")]
    UnknownItem(String),
    #[error("cannot aggregate runs of different methods: {0} vs {1}")]
    MixedMethods(String, String),
    #[error("no runs to aggregate")]
    NoRuns,
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// One item's predicted label; `None` is an abstention and always counts
/// as wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub predicted: Option<CommunityLabel>,
    #[serde(default)]
    pub tie: bool,
    /// Democratic-side score (stance, or mention count for the frequency model).
    pub stance_d: Option<f64>,
    pub stance_r: Option<f64>,
}

impl From<StancePrediction> for Prediction {
    fn from(p: StancePrediction) -> Self {
        Prediction {
            question_id: p.question_id,
            predicted: Some(p.predicted),
            tie: p.tie,
            stance_d: Some(p.stance_d),
            stance_r: Some(p.stance_r),
        }
    }
}

fn align<'a>(
    preds: &'a [(String, Option<CommunityLabel>)],
    golds: &'a [(String, CommunityLabel)],
) -> Result<Vec<(Option<CommunityLabel>, CommunityLabel)>, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::Misaligned(format!("{} predictions, {} gold labels", preds.len(), golds.len())));
    }
    let mut by_id: HashMap<&str, Option<CommunityLabel>> = HashMap::new();
    for (id, p) in preds {
        if by_id.insert(id.as_str(), *p).is_some() {
            return Err(EvalError::Misaligned(format!("duplicate prediction for {id}")));
        }
    }
    golds
        .iter()
        .map(|(id, g)| {
            by_id
                .get(id.as_str())
                .map(|p| (*p, *g))
                .ok_or_else(|| EvalError::Misaligned(format!("no prediction for {id}")))
        })
        .collect()
}

pub fn accuracy(
    preds: &[(String, Option<CommunityLabel>)],
    golds: &[(String, CommunityLabel)],
) -> Result<f64, EvalError> {
    Ok(accuracy_of(&align(preds, golds)?))
}

pub fn weighted_f1(
    preds: &[(String, Option<CommunityLabel>)],
    golds: &[(String, CommunityLabel)],
) -> Result<f64, EvalError> {
    Ok(weighted_f1_of(&align(preds, golds)?))
}

/// Fraction of positions where prediction equals gold.
pub fn accuracy_of(pairs: &[(Option<CommunityLabel>, CommunityLabel)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|(p, g)| *p == Some(*g)).count() as f64 / pairs.len() as f64
}

/// Per-class F1 averaged with weights equal to gold support.
pub fn weighted_f1_of(pairs: &[(Option<CommunityLabel>, CommunityLabel)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for class in [CommunityLabel::D, CommunityLabel::R] {
        let tp = pairs.iter().filter(|(p, g)| *p == Some(class) && *g == class).count();
        let fp = pairs.iter().filter(|(p, g)| *p == Some(class) && *g != class).count();
        let support = pairs.iter().filter(|(_, g)| *g == class).count();
        let fn_ = support - tp;
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
        total += f1 * support as f64;
    }
    total / pairs.len() as f64
}

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub gold_d_pred_d: usize,
    pub gold_d_pred_r: usize,
    pub gold_r_pred_d: usize,
    pub gold_r_pred_r: usize,
    pub abstained: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: &[(Option<CommunityLabel>, CommunityLabel)]) -> Self {
        let mut c = Confusion::default();
        for (p, g) in pairs {
            use CommunityLabel::*;
            match (p, g) {
                (Some(D), D) => c.gold_d_pred_d += 1,
                (Some(R), D) => c.gold_d_pred_r += 1,
                (Some(D), R) => c.gold_r_pred_d += 1,
                (Some(R), R) => c.gold_r_pred_r += 1,
                (None, _) => c.abstained += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.gold_d_pred_d + self.gold_d_pred_r + self.gold_r_pred_d + self.gold_r_pred_r + self.abstained
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodDescriptor {
    pub model: String,
    pub template: Option<String>,
    pub backend: String,
}

impl MethodDescriptor {
    pub fn key(&self) -> String {
        format!("{}|{}|{}", self.model, self.template.as_deref().unwrap_or("-"), self.backend)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub question_id: String,
    pub predicted: Option<CommunityLabel>,
    pub gold: CommunityLabel,
    pub correct: bool,
    pub tie: bool,
    pub stance_d: Option<f64>,
    pub stance_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub method: MethodDescriptor,
    pub per_item: Vec<ItemResult>,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub confusion: Confusion,
    /// Question ids predicted wrongly (abstentions included).
    pub errors: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Scores one prediction per catalog item; rows follow catalog order.
pub fn evaluate_run(
    run_id: impl Into<String>,
    method: MethodDescriptor,
    predictions: &[Prediction],
    catalog: &SurveyCatalog,
) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if catalog.get(&p.question_id).is_none() {
            return Err(EvalError::UnknownItem(p.question_id.clone()));
        }
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(EvalError::Misaligned(format!("duplicate prediction for {}", p.question_id)));
        }
    }
    let mut per_item = Vec::with_capacity(catalog.items().len());
    for item in catalog.items() {
        let p = by_id
            .get(item.question_id.as_str())
            .ok_or_else(|| EvalError::MissingItem(item.question_id.clone()))?;
        let gold = item.gold_label()?;
        per_item.push(ItemResult {
            question_id: item.question_id.clone(),
            predicted: p.predicted,
            gold,
            correct: p.predicted == Some(gold),
            tie: p.tie,
            stance_d: p.stance_d,
            stance_r: p.stance_r,
        });
    }
    let pairs: Vec<_> = per_item.iter().map(|r| (r.predicted, r.gold)).collect();
    Ok(EvalReport {
        run_id: run_id.into(),
        method,
        accuracy: accuracy_of(&pairs),
        weighted_f1: weighted_f1_of(&pairs),
        confusion: Confusion::from_pairs(&pairs),
        errors: per_item.iter().filter(|r| !r.correct).map(|r| r.question_id.clone()).collect(),
        per_item,
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample (n-1) standard deviation; std is 0 for one value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub method: MethodDescriptor,
    pub n_runs: usize,
    pub accuracy: MeanStd,
    pub weighted_f1: MeanStd,
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<RunAggregate, EvalError> {
    let first = reports.first().ok_or(EvalError::NoRuns)?;
    if let Some(other) = reports.iter().find(|r| r.method != first.method) {
        return Err(EvalError::MixedMethods(first.method.key(), other.method.key()));
    }
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let f1: Vec<f64> = reports.iter().map(|r| r.weighted_f1).collect();
    Ok(RunAggregate {
        method: first.method.clone(),
        n_runs: reports.len(),
        accuracy: MeanStd::of(&acc),
        weighted_f1: MeanStd::of(&f1),
    })
}

fn percent_cell(m: MeanStd, n_runs: usize) -> String {
    if n_runs > 1 {
        format!("{:.2}±{:.2}", m.mean * 100.0, m.std * 100.0)
    } else {
        format!("{:.2}", m.mean * 100.0)
    }
}

/// TSV with columns Model, Prompt, Accuracy, Weighted F1 (percentages,
/// `mean±std` when more than one run).
pub fn aggregate_table(rows: &[RunAggregate]) -> String {
    let mut out = String::from("Model\tPrompt\tAccuracy\tWeighted F1\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.method.model,
            r.method.template.as_deref().unwrap_or("---"),
            percent_cell(r.accuracy, r.n_runs),
            percent_cell(r.weighted_f1, r.n_runs),
        ));
    }
    out
}

pub fn report_path(runs_dir: &Path, run_id: &str) -> PathBuf {
    runs_dir.join(run_id).join("report.json")
}

/// Writes `<runs_dir>/<run_id>/report.json` via a temp file and rename.
pub fn write_report(runs_dir: &Path, report: &EvalReport) -> Result<PathBuf, EvalError> {
    let path = report_path(runs_dir, &report.run_id);
    write_json_atomic(&path, report)?;
    Ok(path)
}

pub fn read_report(runs_dir: &Path, run_id: &str) -> Result<EvalReport, EvalError> {
    let path = report_path(runs_dir, run_id);
    let bytes = std::fs::read(&path).map_err(|e| EvalError::Io { path: path.clone(), message: e.to_string() })?;
    serde_json::from_slice(&bytes).map_err(|e| EvalError::Io { path, message: e.to_string() })
}

pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let io = |e: &dyn std::fmt::Display| EvalError::Io { path: path.to_path_buf(), message: e.to_string() };
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(&e))?;
    serde_json::to_writer_pretty(&mut tmp, value).map_err(|e| io(&e))?;
    tmp.write_all(b"\n").map_err(|e| io(&e))?;
    tmp.persist(path).map_err(|e| io(&e.error))?;
    Ok(())
}
