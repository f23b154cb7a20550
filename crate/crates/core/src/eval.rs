//! Judging candidate outcomes against ground truth and aggregating suite metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Family;
use crate::diagnostics::change_ratio;
use crate::reference::GroundTruthFile;
use crate::solver::SolveStatus;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown benchmark `{0}` (expected retailopt, mamo or industryor)")]
    UnknownBenchmark(String),
    #[error("cannot aggregate an empty suite")]
    EmptySuite,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    RetailOpt,
    Mamo,
    IndustryOr,
}

impl FromStr for Benchmark {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "retail" | "retailopt" | "retailopt190" => Ok(Benchmark::RetailOpt),
            "mamo" | "mamocomplexlp" => Ok(Benchmark::Mamo),
            "industryor" => Ok(Benchmark::IndustryOr),
            _ => Err(EvalError::UnknownBenchmark(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Strict,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub retail_strict: f64,
    pub retail_practical: f64,
    /// Both tiers for the MIP family.
    pub retail_mip: f64,
    pub external: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            retail_strict: 1e-4,
            retail_practical: 1e-2,
            retail_mip: 1e-2,
            external: 1e-6,
        }
    }
}

pub fn tolerance_for(benchmark: Benchmark, family: Option<Family>, tier: Tier, tol: &Tolerances) -> f64 {
    match (benchmark, family, tier) {
        (Benchmark::RetailOpt, Some(Family::F6), _) => tol.retail_mip,
        (Benchmark::RetailOpt, _, Tier::Strict) => tol.retail_strict,
        (Benchmark::RetailOpt, _, Tier::Practical) => tol.retail_practical,
        (Benchmark::Mamo | Benchmark::IndustryOr, _, _) => tol.external,
    }
}

/// Coarse outcome used for status matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Other,
}

/// An incumbent at the time limit counts as feasible.
pub fn feasibility(status: Option<SolveStatus>, objective: Option<f64>) -> Feasibility {
    match status {
        Some(SolveStatus::Optimal | SolveStatus::TimeLimit) if objective.is_some() => Feasibility::Feasible,
        Some(SolveStatus::Infeasible) => Feasibility::Infeasible,
        _ => Feasibility::Other,
    }
}

/// Relative error, or absolute error when the reference is near zero.
pub fn relative_error(y_pred: f64, y_ref: f64) -> f64 {
    change_ratio(y_pred, y_ref)
}

pub fn judge(
    pred_status: Option<SolveStatus>,
    y_pred: Option<f64>,
    gt_status: SolveStatus,
    y_ref: Option<f64>,
    eps: f64,
) -> bool {
    match (feasibility(pred_status, y_pred), feasibility(Some(gt_status), y_ref)) {
        (Feasibility::Infeasible, Feasibility::Infeasible) => true,
        (Feasibility::Feasible, Feasibility::Feasible) => match (y_pred, y_ref) {
            (Some(p), Some(r)) => relative_error(p, r) < eps,
            _ => false,
        },
        _ => false,
    }
}

/// What a run reported for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance: String,
    pub executed: bool,
    pub status: Option<SolveStatus>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance: String,
    pub family: Option<Family>,
    pub executed: bool,
    pub pred_status: Option<SolveStatus>,
    pub y_pred: Option<f64>,
    pub gt_status: SolveStatus,
    pub y_ref: Option<f64>,
    pub rel_err: Option<f64>,
    pub correct_strict: bool,
    pub correct_practical: bool,
}

impl EvalRecord {
    /// Ran to completion and produced a verdict that can be scored: a
    /// feasible objective, or infeasibility that the ground truth confirms.
    pub fn counts_as_executed(&self) -> bool {
        if !self.executed {
            return false;
        }
        match feasibility(self.pred_status, self.y_pred) {
            Feasibility::Feasible => true,
            Feasibility::Infeasible => feasibility(Some(self.gt_status), self.y_ref) == Feasibility::Infeasible,
            Feasibility::Other => false,
        }
    }
}

pub fn evaluate_one(
    pred: &Prediction,
    family: Option<Family>,
    gt_status: SolveStatus,
    y_ref: Option<f64>,
    benchmark: Benchmark,
    tol: &Tolerances,
) -> EvalRecord {
    let (status, y_pred) = if pred.executed {
        (pred.status, pred.objective)
    } else {
        (None, None)
    };
    let eps = |tier| tolerance_for(benchmark, family, tier, tol);
    let verdict = |tier| judge(status, y_pred, gt_status, y_ref, eps(tier));
    EvalRecord {
        instance: pred.instance.clone(),
        family,
        executed: pred.executed,
        pred_status: status,
        y_pred,
        gt_status,
        y_ref,
        rel_err: y_pred.zip(y_ref).map(|(p, r)| relative_error(p, r)),
        correct_strict: verdict(Tier::Strict),
        correct_practical: verdict(Tier::Practical),
    }
}

/// Judge every ground-truth instance; a missing prediction counts as not executed.
pub fn evaluate_all(
    predictions: &[Prediction],
    ground_truth: &GroundTruthFile,
    benchmark: Benchmark,
    tol: &Tolerances,
) -> Vec<EvalRecord> {
    let by_name: BTreeMap<&str, &Prediction> = predictions.iter().map(|p| (p.instance.as_str(), p)).collect();
    ground_truth
        .iter()
        .map(|(name, gt)| {
            let missing = Prediction {
                instance: name.clone(),
                executed: false,
                status: None,
                objective: None,
            };
            let pred = by_name.get(name.as_str()).copied().unwrap_or(&missing);
            let family = match benchmark {
                Benchmark::RetailOpt => Family::of_name(name),
                _ => None,
            };
            evaluate_one(pred, family, gt.status, gt.objective, benchmark, tol)
        })
        .collect()
}

/// Difference and ratio forms of the silent-failure share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilentFailure {
    /// Exec% − Acc%, in percentage points.
    pub gap: f64,
    /// (Exec% − Acc%) / Exec%; absent when nothing executed.
    pub rate: Option<f64>,
}

pub fn silent_failure(exec_pct: f64, acc_pct: f64) -> SilentFailure {
    let gap = exec_pct - acc_pct;
    SilentFailure {
        gap,
        rate: (exec_pct > 0.0).then(|| gap / exec_pct),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    /// `None` for the totals row.
    pub family: Option<Family>,
    pub count: usize,
    pub executed: usize,
    pub correct_strict: usize,
    pub correct_practical: usize,
    pub exec_pct: f64,
    pub acc_strict_pct: f64,
    pub acc_practical_pct: f64,
    pub sf_strict: SilentFailure,
    pub sf_practical: SilentFailure,
}

impl MetricRow {
    fn from_records<'a>(family: Option<Family>, records: impl Iterator<Item = &'a EvalRecord>) -> Self {
        let (mut count, mut executed, mut strict, mut practical) = (0, 0, 0, 0);
        for r in records {
            count += 1;
            executed += usize::from(r.counts_as_executed());
            strict += usize::from(r.correct_strict);
            practical += usize::from(r.correct_practical);
        }
        let pct = |k: usize| if count == 0 { 0.0 } else { k as f64 / count as f64 * 100.0 };
        let (exec_pct, acc_strict_pct, acc_practical_pct) = (pct(executed), pct(strict), pct(practical));
        MetricRow {
            family,
            count,
            executed,
            correct_strict: strict,
            correct_practical: practical,
            exec_pct,
            acc_strict_pct,
            acc_practical_pct,
            sf_strict: silent_failure(exec_pct, acc_strict_pct),
            sf_practical: silent_failure(exec_pct, acc_practical_pct),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub families: Vec<MetricRow>,
    pub total: MetricRow,
}

pub fn aggregate(records: &[EvalRecord]) -> Result<SuiteReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let families = Family::ALL
        .iter()
        .filter(|f| records.iter().any(|r| r.family == Some(**f)))
        .map(|f| MetricRow::from_records(Some(*f), records.iter().filter(|r| r.family == Some(*f))))
        .collect();
    Ok(SuiteReport {
        families,
        total: MetricRow::from_records(None, records.iter()),
    })
}

fn fmt_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"))
}

/// Plain-text per-family table.
pub fn render_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<30} {:>4} {:>7} {:>13} {:>16} {:>7} {:>8}",
        "Family", "#", "Exec%", "Acc%(strict)", "Acc%(practical)", "SF_gap", "SF_rate"
    );
    let rule = "-".repeat(header.len());
    let _ = writeln!(out, "{header}\n{rule}");
    let line = |out: &mut String, label: String, row: &MetricRow| {
        let _ = writeln!(
            out,
            "{:<30} {:>4} {:>7.1} {:>13.1} {:>16.1} {:>7.1} {:>8}",
            label,
            row.count,
            row.exec_pct,
            row.acc_strict_pct,
            row.acc_practical_pct,
            row.sf_strict.gap,
            fmt_rate(row.sf_strict.rate)
        );
    };
    for row in &report.families {
        let f = row.family.expect("family rows carry a family");
        line(&mut out, format!("{f} {}", f.title()), row);
    }
    if !report.families.is_empty() {
        let _ = writeln!(out, "{rule}");
    }
    line(&mut out, "Total".to_string(), &report.total);
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("record serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One JSON value per non-blank line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EvalError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_jsonl(&text).map_err(|(line, message)| EvalError::Parse {
        path: shown,
        line,
        message,
    })
}

/// Parse JSONL text; the error carries the 1-based line number.
pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}
