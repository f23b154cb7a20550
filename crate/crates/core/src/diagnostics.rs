//! Diagnostic records shared by every verification layer.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Objective magnitude below which change ratios fall back to absolute change.
pub const SMALL_OBJECTIVE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    L1,
    #[serde(rename = "L2_CPT")]
    L2Cpt,
    #[serde(rename = "L2_OPT")]
    L2Opt,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::L1 => "L1",
            Layer::L2Cpt => "L2_CPT",
            Layer::L2Opt => "L2_OPT",
        })
    }
}

/// Ordered from most to least severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Fatal,
    Warning,
    Info,
    Pass,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Fatal => "FATAL",
            Severity::Warning => "WARNING",
            Severity::Info => "INFO",
            Severity::Pass => "PASS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub layer: Layer,
    pub severity: Severity,
    pub issue_type: String,
    pub target: String,
    pub evidence: String,
    pub triggers_repair: bool,
}

impl Diagnostic {
    /// Only L2 warnings are repairable; Fatal goes to regeneration instead.
    pub fn new(
        layer: Layer,
        severity: Severity,
        issue_type: impl Into<String>,
        target: impl Into<String>,
        evidence: impl Into<String>,
    ) -> Self {
        Diagnostic {
            layer,
            severity,
            issue_type: issue_type.into(),
            target: target.into(),
            evidence: evidence.into(),
            triggers_repair: severity == Severity::Warning && layer != Layer::L1,
        }
    }

    pub fn is_actionable(&self) -> bool {
        self.triggers_repair
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportStatus {
    Verified,
    NeedsRepair,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub diagnostics: Vec<Diagnostic>,
    pub baseline_objective: Option<f64>,
    pub status: ReportStatus,
}

impl VerificationReport {
    pub fn new(diagnostics: Vec<Diagnostic>, baseline_objective: Option<f64>) -> Self {
        let status = status_of(&diagnostics);
        VerificationReport {
            diagnostics,
            baseline_objective,
            status,
        }
    }

    pub fn has_warning(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Warning)
    }

    pub fn actionable(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_actionable())
    }

    pub fn reference_only(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Info)
    }
}

pub fn status_of(diagnostics: &[Diagnostic]) -> ReportStatus {
    if diagnostics.iter().any(|d| d.severity == Severity::Fatal) {
        ReportStatus::Failed
    } else if diagnostics.iter().any(|d| d.severity == Severity::Warning) {
        ReportStatus::NeedsRepair
    } else {
        ReportStatus::Verified
    }
}

/// Graduated thresholds: below `low` the component is likely missing, above
/// `high` it is confirmed present, and the closed band between is uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { low: 0.05, high: 0.30 }
    }
}

pub fn classify_change_ratio(ratio: f64, caused_infeasible: bool, th: Thresholds) -> Severity {
    debug_assert!(ratio >= 0.0 || ratio.is_nan());
    if caused_infeasible {
        Severity::Pass
    } else if ratio < th.low {
        Severity::Warning
    } else if ratio <= th.high {
        Severity::Info
    } else {
        Severity::Pass
    }
}

/// `|new − base| / |base|`, or the absolute change when `|base|` is tiny.
pub fn change_ratio(new: f64, base: f64) -> f64 {
    let delta = (new - base).abs();
    if base.abs() < SMALL_OBJECTIVE {
        delta
    } else {
        delta / base.abs()
    }
}

/// Evidence sentence for a perturbation test.
pub fn perturbation_evidence(target: &str, factor: f64, ratio: f64, severity: Severity) -> String {
    let pct = ratio * 100.0;
    let qualifier = if severity == Severity::Warning { "only " } else { "" };
    format!("`{target}`: perturbation ×{factor} caused {qualifier}{pct:.1}% objective change")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_boundaries() {
        let th = Thresholds::default();
        assert_eq!(classify_change_ratio(0.003, false, th), Severity::Warning);
        assert_eq!(classify_change_ratio(0.05, false, th), Severity::Info);
        assert_eq!(classify_change_ratio(0.10, false, th), Severity::Info);
        assert_eq!(classify_change_ratio(0.30, false, th), Severity::Info);
        assert_eq!(classify_change_ratio(0.31, false, th), Severity::Pass);
        assert_eq!(classify_change_ratio(0.0, true, th), Severity::Pass);
    }

    #[test]
    fn ratio_uses_absolute_change_near_zero() {
        assert_eq!(change_ratio(110.0, 100.0), 0.1);
        assert_eq!(change_ratio(0.25, 0.0), 0.25);
        assert_eq!(change_ratio(-90.0, -100.0), 0.1);
    }

    #[test]
    fn only_l2_warnings_trigger_repair() {
        assert!(Diagnostic::new(Layer::L2Cpt, Severity::Warning, "missing", "x", "").triggers_repair);
        assert!(!Diagnostic::new(Layer::L2Opt, Severity::Info, "uncertain", "x", "").triggers_repair);
        assert!(!Diagnostic::new(Layer::L1, Severity::Fatal, "infeasible", "x", "").triggers_repair);
    }

    #[test]
    fn report_status_follows_severities() {
        let info = Diagnostic::new(Layer::L2Cpt, Severity::Info, "uncertain", "a", "");
        let warn = Diagnostic::new(Layer::L2Cpt, Severity::Warning, "missing", "b", "");
        let fatal = Diagnostic::new(Layer::L1, Severity::Fatal, "crash", "c", "");
        assert_eq!(VerificationReport::new(vec![info.clone()], Some(1.0)).status, ReportStatus::Verified);
        assert_eq!(VerificationReport::new(vec![info.clone(), warn.clone()], Some(1.0)).status, ReportStatus::NeedsRepair);
        assert_eq!(VerificationReport::new(vec![warn, fatal], None).status, ReportStatus::Failed);
    }

    #[test]
    fn evidence_mentions_ratio() {
        let e = perturbation_evidence("capacity_limit", 0.001, 0.003, Severity::Warning);
        assert_eq!(e, "`capacity_limit`: perturbation ×0.001 caused only 0.3% objective change");
    }

    #[test]
    fn serialized_names_are_stable() {
        let d = Diagnostic::new(Layer::L2Opt, Severity::Warning, "missing_term", "t", "e");
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["layer"], "L2_OPT");
        assert_eq!(v["severity"], "Warning");
    }

    fn rank(s: Severity) -> u8 {
        match s {
            Severity::Warning => 0,
            Severity::Info => 1,
            Severity::Pass => 2,
            Severity::Fatal => unreachable!(),
        }
    }

    proptest! {
        #[test]
        fn classifier_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let th = Thresholds::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(rank(classify_change_ratio(lo, false, th)) <= rank(classify_change_ratio(hi, false, th)));
        }
    }
}
