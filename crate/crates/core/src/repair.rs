//! Targeted repair of Warning diagnostics, guarded by a safety validator and
//! a regression rollback.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::{
    change_ratio, status_of, Diagnostic, ReportStatus, Severity, Thresholds, VerificationReport, SMALL_OBJECTIVE,
};
use crate::l1::{data_instructions, l1_verify, L1Config, L1Result, L1Status, ModelProbe};
use crate::l2::{l2_verify, ExtractionExchange, L2Config, L2Subject};
use crate::llm::{extract_code, LlmClient};
use crate::runtime::{CandidateProgram, DataMode, Runtime, RuntimeError};
use crate::solver::SolveStatus;

pub const REPAIR_SYSTEM: &str = "You are an optimization code repair expert.";

const BOX_RULE: &str = "+-----------------------------------------------------------------+";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Repair calls that consume budget; safety retries come on top.
    pub max_iterations: usize,
    pub regression_threshold: f64,
    /// Objective difference still counted as "unchanged".
    pub plateau_tolerance: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_iterations: 3,
            regression_threshold: 0.04,
            plateau_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RepairConfigError {
    #[error("regression threshold {regression} must be below the warning threshold {warning}")]
    ThresholdOrder { regression: f64, warning: f64 },
    #[error("regression threshold must be positive, got {0}")]
    NonPositive(f64),
}

impl RepairConfig {
    /// The rollback guard has to be more sensitive than the Warning band.
    pub fn validate(&self, thresholds: &Thresholds) -> Result<(), RepairConfigError> {
        if self.regression_threshold.is_nan() || self.regression_threshold <= 0.0 {
            return Err(RepairConfigError::NonPositive(self.regression_threshold));
        }
        if self.regression_threshold >= thresholds.low {
            return Err(RepairConfigError::ThresholdOrder {
                regression: self.regression_threshold,
                warning: thresholds.low,
            });
        }
        Ok(())
    }
}

/// Shortest round-trip float text with a trailing `.0` for integers, as
/// Python prints floats.
pub fn python_float(value: f64) -> String {
    if value.is_finite() && value.fract() == 0.0 && value.abs() < 1e16 {
        format!("{value:.1}")
    } else {
        format!("{value}")
    }
}

fn boxed_line(text: &str) -> String {
    let inner = BOX_RULE.len() - 4;
    format!("| {text:<inner$} |")
}

fn safety_rules(mode: DataMode) -> &'static str {
    match mode {
        DataMode::ExternalDict => {
            "## SAFETY RULES
- Do NOT redefine `data` (no `data = {...}`); it is already loaded
- Do NOT use json.loads() to rebuild the data
- Do NOT modify data contents (no `data[\"key\"] = value`)
- Do NOT import os or subprocess"
        }
        DataMode::SelfContained => {
            "## SAFETY RULES
- Do NOT remove or change hardcoded data values unless the diagnostic
  evidence specifically requires it
- Do NOT import os or subprocess"
        }
    }
}

/// Assemble the repair request from a report's diagnostics.
pub fn build_repair_prompt(
    problem: &str,
    code: &str,
    objective: f64,
    actionable: &[&Diagnostic],
    reference_only: &[&Diagnostic],
    mode: DataMode,
    schema: Option<&str>,
) -> String {
    let mut out = String::new();
    out.push_str(
        "CRITICAL RULES:
1. ONLY fix the actionable issues listed in the ISSUES DETECTED
   section
2. Items in REFERENCE ONLY are for context -- DO NOT modify code
   based on them
3. Be conservative -- only make changes that are clearly necessary
4. Preserve all working code -- only change what is broken
5. Do NOT change hardcoded data values unless the diagnostic
   evidence specifically requires it

Fix this optimization code based on the behavioral verification
report.

",
    );
    out.push_str(&format!("## Problem\n{}\n\n", problem.trim_end()));
    out.push_str(&data_instructions(mode, schema));
    out.push_str(&format!(
        "\n\n## Current Code\n```python\n{}\n```\n\n## Current objective value: {}\n\n",
        code.trim_end(),
        python_float(objective)
    ));
    out.push_str(&format!("---\n## ISSUES DETECTED ({} actionable)\n\n", actionable.len()));
    for (i, d) in actionable.iter().enumerate() {
        out.push_str(&format!(
            "=== Issue {} [{}] [{}] ===\nType: {}\nTarget: {}\nEvidence: {}\n\n",
            i + 1,
            d.layer,
            d.severity,
            d.issue_type,
            d.target,
            d.evidence
        ));
    }
    if !reference_only.is_empty() {
        out.push_str("---\n## REFERENCE ONLY (DO NOT FIX)\n\n");
        out.push_str(&format!(
            "{BOX_RULE}\n{}\n{BOX_RULE}\n\n",
            boxed_line("Below items are NORMAL in 80% of cases")
        ));
        for (i, d) in reference_only.iter().enumerate() {
            out.push_str(&format!(
                "{}. [{}] {} -- {}\n   {}\n   Action: DO NOT FIX (unless 100% certain)\n\n",
                i + 1,
                d.layer,
                d.issue_type,
                d.target,
                d.evidence
            ));
        }
    }
    out.push_str(
        "---
## REPAIR INSTRUCTIONS

1. Read each Issue carefully, especially the Evidence field
2. Identify the root cause in your code for each actionable issue
3. Fix ALL actionable issues above
4. DO NOT fix items in the REFERENCE section -- they are likely
   normal
5. Preserve all working code -- only change what is broken

",
    );
    out.push_str(safety_rules(mode));
    out.push_str("\n\nReturn the COMPLETE fixed code in a ```python block.\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DataReassignment,
    DataMutation,
    DangerousImport,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub line: usize,
    pub detail: String,
}

/// Syntax-tree walk; prints one `kind<TAB>line<TAB>detail` row per finding.
const SAFETY_WALK: &str = r#"import ast, sys
BLOCKED = {"os", "subprocess", "pty"}
MUTATORS = {"update", "pop", "popitem", "setdefault", "clear", "__setitem__", "__delitem__"}
try:
    tree = ast.parse(sys.stdin.read())
except SyntaxError:
    sys.exit(0)
check_data = sys.argv[1] == "1"
def root(node):
    while isinstance(node, (ast.Subscript, ast.Attribute)):
        node = node.value
    return node.id if isinstance(node, ast.Name) else None
def literal_record(value):
    if isinstance(value, (ast.Dict, ast.DictComp)):
        return True
    return isinstance(value, ast.Call) and isinstance(value.func, ast.Name) and value.func.id == "dict"
def report(kind, node, detail):
    print(f"{kind}\t{node.lineno}\t{detail}")
for node in ast.walk(tree):
    if isinstance(node, ast.Import):
        for alias in node.names:
            if alias.name.split(".")[0] in BLOCKED:
                report("dangerous_import", node, f"import {alias.name}")
    elif isinstance(node, ast.ImportFrom):
        if node.module and node.module.split(".")[0] in BLOCKED:
            report("dangerous_import", node, f"from {node.module} import")
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "__import__":
        if node.args and isinstance(node.args[0], ast.Constant) and str(node.args[0].value).split(".")[0] in BLOCKED:
            report("dangerous_import", node, f"__import__({node.args[0].value!r})")
    if not check_data:
        continue
    if isinstance(node, (ast.Assign, ast.AnnAssign, ast.AugAssign)):
        targets = node.targets if isinstance(node, ast.Assign) else [node.target]
        for t in targets:
            if isinstance(t, ast.Name) and t.id == "data":
                if isinstance(node, ast.AugAssign):
                    report("data_mutation", node, "augmented assignment to data")
                elif node.value is not None and literal_record(node.value):
                    report("data_reassignment", node, "data rebound to a literal record")
            elif isinstance(t, (ast.Subscript, ast.Attribute)) and root(t) == "data":
                report("data_mutation", node, "assignment into data")
    elif isinstance(node, ast.Delete):
        for t in node.targets:
            if isinstance(t, (ast.Subscript, ast.Attribute)) and root(t) == "data":
                report("data_mutation", node, "deletion from data")
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Attribute):
        if node.func.attr in MUTATORS and root(node.func.value) == "data":
            report("data_mutation", node, f"data mutated via .{node.func.attr}()")
"#;

struct Pattern {
    kind: ViolationKind,
    regex: Regex,
    detail: &'static str,
    data_only: bool,
}

fn patterns() -> &'static [Pattern] {
    static CELL: std::sync::OnceLock<Vec<Pattern>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let p = |kind, re: &str, detail, data_only| Pattern {
            kind,
            regex: Regex::new(re).expect("static pattern"),
            detail,
            data_only,
        };
        vec![
            p(ViolationKind::DataReassignment, r"^\s*data\s*=\s*(\{|dict\s*\()", "data rebound to a literal record", true),
            p(ViolationKind::DataMutation, r"^\s*data\s*(\[[^\]]*\]|\.\w+)+\s*(=[^=]|[-+*/]=)", "assignment into data", true),
            p(ViolationKind::DataMutation, r"^\s*data\s*\+=", "augmented assignment to data", true),
            p(ViolationKind::DangerousImport, r"^\s*import\s+(os|subprocess|pty)\b", "import of a blocked module", false),
            p(ViolationKind::DangerousImport, r"^\s*from\s+(os|subprocess|pty)\b", "import from a blocked module", false),
        ]
    })
}

fn pattern_violations(source: &str, mode: DataMode) -> Vec<Violation> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        for p in patterns() {
            if p.data_only && mode != DataMode::ExternalDict {
                continue;
            }
            if p.regex.is_match(line) {
                out.push(Violation {
                    kind: p.kind,
                    line: idx + 1,
                    detail: p.detail.to_string(),
                });
            }
        }
    }
    out
}

fn tree_violations(runtime: &Runtime, source: &str, mode: DataMode) -> Result<Vec<Violation>, RuntimeError> {
    let flag = if mode == DataMode::ExternalDict { "1" } else { "0" };
    let script = format!("import sys\nsys.argv = ['safety', '{flag}']\n{SAFETY_WALK}");
    let out = runtime.run_helper(&script, source)?;
    let text = String::from_utf8_lossy(&out.stdout);
    Ok(text
        .lines()
        .filter_map(|row| {
            let mut cols = row.splitn(3, '\t');
            let kind = match cols.next()? {
                "data_reassignment" => ViolationKind::DataReassignment,
                "data_mutation" => ViolationKind::DataMutation,
                "dangerous_import" => ViolationKind::DangerousImport,
                _ => return None,
            };
            let line = cols.next()?.parse().ok()?;
            Some(Violation {
                kind,
                line,
                detail: cols.next().unwrap_or_default().to_string(),
            })
        })
        .collect())
}

/// Pattern rules plus a syntax-tree walk; one violation per (kind, line).
/// Data rules apply only when the record is injected.
pub fn safety_check(runtime: &Runtime, source: &str, mode: DataMode) -> Vec<Violation> {
    let mut found = pattern_violations(source, mode);
    match tree_violations(runtime, source, mode) {
        Ok(v) => found.extend(v),
        Err(e) => log::warn!("safety syntax-tree walk unavailable: {e}"),
    }
    found.sort();
    found.dedup_by(|a, b| a.kind == b.kind && a.line == b.line);
    found
}

/// Violation block prepended to the guided retry.
pub fn safety_retry_prompt(violations: &[Violation], original_prompt: &str) -> String {
    let mut out = String::from("## SAFETY VIOLATIONS IN YOUR PREVIOUS REPAIR\nYour previous fix was rejected:\n");
    for v in violations {
        out.push_str(&format!("- line {}: {} ({:?})\n", v.line, v.detail, v.kind));
    }
    out.push_str("Produce the fix again without any of these operations.\n\n");
    out.push_str(original_prompt);
    out
}

/// True when the repaired solve must be discarded.
pub fn regression_check(
    new_objective: Option<f64>,
    new_status: L1Status,
    old_objective: f64,
    old_status: L1Status,
    threshold: f64,
) -> bool {
    if old_status == L1Status::Pass && new_status != L1Status::Pass {
        return true;
    }
    match new_objective {
        None => true,
        Some(z) => {
            let delta = if old_objective.abs() < SMALL_OBJECTIVE {
                (z - old_objective).abs()
            } else {
                change_ratio(z, old_objective)
            };
            delta.is_nan() || delta > threshold
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairDecision {
    /// No Warning left; nothing to repair.
    Verified,
    Adopted,
    /// The repair (and its guided retry) failed validation; code kept.
    SafetyRejected,
    /// The reply carried no code block; code kept.
    NoCode,
    IdenticalCode,
    Plateau,
    RolledBack,
    LlmFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Summary {
    pub status: L1Status,
    pub solver_status: Option<SolveStatus>,
    pub objective: Option<f64>,
    pub fatal: Option<String>,
}

impl From<&L1Result> for L1Summary {
    fn from(r: &L1Result) -> Self {
        L1Summary {
            status: r.status,
            solver_status: r.solver_status,
            objective: r.objective,
            fatal: (!r.passed()).then(|| r.error_message()),
        }
    }
}

/// One line of the per-instance audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub iteration: usize,
    pub warnings: usize,
    pub prompt: Option<String>,
    pub reply: Option<String>,
    pub violations: Vec<Violation>,
    pub retry_prompt: Option<String>,
    pub retry_reply: Option<String>,
    pub retry_violations: Vec<Violation>,
    pub l1: Option<L1Summary>,
    pub decision: RepairDecision,
}

impl AuditEntry {
    fn new(iteration: usize, warnings: usize, decision: RepairDecision) -> Self {
        AuditEntry {
            iteration,
            warnings,
            prompt: None,
            reply: None,
            violations: Vec::new(),
            retry_prompt: None,
            retry_reply: None,
            retry_violations: Vec::new(),
            l1: None,
            decision,
        }
    }
}

/// Everything the loop needs besides the program under repair.
pub struct RepairContext<'a> {
    pub runtime: &'a Runtime,
    pub llm: &'a dyn LlmClient,
    pub problem: &'a str,
    pub data: Option<&'a Value>,
    pub schema: Option<&'a str>,
    pub l1: L1Config,
    pub l2: L2Config,
    pub repair: RepairConfig,
    pub probe: Option<ModelProbe<'a>>,
    /// Artifact directory for repair iteration `j` (1-based), if logging.
    pub artifacts: Option<&'a dyn Fn(usize) -> PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub program: CandidateProgram,
    pub objective: f64,
    pub status: ReportStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub audit: Vec<AuditEntry>,
    /// Budget-consuming repair calls made.
    pub repair_calls: usize,
    pub safety_retries: usize,
    pub extraction: Vec<ExtractionExchange>,
}

/// Pretty JSON with a trailing newline, as written to `report.json`.
pub fn report_json(report: &VerificationReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

fn write_text(dir: Option<&Path>, name: &str, text: &str) {
    if let Some(dir) = dir {
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), text)) {
            log::warn!("could not write {}: {e}", dir.join(name).display());
        }
    }
}

/// Repair until no Warning remains, the budget runs out, or a guard stops
/// the loop. The returned state is always one that passed L1: the baseline or
/// an adopted repair.
pub fn repair_loop(
    ctx: &RepairContext<'_>,
    program: CandidateProgram,
    objective: f64,
    report: VerificationReport,
) -> RepairOutcome {
    let mut state = RepairOutcome {
        program,
        objective,
        status: report.status,
        diagnostics: report.diagnostics,
        audit: Vec::new(),
        repair_calls: 0,
        safety_retries: 0,
        extraction: Vec::new(),
    };
    // True when `state.diagnostics` describe older code than `state.program`.
    let mut stale = false;

    for iteration in 1..=ctx.repair.max_iterations {
        if stale {
            refresh_report(ctx, &mut state);
            stale = false;
        }
        let warnings = state.diagnostics.iter().filter(|d| d.severity == Severity::Warning).count();
        if warnings == 0 {
            state.audit.push(AuditEntry::new(iteration, 0, RepairDecision::Verified));
            break;
        }
        let dir = ctx.artifacts.map(|f| f(iteration));
        let dir = dir.as_deref();

        let actionable: Vec<&Diagnostic> = state.diagnostics.iter().filter(|d| d.is_actionable()).collect();
        let reference: Vec<&Diagnostic> = state.diagnostics.iter().filter(|d| d.severity == Severity::Info).collect();
        let prompt = build_repair_prompt(
            ctx.problem,
            &state.program.source,
            state.objective,
            &actionable,
            &reference,
            state.program.data_mode,
            ctx.schema,
        );
        let mut entry = AuditEntry::new(iteration, warnings, RepairDecision::LlmFailed);
        entry.prompt = Some(prompt.clone());
        write_text(dir, "prompt.txt", &prompt);

        state.repair_calls += 1;
        let reply = match ctx.llm.complete(REPAIR_SYSTEM, &prompt) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("repair call failed, keeping best state: {e}");
                state.audit.push(entry);
                break;
            }
        };
        write_text(dir, "reply.txt", &reply);
        entry.reply = Some(reply.clone());

        let Some(mut code) = extract_code(&reply) else {
            entry.decision = RepairDecision::NoCode;
            state.audit.push(entry);
            continue;
        };
        entry.violations = safety_check(ctx.runtime, &code, state.program.data_mode);
        if !entry.violations.is_empty() {
            // The guided retry is free: it does not count against the budget.
            state.safety_retries += 1;
            let retry_prompt = safety_retry_prompt(&entry.violations, &prompt);
            entry.retry_prompt = Some(retry_prompt.clone());
            let retry = match ctx.llm.complete(REPAIR_SYSTEM, &retry_prompt) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("safety retry failed, keeping best state: {e}");
                    state.audit.push(entry);
                    break;
                }
            };
            entry.retry_reply = Some(retry.clone());
            let retried = extract_code(&retry);
            entry.retry_violations = retried
                .as_deref()
                .map(|c| safety_check(ctx.runtime, c, state.program.data_mode))
                .unwrap_or_default();
            match retried {
                Some(c) if entry.retry_violations.is_empty() => code = c,
                _ => {
                    entry.decision = RepairDecision::SafetyRejected;
                    state.audit.push(entry);
                    continue;
                }
            }
        }

        if code.trim() == state.program.source.trim() {
            entry.decision = RepairDecision::IdenticalCode;
            state.audit.push(entry);
            break;
        }

        let candidate = CandidateProgram {
            source: code,
            data_mode: state.program.data_mode,
        };
        let l1 = match l1_verify(ctx.runtime, &candidate, ctx.data, &ctx.l1, ctx.probe, dir) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("repaired program could not be run: {e}");
                entry.decision = RepairDecision::RolledBack;
                state.audit.push(entry);
                break;
            }
        };
        entry.l1 = Some(L1Summary::from(&l1));
        let l1_report = VerificationReport::new(l1.diagnostics.clone(), l1.objective);
        write_text(dir, "report.json", &report_json(&l1_report));
        if regression_check(l1.objective, l1.status, state.objective, L1Status::Pass, ctx.repair.regression_threshold) {
            entry.decision = RepairDecision::RolledBack;
            state.audit.push(entry);
            break;
        }
        let new_objective = l1.objective.expect("regression check guarantees an objective");
        if (new_objective - state.objective).abs() <= ctx.repair.plateau_tolerance {
            entry.decision = RepairDecision::Plateau;
            state.audit.push(entry);
            break;
        }
        entry.decision = RepairDecision::Adopted;
        state.audit.push(entry);
        state.program = candidate;
        state.objective = new_objective;
        stale = true;
    }
    if stale {
        refresh_report(ctx, &mut state);
    }
    state.status = status_of(&state.diagnostics);
    state
}

fn refresh_report(ctx: &RepairContext<'_>, state: &mut RepairOutcome) {
    let subject = L2Subject {
        runtime: ctx.runtime,
        program: &state.program,
        data: ctx.data,
        baseline: state.objective,
    };
    let l2 = l2_verify(&subject, ctx.problem, ctx.llm, &ctx.l2);
    state.diagnostics = l2.diagnostics;
    state.extraction.extend(l2.exchanges);
}
