//! Blocking execution checks and the regeneration prompt.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{Diagnostic, Layer, Severity};
use crate::runtime::{CandidateProgram, DataMode, ExecutionOutcome, ExitKind, Runtime, RuntimeError};
use crate::solver::{self, Backend, ModelSpec, SolveParams, SolveStatus};

pub const REGENERATION_SYSTEM: &str =
    "You fix broken optimization code. Ensure the new code is syntactically correct and handles all edge cases.";

const STDERR_EXCERPT: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    pub timeout_s: f64,
    pub duality_gap_threshold: f64,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            timeout_s: 60.0,
            duality_gap_threshold: 0.01,
        }
    }
}

/// A rebuildable model standing behind the candidate, used to explain
/// infeasible or unbounded outcomes by name.
#[derive(Clone, Copy)]
pub struct ModelProbe<'a> {
    pub model: &'a ModelSpec,
    pub backend: &'a dyn Backend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum L1Status {
    Pass,
    Fatal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Result {
    pub status: L1Status,
    pub objective: Option<f64>,
    pub solver_status: Option<SolveStatus>,
    pub diagnostics: Vec<Diagnostic>,
    /// Absent when the syntax check stopped the run.
    pub outcome: Option<ExecutionOutcome>,
}

impl L1Result {
    pub fn passed(&self) -> bool {
        self.status == L1Status::Pass
    }

    /// Text for the regeneration prompt's error section.
    pub fn error_message(&self) -> String {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Fatal)
            .map(|d| format!("[{}] {}: {}", d.severity, d.issue_type, d.evidence))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn fatal(diag: Diagnostic, outcome: Option<ExecutionOutcome>, solver_status: Option<SolveStatus>) -> Self {
        L1Result {
            status: L1Status::Fatal,
            objective: None,
            solver_status,
            diagnostics: vec![diag],
            outcome,
        }
    }
}

fn fatal(issue: &str, target: &str, evidence: impl Into<String>) -> Diagnostic {
    Diagnostic::new(Layer::L1, Severity::Fatal, issue, target, evidence)
}

/// Syntax, execution, solver status and duality checks, in that order.
pub fn l1_verify(
    runtime: &Runtime,
    program: &CandidateProgram,
    data: Option<&Value>,
    cfg: &L1Config,
    probe: Option<ModelProbe<'_>>,
    artifacts: Option<&Path>,
) -> Result<L1Result, RuntimeError> {
    if let Err(msg) = runtime.syntax_check(&program.source)? {
        return Ok(L1Result::fatal(fatal("syntax", "source", format!("SyntaxError {msg}")), None, None));
    }

    let outcome = runtime.execute_logged(program, data, Duration::from_secs_f64(cfg.timeout_s), artifacts)?;
    match outcome.exit_kind {
        ExitKind::Timeout => {
            let d = fatal(
                "timeout",
                "execution",
                format!("execution exceeded {} s\n{}", cfg.timeout_s, outcome.stderr_excerpt(STDERR_EXCERPT)),
            );
            return Ok(L1Result::fatal(d, Some(outcome), None));
        }
        ExitKind::Crash => {
            let d = fatal("runtime_error", "execution", outcome.stderr_excerpt(STDERR_EXCERPT));
            return Ok(L1Result::fatal(d, Some(outcome), None));
        }
        ExitKind::Completed => {}
    }

    let Some(code) = outcome.status_code else {
        let d = fatal("output_contract", "stdout", "no `status: <int>` line was printed");
        return Ok(L1Result::fatal(d, Some(outcome), None));
    };
    let status = SolveStatus::from_code(code);
    match status {
        SolveStatus::Infeasible => {
            let d = explain_infeasible(code, probe);
            Ok(L1Result::fatal(d, Some(outcome), Some(status)))
        }
        SolveStatus::Unbounded => {
            let d = explain_unbounded(probe);
            Ok(L1Result::fatal(d, Some(outcome), Some(status)))
        }
        SolveStatus::Error => {
            let d = fatal("solver_status", "status", format!("solver finished with status code {code}"));
            Ok(L1Result::fatal(d, Some(outcome), Some(status)))
        }
        SolveStatus::Optimal | SolveStatus::TimeLimit => {
            let Some(objective) = outcome.objective else {
                let d = fatal("output_contract", "stdout", format!("status {code} but no `objective: <float>` line"));
                return Ok(L1Result::fatal(d, Some(outcome), Some(status)));
            };
            let mut diagnostics = Vec::new();
            if status == SolveStatus::TimeLimit {
                diagnostics.push(Diagnostic::new(
                    Layer::L1,
                    Severity::Info,
                    "time_limit",
                    "solver",
                    "solver stopped at its time limit; objective is the best incumbent",
                ));
            }
            if let Some(gap) = outcome.gap.filter(|g| *g > cfg.duality_gap_threshold) {
                diagnostics.push(Diagnostic::new(
                    Layer::L1,
                    Severity::Info,
                    "duality_gap",
                    "solver",
                    format!("primal-dual gap {:.2}% exceeds {:.0}%", gap * 100.0, cfg.duality_gap_threshold * 100.0),
                ));
            }
            Ok(L1Result {
                status: L1Status::Pass,
                objective: Some(objective),
                solver_status: Some(status),
                diagnostics,
                outcome: Some(outcome),
            })
        }
    }
}

fn explain_infeasible(code: i64, probe: Option<ModelProbe<'_>>) -> Diagnostic {
    let iis = probe.and_then(|p| solver::compute_iis(p.backend, p.model, &SolveParams::default()).ok());
    match iis {
        Some(names) if !names.is_empty() => fatal(
            "infeasible",
            &names.join(", "),
            format!("model is infeasible; irreducible conflicting constraints: {}", names.join(", ")),
        ),
        _ => fatal("infeasible", "model", format!("solver reported infeasible (status {code})")),
    }
}

fn explain_unbounded(probe: Option<ModelProbe<'_>>) -> Diagnostic {
    let ray = probe.and_then(|p| solver::unbounded_ray(p.backend, p.model, &SolveParams::default()).ok());
    match ray {
        Some(vars) if !vars.is_empty() => fatal(
            "unbounded",
            &vars.join(", "),
            format!("objective is unbounded along variables: {}", vars.join(", ")),
        ),
        _ => fatal("unbounded", "model", "solver reported an unbounded objective"),
    }
}

/// Mode-dependent `{data_instructions}` block.
pub fn data_instructions(mode: DataMode, schema: Option<&str>) -> String {
    match mode {
        DataMode::ExternalDict => format!(
            "## Data Structure\nThe `data` variable is PRE-DEFINED with these keys:\n{}\n**CRITICAL**: Do NOT create `data = {{...}}`. Just use `data[\"key\"]` directly.",
            schema.unwrap_or("").trim_end()
        ),
        DataMode::SelfContained => {
            "## Note\nCode is self-contained -- all data is defined within the code itself.".to_string()
        }
    }
}

pub fn build_regeneration_prompt(
    problem: &str,
    failed_code: &str,
    error: &str,
    mode: DataMode,
    schema: Option<&str>,
) -> String {
    format!(
        "The previous code failed to execute. Generate a new, correct version.

## Problem
{problem}

## Previous Code (FAILED)
```python
{code}
```

## Error
{error}

{instructions}

## Instructions
1. Analyze why the previous code failed
2. Generate completely new code that avoids the error
3. Handle edge cases (empty arrays, division by zero)

Return ONLY the corrected Python code in a ```python block.
",
        code = failed_code.trim_end(),
        instructions = data_instructions(mode, schema),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{HighsBackend, ObjectiveSense, RowSense};

    fn run(src: &str, probe: Option<ModelProbe<'_>>) -> L1Result {
        let program = CandidateProgram::self_contained(src);
        l1_verify(&Runtime::default(), &program, None, &L1Config::default(), probe, None).unwrap()
    }

    #[test]
    fn syntax_error_is_fatal_without_running() {
        let r = run("print('status: 2'\n", None);
        assert_eq!(r.status, L1Status::Fatal);
        assert_eq!(r.diagnostics[0].issue_type, "syntax");
        assert!(r.outcome.is_none());
    }

    #[test]
    fn optimal_run_records_objective_exactly() {
        let r = run("print('status: 2')\nprint('objective: 17')\n", None);
        assert!(r.passed());
        assert_eq!(r.objective, Some(17.0));
        assert!(r.diagnostics.iter().all(|d| d.severity != Severity::Fatal));
    }

    #[test]
    fn infeasible_names_iis_constraints() {
        let mut m = ModelSpec::new(ObjectiveSense::Minimize);
        let x = m.continuous("x");
        m.variables[x.0].lower = f64::NEG_INFINITY;
        m.add_constraint("x_at_least_1", vec![(x, 1.0)], RowSense::Ge, 1.0);
        m.add_constraint("x_at_most_0", vec![(x, 1.0)], RowSense::Le, 0.0);
        let probe = ModelProbe {
            model: &m,
            backend: &HighsBackend,
        };
        let r = run("print('status: 3')\n", Some(probe));
        assert_eq!(r.status, L1Status::Fatal);
        let d = &r.diagnostics[0];
        assert!(d.evidence.contains("x_at_least_1") && d.evidence.contains("x_at_most_0"), "{}", d.evidence);
        let plain = run("print('status: 3')\n", None);
        assert_eq!(plain.diagnostics[0].target, "model");
    }

    #[test]
    fn unbounded_names_ray_variables() {
        let mut m = ModelSpec::new(ObjectiveSense::Maximize);
        let x = m.continuous("x");
        let y = m.continuous("y");
        m.add_objective_term(x, 1.0);
        m.add_constraint("cap_y", vec![(y, 1.0)], RowSense::Le, 4.0);
        let probe = ModelProbe {
            model: &m,
            backend: &HighsBackend,
        };
        let r = run("print('status: 5')\n", Some(probe));
        assert_eq!(r.diagnostics[0].issue_type, "unbounded");
        assert_eq!(r.diagnostics[0].target, "x");
    }

    #[test]
    fn crash_and_missing_lines_are_fatal() {
        let r = run("raise RuntimeError('boom')\n", None);
        assert_eq!(r.diagnostics[0].issue_type, "runtime_error");
        assert!(r.diagnostics[0].evidence.contains("boom"));
        let r = run("print('hello')\n", None);
        assert_eq!(r.diagnostics[0].issue_type, "output_contract");
        let r = run("print('status: 2')\n", None);
        assert_eq!(r.status, L1Status::Fatal);
    }

    #[test]
    fn large_gap_is_info_only() {
        let r = run("print('status: 2')\nprint('objective: 5')\nprint('gap: 0.05')\n", None);
        assert!(r.passed());
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].severity, Severity::Info);
        assert!(!r.diagnostics[0].triggers_repair);
    }

    #[test]
    fn regeneration_prompt_modes() {
        let ext = build_regeneration_prompt("P", "code", "err", DataMode::ExternalDict, Some("- capacity: int"));
        assert!(ext.contains("PRE-DEFINED with these keys"));
        assert!(ext.contains("Do NOT create `data = {...}`"));
        let own = build_regeneration_prompt("P", "code", "err", DataMode::SelfContained, None);
        assert!(own.contains("all data is defined within the code itself"));
        assert!(own.contains("## Previous Code (FAILED)\n```python\ncode\n```\n\n## Error\nerr\n"));
    }
}
