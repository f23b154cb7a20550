//! Semantic checks by perturbation: a constraint or objective term that is
//! present should move the objective when its parameter is scaled hard.

pub mod extract;
pub mod perturb;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::{
    change_ratio, classify_change_ratio, perturbation_evidence, Diagnostic, Layer, Severity, Thresholds,
};
use crate::llm::LlmClient;
use crate::runtime::{CandidateProgram, DataMode, ExecutionOutcome, ExitKind, Runtime, RuntimeError};
use crate::solver::SolveStatus;

pub use extract::{
    CandidateConstraint, CandidateObjectiveTerm, ConstraintType, ExtractionError, TermRole,
};

/// Scale factors for the constraint test, by constraint type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFactors {
    pub capacity: f64,
    pub demand: f64,
    pub other: f64,
}

impl Default for ConstraintFactors {
    fn default() -> Self {
        ConstraintFactors {
            capacity: 0.001,
            demand: 100.0,
            other: 0.01,
        }
    }
}

impl ConstraintFactors {
    pub fn factor(&self, ctype: ConstraintType) -> f64 {
        match ctype {
            ConstraintType::Capacity => self.capacity,
            ConstraintType::Demand => self.demand,
            ConstraintType::Balance | ConstraintType::Other => self.other,
        }
    }
}

/// Scale factors for the objective test, by term role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermFactors {
    pub cost: f64,
    pub revenue: f64,
    pub other: f64,
}

impl Default for TermFactors {
    fn default() -> Self {
        TermFactors {
            cost: 0.001,
            revenue: 100.0,
            other: 0.01,
        }
    }
}

impl TermFactors {
    pub fn factor(&self, role: TermRole) -> f64 {
        match role {
            TermRole::Cost => self.cost,
            TermRole::Revenue => self.revenue,
            TermRole::Other => self.other,
        }
    }
}

/// Per-test thresholds and candidate cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresenceTest {
    pub thresholds: Thresholds,
    pub max_candidates: usize,
}

impl Default for PresenceTest {
    fn default() -> Self {
        PresenceTest {
            thresholds: Thresholds::default(),
            max_candidates: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Config {
    pub cpt: PresenceTest,
    pub opt: PresenceTest,
    pub timeout_s: f64,
    /// A record perturbation moving the objective less than this also tries
    /// the candidate's literals.
    pub hybrid_threshold: f64,
    pub constraint_factors: ConstraintFactors,
    pub term_factors: TermFactors,
    /// Perturbation runs executed concurrently.
    pub workers: usize,
}

impl Default for L2Config {
    fn default() -> Self {
        L2Config {
            cpt: PresenceTest::default(),
            opt: PresenceTest::default(),
            timeout_s: 60.0,
            hybrid_threshold: 0.01,
            constraint_factors: ConstraintFactors::default(),
            term_factors: TermFactors::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("parameter `{0}` not found in data record or source literals")]
    ParameterNotFound(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DataRecord,
    SourceLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub strategy: Strategy,
    pub outcome: ExecutionOutcome,
}

impl Perturbation {
    fn objective(&self) -> Option<f64> {
        match self.outcome_status()? {
            SolveStatus::Optimal | SolveStatus::TimeLimit => self.outcome.objective,
            _ => None,
        }
    }

    fn infeasible(&self) -> bool {
        self.outcome_status() == Some(SolveStatus::Infeasible)
    }

    fn outcome_status(&self) -> Option<SolveStatus> {
        (self.outcome.exit_kind == ExitKind::Completed)
            .then_some(self.outcome.status_code)
            .flatten()
            .map(SolveStatus::from_code)
    }
}

/// What the perturbation runs see: the program, its record and the L1 objective.
#[derive(Clone, Copy)]
pub struct L2Subject<'a> {
    pub runtime: &'a Runtime,
    pub program: &'a CandidateProgram,
    pub data: Option<&'a Value>,
    pub baseline: f64,
}

impl L2Subject<'_> {
    /// Top-level record keys, as listed in the extraction prompts.
    pub fn data_keys(&self) -> Vec<String> {
        self.data
            .and_then(Value::as_object)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn run(&self, program: &CandidateProgram, data: Option<&Value>, cfg: &L2Config) -> Result<ExecutionOutcome, RuntimeError> {
        self.runtime.execute(program, data, Duration::from_secs_f64(cfg.timeout_s))
    }

    fn locatable(&self, key: &str) -> bool {
        let in_record = self.data.is_some_and(|d| perturb::perturb_record(d, key, 2.0).is_some());
        in_record || perturb::perturb_source(&self.program.source, key, 2.0).is_some()
    }
}

/// Scale `key` by `factor` and rerun: the record first, then the source
/// literals when the record is absent or barely moved the objective.
pub fn perturb_parameter(
    subject: &L2Subject<'_>,
    key: &str,
    factor: f64,
    cfg: &L2Config,
) -> Result<Perturbation, PerturbError> {
    let mut record_run = None;
    if subject.program.data_mode == DataMode::ExternalDict {
        if let Some(perturbed) = subject.data.and_then(|d| perturb::perturb_record(d, key, factor)) {
            let outcome = subject.run(subject.program, Some(&perturbed), cfg)?;
            let run = Perturbation {
                strategy: Strategy::DataRecord,
                outcome,
            };
            let weak = run
                .objective()
                .is_some_and(|z| change_ratio(z, subject.baseline) < cfg.hybrid_threshold);
            if !weak {
                return Ok(run);
            }
            record_run = Some(run);
        }
    }
    if let Some(source) = perturb::perturb_source(&subject.program.source, key, factor) {
        let program = CandidateProgram {
            source,
            data_mode: subject.program.data_mode,
        };
        let outcome = subject.run(&program, subject.data, cfg)?;
        let literal_run = Perturbation {
            strategy: Strategy::SourceLiteral,
            outcome,
        };
        // Keep whichever route actually moved the objective.
        return Ok(match record_run {
            Some(r) if literal_run.objective().is_none() && !literal_run.infeasible() => r,
            _ => literal_run,
        });
    }
    record_run.ok_or_else(|| PerturbError::ParameterNotFound(key.to_string()))
}

/// Which test a candidate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Test {
    Constraint,
    Objective,
}

impl Test {
    fn layer(self) -> Layer {
        match self {
            Test::Constraint => Layer::L2Cpt,
            Test::Objective => Layer::L2Opt,
        }
    }

    fn settings(self, cfg: &L2Config) -> &PresenceTest {
        match self {
            Test::Constraint => &cfg.cpt,
            Test::Objective => &cfg.opt,
        }
    }

    fn issue(self, severity: Severity) -> &'static str {
        match (self, severity) {
            (Test::Constraint, Severity::Warning) => "missing_constraint",
            (Test::Constraint, Severity::Info) => "uncertain_constraint",
            (Test::Constraint, _) => "constraint_present",
            (Test::Objective, Severity::Warning) => "missing_objective_term",
            (Test::Objective, Severity::Info) => "uncertain_objective_term",
            (Test::Objective, _) => "objective_term_present",
        }
    }
}

/// One candidate's parameter choice and factor, resolved before running.
struct Probe<'c> {
    description: &'c str,
    parameters: &'c [String],
    factor: f64,
}

fn test_one(subject: &L2Subject<'_>, probe: &Probe<'_>, test: Test, cfg: &L2Config) -> Option<Diagnostic> {
    let layer = test.layer();
    let info = |issue: &str, evidence: String| Some(Diagnostic::new(layer, Severity::Info, issue, probe.description, evidence));

    // Only the first locatable parameter is scaled: scaling a capacity and
    // its usage rate together would cancel out.
    let Some(key) = probe.parameters.iter().find(|k| subject.locatable(k)) else {
        return info(
            "parameter_not_found",
            format!("none of {:?} is present in the data record or source", probe.parameters),
        );
    };
    let run = match perturb_parameter(subject, key, probe.factor, cfg) {
        Ok(run) => run,
        Err(e) => return info("perturbation_inconclusive", format!("`{key}`: {e}")),
    };
    if run.infeasible() {
        return match test {
            Test::Constraint => Some(Diagnostic::new(
                layer,
                Severity::Pass,
                test.issue(Severity::Pass),
                probe.description,
                format!("`{key}`: perturbation ×{} made the model infeasible", probe.factor),
            )),
            // A cost scaling cannot make a model infeasible, so there is nothing to judge.
            Test::Objective => None,
        };
    }
    let Some(objective) = run.objective() else {
        let why = match run.outcome.exit_kind {
            ExitKind::Timeout => "perturbed run timed out".to_string(),
            ExitKind::Crash => format!("perturbed run crashed: {}", run.outcome.stderr_excerpt(300)),
            ExitKind::Completed => format!("perturbed run reported status {:?}", run.outcome.status_code),
        };
        return info("perturbation_inconclusive", format!("`{key}`: {why}"));
    };
    let ratio = change_ratio(objective, subject.baseline);
    let severity = classify_change_ratio(ratio, false, test.settings(cfg).thresholds);
    Some(Diagnostic::new(
        layer,
        severity,
        test.issue(severity),
        probe.description,
        perturbation_evidence(key, probe.factor, ratio, severity),
    ))
}

fn run_all(subject: &L2Subject<'_>, probes: &[Probe<'_>], test: Test, cfg: &L2Config) -> Vec<Diagnostic> {
    let workers = cfg.workers.max(1).min(probes.len().max(1));
    if workers == 1 {
        return probes.iter().filter_map(|p| test_one(subject, p, test, cfg)).collect();
    }
    let chunk = probes.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = probes
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|p| test_one(subject, p, test, cfg)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("perturbation worker panicked"))
            .flatten()
            .collect()
    })
}

/// Constraint presence test over extracted candidates.
pub fn constraint_test(subject: &L2Subject<'_>, candidates: &[CandidateConstraint], cfg: &L2Config) -> Vec<Diagnostic> {
    let probes: Vec<Probe<'_>> = candidates
        .iter()
        .take(cfg.cpt.max_candidates)
        .map(|c| Probe {
            description: &c.description,
            parameters: &c.parameters,
            factor: cfg.constraint_factors.factor(c.ctype),
        })
        .collect();
    run_all(subject, &probes, Test::Constraint, cfg)
}

/// Objective term presence test over extracted candidates.
pub fn objective_test(subject: &L2Subject<'_>, candidates: &[CandidateObjectiveTerm], cfg: &L2Config) -> Vec<Diagnostic> {
    let probes: Vec<Probe<'_>> = candidates
        .iter()
        .take(cfg.opt.max_candidates)
        .map(|c| Probe {
            description: &c.description,
            parameters: &c.parameters,
            factor: cfg.term_factors.factor(c.role),
        })
        .collect();
    run_all(subject, &probes, Test::Objective, cfg)
}

/// Prompt and reply of one extraction call, kept for the run log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionExchange {
    pub layer: Layer,
    pub prompt: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct L2Result {
    pub diagnostics: Vec<Diagnostic>,
    pub exchanges: Vec<ExtractionExchange>,
}

/// Extract candidates with the LLM and run both tests. Extraction failures
/// become Info notes; nothing here is Fatal.
pub fn l2_verify(subject: &L2Subject<'_>, problem: &str, llm: &dyn LlmClient, cfg: &L2Config) -> L2Result {
    let keys = subject.data_keys();
    let mut result = L2Result::default();
    let note = |layer: Layer, e: ExtractionError| {
        Diagnostic::new(layer, Severity::Info, "extraction_failed", "candidates", e.to_string())
    };

    match extract::extract_constraints(problem, &keys, llm, cfg.cpt.max_candidates) {
        Ok((candidates, prompt, reply)) => {
            result.exchanges.push(ExtractionExchange {
                layer: Layer::L2Cpt,
                prompt,
                reply,
            });
            result.diagnostics.extend(constraint_test(subject, &candidates, cfg));
        }
        Err(e) => result.diagnostics.push(note(Layer::L2Cpt, e)),
    }
    match extract::extract_objective_terms(problem, &keys, llm, cfg.opt.max_candidates) {
        Ok((candidates, prompt, reply)) => {
            result.exchanges.push(ExtractionExchange {
                layer: Layer::L2Opt,
                prompt,
                reply,
            });
            result.diagnostics.extend(objective_test(subject, &candidates, cfg));
        }
        Err(e) => result.diagnostics.push(note(Layer::L2Opt, e)),
    }
    result
}
