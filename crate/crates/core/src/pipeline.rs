//! Per-instance driver: generation, L1 with regeneration, then L2 with
//! targeted repair, with every attempt logged under the run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bench::{ManifestEntry, PromptFormat};
use crate::config::PipelineConfig;
use crate::diagnostics::{Diagnostic, ReportStatus, VerificationReport};
use crate::l1::{build_regeneration_prompt, l1_verify, L1Result, REGENERATION_SYSTEM};
use crate::l2::{l2_verify, L2Subject};
use crate::llm::{describe_schema, extract_code, generate, generate_with_data, Exchange, GenerationError, LlmClient};
use crate::repair::{repair_loop, report_json, AuditEntry, RepairContext, RepairDecision};
use crate::runtime::{attempt_dir, CandidateProgram, Runtime, RuntimeError};
use crate::solver::SolveStatus;

pub const RESULT_FILE: &str = "result.json";
pub const AUDIT_FILE: &str = "audit.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One problem handed to the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceInput {
    pub name: String,
    pub problem: String,
    /// Known record for schema-based prompts; `None` means extraction-first.
    pub data: Option<Value>,
}

/// Read a generated suite (its `manifest.json`) in the requested format.
pub fn load_instances(dir: &Path, format: PromptFormat) -> Result<Vec<InstanceInput>, PipelineError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| PipelineError::Manifest {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;
    manifest
        .iter()
        .map(|entry| {
            let prompt_file = match format {
                PromptFormat::SchemaBased => &entry.schema_prompt,
                PromptFormat::DataEmbedded => &entry.full_prompt,
            };
            let prompt_path = dir.join(prompt_file);
            let problem = fs::read_to_string(&prompt_path).map_err(io_err(&prompt_path))?;
            let data = match format {
                PromptFormat::SchemaBased => {
                    let json_path = dir.join(&entry.json);
                    let raw = fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
                    Some(serde_json::from_str(&raw).map_err(|e| PipelineError::Manifest {
                        path: json_path.display().to_string(),
                        message: e.to_string(),
                    })?)
                }
                PromptFormat::DataEmbedded => None,
            };
            Ok(InstanceInput {
                name: entry.instance.clone(),
                problem,
                data,
            })
        })
        .collect()
}

/// Final state of one instance, written as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance: String,
    /// The final program ran to completion and printed a status.
    pub executed: bool,
    pub status: Option<SolveStatus>,
    pub objective: Option<f64>,
    pub report_status: ReportStatus,
    pub data_mode: Option<crate::runtime::DataMode>,
    /// L1 verifications in phase 1 (initial attempt plus regenerations).
    pub l1_attempts: usize,
    pub repair_calls: usize,
    pub safety_retries: usize,
    pub diagnostics: Vec<Diagnostic>,
    /// Set when the instance could not be processed (LLM or runner failure).
    pub error: Option<String>,
}

impl InstanceResult {
    fn errored(instance: &str, l1_attempts: usize, error: String) -> Self {
        InstanceResult {
            instance: instance.to_string(),
            executed: false,
            status: None,
            objective: None,
            report_status: ReportStatus::Failed,
            data_mode: None,
            l1_attempts,
            repair_calls: 0,
            safety_retries: 0,
            diagnostics: Vec::new(),
            error: Some(error),
        }
    }
}

pub struct Pipeline<'a> {
    pub runtime: &'a Runtime,
    pub llm: &'a dyn LlmClient,
    pub config: &'a PipelineConfig,
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn exchanges_text(exchanges: &[Exchange], pick: impl Fn(&Exchange) -> &str) -> String {
    if let [only] = exchanges {
        return pick(only).to_string();
    }
    exchanges
        .iter()
        .map(|e| format!("===== {} =====\n{}", e.stage, pick(e)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializes");
    text.push('\n');
    text
}

impl Pipeline<'_> {
    /// Run one instance end to end, writing its run directory under `out`.
    pub fn run_instance(&self, input: &InstanceInput, out: &Path) -> Result<InstanceResult, PipelineError> {
        let inst_dir = out.join(&input.name);
        if inst_dir.exists() {
            fs::remove_dir_all(&inst_dir).map_err(io_err(&inst_dir))?;
        }
        fs::create_dir_all(&inst_dir).map_err(io_err(&inst_dir))?;
        let result = self.process(input, out)?;
        write(&inst_dir.join(RESULT_FILE), &json_pretty(&result))?;
        Ok(result)
    }

    fn process(&self, input: &InstanceInput, out: &Path) -> Result<InstanceResult, PipelineError> {
        let cfg = self.config;
        let style = cfg.pipeline.generation;
        let first_dir = attempt_dir(out, &input.name, 0);

        let generated = match &input.data {
            Some(record) => generate_with_data(&input.problem, record.clone(), self.llm, style),
            None => generate(&input.problem, self.llm, style),
        };
        let generated = match generated {
            Ok(g) => g,
            Err(e) => {
                if let GenerationError::NoCode { exchanges } = &e {
                    write(&first_dir.join("prompt.txt"), &exchanges_text(exchanges, |x| &x.user))?;
                    write(&first_dir.join("reply.txt"), &exchanges_text(exchanges, |x| &x.reply))?;
                }
                return Ok(InstanceResult::errored(&input.name, 0, e.to_string()));
            }
        };
        write(&first_dir.join("prompt.txt"), &exchanges_text(&generated.exchanges, |x| &x.user))?;
        write(&first_dir.join("reply.txt"), &exchanges_text(&generated.exchanges, |x| &x.reply))?;

        let data = generated.data;
        let schema = data.as_ref().map(describe_schema);
        let mut program = generated.program;

        // Phase 1: the initial attempt plus up to `max_regenerations` regenerations.
        let mut attempt = 0usize;
        let mut l1: L1Result;
        loop {
            let dir = attempt_dir(out, &input.name, attempt);
            l1 = l1_verify(self.runtime, &program, data.as_ref(), &cfg.l1(), None, Some(&dir))?;
            if l1.passed() || attempt >= cfg.l1.max_regenerations {
                break;
            }
            write(&dir.join("report.json"), &report_json(&VerificationReport::new(l1.diagnostics.clone(), None)))?;
            attempt += 1;
            let next_dir = attempt_dir(out, &input.name, attempt);
            let prompt =
                build_regeneration_prompt(&input.problem, &program.source, &l1.error_message(), program.data_mode, schema.as_deref());
            write(&next_dir.join("prompt.txt"), &prompt)?;
            let reply = match self.llm.complete(REGENERATION_SYSTEM, &prompt) {
                Ok(r) => r,
                Err(e) => return Ok(phase_one_failure(input, attempt, &l1, Some(e.to_string()))),
            };
            write(&next_dir.join("reply.txt"), &reply)?;
            if let Some(code) = extract_code(&reply) {
                program = CandidateProgram {
                    source: code,
                    data_mode: program.data_mode,
                };
            }
        }
        let l1_attempts = attempt + 1;
        let baseline_dir = attempt_dir(out, &input.name, attempt);
        if !l1.passed() {
            write(&baseline_dir.join("report.json"), &report_json(&VerificationReport::new(l1.diagnostics.clone(), None)))?;
            return Ok(phase_one_failure(input, l1_attempts, &l1, None));
        }
        let baseline = l1.objective.expect("passing L1 has an objective");

        // Phase 2: L2 on the verified baseline, then targeted repair.
        let subject = L2Subject {
            runtime: self.runtime,
            program: &program,
            data: data.as_ref(),
            baseline,
        };
        let l2 = l2_verify(&subject, &input.problem, self.llm, &cfg.l2());
        let mut baseline_diags = l1.diagnostics.clone();
        baseline_diags.extend(l2.diagnostics.iter().cloned());
        write(&baseline_dir.join("report.json"), &report_json(&VerificationReport::new(baseline_diags, Some(baseline))))?;
        if !l2.exchanges.is_empty() {
            write(&baseline_dir.join("extraction.json"), &json_pretty(&l2.exchanges))?;
        }

        let repair_base = attempt;
        let dir_for = |j: usize| attempt_dir(out, &input.name, repair_base + j);
        let ctx = RepairContext {
            runtime: self.runtime,
            llm: self.llm,
            problem: &input.problem,
            data: data.as_ref(),
            schema: schema.as_deref(),
            l1: cfg.l1(),
            l2: cfg.l2(),
            repair: cfg.repair(),
            probe: None,
            artifacts: Some(&dir_for),
        };
        let report = VerificationReport::new(l2.diagnostics, Some(baseline));
        let data_mode = program.data_mode;
        let outcome = repair_loop(&ctx, program, baseline, report);
        write_audit(&out.join(&input.name).join(AUDIT_FILE), &outcome.audit)?;

        let status = outcome
            .audit
            .iter()
            .rev()
            .find(|e| e.decision == RepairDecision::Adopted)
            .and_then(|e| e.l1.as_ref()?.solver_status)
            .or(l1.solver_status);
        let mut diagnostics = l1.diagnostics;
        diagnostics.extend(outcome.diagnostics);
        Ok(InstanceResult {
            instance: input.name.clone(),
            executed: true,
            status,
            objective: Some(outcome.objective),
            report_status: outcome.status,
            data_mode: Some(data_mode),
            l1_attempts,
            repair_calls: outcome.repair_calls,
            safety_retries: outcome.safety_retries,
            diagnostics,
            error: None,
        })
    }

    /// Run many instances on `workers` threads. Results keep input order.
    pub fn run_all(&self, inputs: &[InstanceInput], out: &Path, workers: usize) -> Vec<Result<InstanceResult, PipelineError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<InstanceResult, PipelineError>>>> =
            inputs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers.clamp(1, inputs.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(input) = inputs.get(i) else { break };
                    log::info!("running {}", input.name);
                    let r = self.run_instance(input, out);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
            .collect()
    }
}

fn phase_one_failure(input: &InstanceInput, l1_attempts: usize, l1: &L1Result, error: Option<String>) -> InstanceResult {
    let completed = l1.outcome.as_ref().is_some_and(|o| o.exit_kind == crate::runtime::ExitKind::Completed);
    InstanceResult {
        instance: input.name.clone(),
        executed: completed && l1.solver_status.is_some(),
        status: l1.solver_status,
        objective: None,
        report_status: ReportStatus::Failed,
        data_mode: None,
        l1_attempts,
        repair_calls: 0,
        safety_retries: 0,
        diagnostics: l1.diagnostics.clone(),
        error,
    }
}

fn write_audit(path: &Path, entries: &[AuditEntry]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("audit entry serializes"));
        text.push('\n');
    }
    write(path, &text)
}

/// Read every `*/result.json` under a run directory, sorted by instance.
pub fn collect_results(run_dir: &Path) -> Result<Vec<InstanceResult>, PipelineError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(io_err(run_dir))?
        .filter_map(|e| e.ok().map(|e| e.path().join(RESULT_FILE)))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| PipelineError::Manifest {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}
