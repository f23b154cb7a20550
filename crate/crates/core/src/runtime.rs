//! Subprocess execution of untrusted candidate programs.

use std::io::{Read, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Name the injected record is bound to inside the candidate.
pub const DATA_BINDING: &str = "data";
const DATA_FILE: &str = "data.json";
const SCRIPT_FILE: &str = "candidate.py";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// The record is injected as `data` before the candidate runs.
    ExternalDict,
    /// All data lives in the source itself.
    SelfContained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProgram {
    pub source: String,
    pub data_mode: DataMode,
}

impl CandidateProgram {
    pub fn external(source: impl Into<String>) -> Self {
        CandidateProgram {
            source: source.into(),
            data_mode: DataMode::ExternalDict,
        }
    }

    pub fn self_contained(source: impl Into<String>) -> Self {
        CandidateProgram {
            source: source.into(),
            data_mode: DataMode::SelfContained,
        }
    }
}

/// True when the source parses an embedded JSON payload (`json.loads`).
pub fn embeds_data(source: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bjson\s*\.\s*loads\s*\(").unwrap())
        .is_match(source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    Completed,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub exit_kind: ExitKind,
    pub status_code: Option<i64>,
    pub objective: Option<f64>,
    /// Optional `gap: <float>` line (relative MIP gap reported by the candidate).
    pub gap: Option<f64>,
    pub stdout: String,
    pub stderr: String,
    pub duration_s: f64,
}

impl ExecutionOutcome {
    /// Last `limit` characters of stderr, for diagnostics.
    pub fn stderr_excerpt(&self, limit: usize) -> String {
        let text = self.stderr.trim_end();
        let count = text.chars().count();
        if count <= limit {
            text.to_string()
        } else {
            text.chars().skip(count - limit).collect()
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("interpreter `{0}` could not be started: {1}")]
    SandboxSetup(String, String),
    #[error("external_dict program executed without a data record")]
    MissingData,
    #[error("runtime io: {0}")]
    Io(#[from] std::io::Error),
}

/// Interpreter command: binary plus leading arguments; the script path is appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpreter {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter {
            program: "python3".into(),
            args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Runtime {
    pub interpreter: Interpreter,
}

/// Generated code that binds the injected record before the candidate runs.
pub fn data_preamble() -> String {
    format!(
        "import json as _optverify_json\nwith open({DATA_FILE:?}) as _optverify_f:\n    {DATA_BINDING} = _optverify_json.load(_optverify_f)\n\n"
    )
}

/// The exact script handed to the interpreter.
pub fn assemble(program: &CandidateProgram) -> String {
    match program.data_mode {
        DataMode::ExternalDict => format!("{}{}", data_preamble(), program.source),
        DataMode::SelfContained => program.source.clone(),
    }
}

const SYNTAX_CHECK: &str = "import ast, sys\nsrc = sys.stdin.read()\ntry:\n    ast.parse(src)\nexcept SyntaxError as e:\n    print(f'line {e.lineno}: {e.msg}')\n    sys.exit(1)\n";

impl Runtime {
    pub fn new(interpreter: Interpreter) -> Self {
        Runtime { interpreter }
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.interpreter.program);
        cmd.args(&self.interpreter.args);
        cmd
    }

    /// Run a trusted helper script (`-c`) with `input` on stdin.
    pub fn run_helper(&self, script: &str, input: &str) -> Result<std::process::Output, RuntimeError> {
        let mut child = self
            .command()
            .arg("-c")
            .arg(script)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| RuntimeError::SandboxSetup(self.interpreter.program.clone(), e.to_string()))?;
        child.stdin.take().expect("piped").write_all(input.as_bytes())?;
        Ok(child.wait_with_output()?)
    }

    /// Parse without executing. `Err` carries the interpreter's message.
    pub fn syntax_check(&self, source: &str) -> Result<Result<(), String>, RuntimeError> {
        let out = self.run_helper(SYNTAX_CHECK, source)?;
        if out.status.success() {
            Ok(Ok(()))
        } else {
            let msg = String::from_utf8_lossy(&out.stdout).trim().to_string();
            let msg = if msg.is_empty() {
                String::from_utf8_lossy(&out.stderr).trim().to_string()
            } else {
                msg
            };
            Ok(Err(msg))
        }
    }

    pub fn execute(
        &self,
        program: &CandidateProgram,
        data: Option<&Value>,
        timeout: Duration,
    ) -> Result<ExecutionOutcome, RuntimeError> {
        self.execute_logged(program, data, timeout, None)
    }

    /// Execute and, when `artifacts` is given, persist the assembled script,
    /// stdout and stderr there.
    pub fn execute_logged(
        &self,
        program: &CandidateProgram,
        data: Option<&Value>,
        timeout: Duration,
        artifacts: Option<&Path>,
    ) -> Result<ExecutionOutcome, RuntimeError> {
        let workdir = tempfile::tempdir()?;
        if program.data_mode == DataMode::ExternalDict {
            let record = data.ok_or(RuntimeError::MissingData)?;
            let text = serde_json::to_string(record).expect("json value serializes");
            std::fs::write(workdir.path().join(DATA_FILE), text)?;
        } else if let Some(record) = data {
            // Harmless for self-contained code, handy for debugging.
            std::fs::write(workdir.path().join(DATA_FILE), record.to_string())?;
        }
        let script = assemble(program);
        let script_path = workdir.path().join(SCRIPT_FILE);
        std::fs::write(&script_path, &script)?;

        let start = Instant::now();
        let mut cmd = self.command();
        cmd.arg(&script_path)
            .current_dir(workdir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| RuntimeError::SandboxSetup(self.interpreter.program.clone(), e.to_string()))?;
        let stdout_reader = spawn_reader(child.stdout.take().expect("piped"));
        let stderr_reader = spawn_reader(child.stderr.take().expect("piped"));

        let (timed_out, success) = wait_with_deadline(&mut child, timeout)?;
        let duration_s = start.elapsed().as_secs_f64();
        let stdout = stdout_reader.join().unwrap_or_default();
        let stderr = stderr_reader.join().unwrap_or_default();

        let exit_kind = if timed_out {
            ExitKind::Timeout
        } else if success {
            ExitKind::Completed
        } else {
            ExitKind::Crash
        };
        let parsed = parse_contract(&stdout);
        let outcome = ExecutionOutcome {
            exit_kind,
            status_code: parsed.status,
            objective: if exit_kind == ExitKind::Completed { parsed.objective } else { None },
            gap: parsed.gap,
            stdout,
            stderr,
            duration_s,
        };
        if let Some(dir) = artifacts {
            persist(dir, &script, &outcome)?;
        }
        Ok(outcome)
    }
}

fn persist(dir: &Path, script: &str, outcome: &ExecutionOutcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("code.py"), script)?;
    std::fs::write(dir.join("stdout.txt"), &outcome.stdout)?;
    std::fs::write(dir.join("stderr.txt"), &outcome.stderr)?;
    Ok(())
}

fn spawn_reader<R: Read + Send + 'static>(mut pipe: R) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Returns (timed_out, exited_successfully).
fn wait_with_deadline(child: &mut Child, timeout: Duration) -> std::io::Result<(bool, bool)> {
    let deadline = Instant::now() + timeout;
    let mut pause = Duration::from_millis(2);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((false, status.success()));
        }
        if Instant::now() >= deadline {
            kill_tree(child);
            let _ = child.wait();
            return Ok((true, false));
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(50));
    }
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        // The child leads its own process group, so grandchildren die too and
        // release the output pipes.
        let pgid = child.id() as libc::pid_t;
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContractLines {
    pub status: Option<i64>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

/// Scan stdout for `status:`, `objective:` and `gap:` lines; the last of each wins.
pub fn parse_contract(stdout: &str) -> ContractLines {
    static STATUS: OnceLock<Regex> = OnceLock::new();
    static NUMBER: OnceLock<Regex> = OnceLock::new();
    let status_re = STATUS.get_or_init(|| Regex::new(r"^\s*status:\s*([+-]?\d+)\s*$").unwrap());
    let number_re = NUMBER.get_or_init(|| {
        Regex::new(r"^\s*(objective|gap):\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*$").unwrap()
    });
    let mut out = ContractLines::default();
    for line in stdout.lines() {
        if let Some(c) = status_re.captures(line) {
            if let Ok(v) = c[1].parse() {
                out.status = Some(v);
            }
        } else if let Some(c) = number_re.captures(line) {
            let v: f64 = match c[2].parse() {
                Ok(v) => v,
                Err(_) => continue,
            };
            if !v.is_finite() {
                continue;
            }
            match &c[1] {
                "objective" => out.objective = Some(v),
                _ => out.gap = Some(v),
            }
        }
    }
    out
}

/// Default directory for a run artifact set.
pub fn attempt_dir(root: &Path, instance: &str, attempt: usize) -> PathBuf {
    root.join(instance).join(format!("attempt_{attempt}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rt() -> Runtime {
        Runtime::default()
    }

    #[test]
    fn contract_lines_parse() {
        let out = parse_contract("Gurobi noise\nstatus: 3\nobjective: 1\nstatus: 2\nobjective: -4.5e2\ngap: 0.02\n");
        assert_eq!(out.status, Some(2));
        assert_eq!(out.objective, Some(-450.0));
        assert_eq!(out.gap, Some(0.02));
        let out = parse_contract("objective: nan\nobjective: abc\nstatus: two\n");
        assert_eq!(out, ContractLines::default());
        assert_eq!(parse_contract("objective: .5").objective, Some(0.5));
        assert_eq!(parse_contract("objective: +7").objective, Some(7.0));
    }

    #[test]
    fn completed_program_reports_contract() {
        let p = CandidateProgram::self_contained("print('status: 2')\nprint('objective: 42.5')\n");
        let o = rt().execute(&p, None, Duration::from_secs(20)).unwrap();
        assert_eq!(o.exit_kind, ExitKind::Completed);
        assert_eq!(o.status_code, Some(2));
        assert_eq!(o.objective, Some(42.5));
    }

    #[test]
    fn infinite_loop_times_out() {
        let p = CandidateProgram::self_contained("while True:\n    pass\n");
        let o = rt().execute(&p, None, Duration::from_secs(1)).unwrap();
        assert_eq!(o.exit_kind, ExitKind::Timeout);
        assert!(o.duration_s >= 0.9 && o.duration_s < 5.0, "{}", o.duration_s);
        assert_eq!(o.objective, None);
    }

    #[test]
    fn crash_has_stderr_and_no_objective() {
        let p = CandidateProgram::self_contained("print('objective: 1')\nimport no_such_module_xyz\n");
        let o = rt().execute(&p, None, Duration::from_secs(20)).unwrap();
        assert_eq!(o.exit_kind, ExitKind::Crash);
        assert!(o.stderr.contains("no_such_module_xyz"));
        assert_eq!(o.objective, None);
    }

    #[test]
    fn data_is_injected_and_caller_copy_untouched() {
        let record = json!({"capacity": [1, 2, 3]});
        let before = record.clone();
        let p = CandidateProgram::external(
            "data['capacity'].append(99)\nprint('status: 2')\nprint(f\"objective: {sum(data['capacity'])}\")\n",
        );
        let o = rt().execute(&p, Some(&record), Duration::from_secs(20)).unwrap();
        assert_eq!(o.objective, Some(105.0));
        assert_eq!(record, before);
        assert!(matches!(
            rt().execute(&p, None, Duration::from_secs(5)),
            Err(RuntimeError::MissingData)
        ));
    }

    #[test]
    fn missing_interpreter_is_setup_error() {
        let r = Runtime::new(Interpreter {
            program: "/nonexistent/python-xyz".into(),
            args: vec![],
        });
        let p = CandidateProgram::self_contained("print(1)");
        assert!(matches!(r.execute(&p, None, Duration::from_secs(1)), Err(RuntimeError::SandboxSetup(..))));
    }

    #[test]
    fn syntax_check_does_not_execute() {
        let rt = rt();
        assert_eq!(rt.syntax_check("x = 1\n").unwrap(), Ok(()));
        let err = rt.syntax_check("def f(:\n").unwrap().unwrap_err();
        assert!(err.contains("line 1"), "{err}");
        let dir = tempfile::tempdir().unwrap();
        let marker = dir.path().join("ran");
        let src = format!("open({:?}, 'w').write('x')\n", marker.to_str().unwrap());
        assert_eq!(rt.syntax_check(&src).unwrap(), Ok(()));
        assert!(!marker.exists());
    }

    #[test]
    fn artifacts_are_persisted() {
        let dir = tempfile::tempdir().unwrap();
        let p = CandidateProgram::external("print('status: 2')\nprint('objective: 0')\n");
        rt().execute_logged(&p, Some(&json!({})), Duration::from_secs(20), Some(dir.path())).unwrap();
        let code = std::fs::read_to_string(dir.path().join("code.py")).unwrap();
        assert!(code.starts_with(&data_preamble()));
        assert!(std::fs::read_to_string(dir.path().join("stdout.txt")).unwrap().contains("status: 2"));
    }

    #[test]
    fn embedded_parse_detection() {
        assert!(embeds_data("data = json.loads(RAW)"));
        assert!(!embeds_data("data['x']"));
    }
}
