#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use optverify::l2::extract::EXTRACTION_SYSTEM;
use optverify::llm::{LlmClient, LlmError, COT_SYSTEM};
use optverify::repair::REPAIR_SYSTEM;
use optverify::ScenarioInstance;

pub const BIN: &str = env!("CARGO_BIN_EXE_optverify");

/// Instances exercised by the offline replay.
pub const REPLAY_INSTANCES: [&str; 5] = [
    "retail_f1_base_v0",
    "retail_f3_storage_bottleneck_v0",
    "retail_f3_volumetric_constraint_v0",
    "retail_f4_demand_surge_v0",
    "retail_f7_budget_limit_v0",
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn replay_dir() -> PathBuf {
    fixtures().join("replay")
}

pub fn candidate(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("candidates").join(name)).expect("candidate fixture")
}

/// The generated suite, written once per test binary.
pub fn suite() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        optverify::bench::generate_suite(dir.path()).unwrap();
        dir
    })
    .path()
}

pub fn instance(name: &str) -> ScenarioInstance {
    let text = std::fs::read_to_string(suite().join(format!("{name}.json"))).unwrap();
    ScenarioInstance::from_json_str(&text).unwrap()
}

pub fn record(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(suite().join(format!("{name}.json"))).unwrap()).unwrap()
}

/// A candidate that hands its `data` record to the reference model through
/// the `solve` subcommand, with the given extra arguments.
pub fn reference_wrapper(extra_args: &[&str]) -> String {
    let args: Vec<String> = extra_args.iter().map(|a| format!("{a:?}")).collect();
    format!(
        r#"import json, subprocess, tempfile
with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
    json.dump(data, fh)
out = subprocess.run([{bin:?}, "solve", "--instance", fh.name, {args}], capture_output=True, text=True)
print(out.stdout, end="")
"#,
        bin = BIN,
        args = args.join(", ")
    )
}

/// Deterministic stand-in for a model provider when recording replay
/// fixtures: the first program leaves out the cold-storage limit and the
/// repair restores it.
pub struct FixtureAuthor;

fn fenced(code: &str) -> String {
    format!("Here is the model.\n\n```python\n{code}```\n")
}

impl LlmClient for FixtureAuthor {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        match system {
            COT_SYSTEM => Ok(fenced(&candidate("retail_lp_no_storage.py"))),
            REPAIR_SYSTEM => Ok(fenced(&candidate("retail_lp.py"))),
            EXTRACTION_SYSTEM if user.contains("KEY CONSTRAINTS") => Ok(r#"[
  {"description": "cold storage capacity per location", "type": "capacity", "parameters": ["cold_capacity"]},
  {"description": "production capacity per product", "type": "capacity", "parameters": ["production_cap"]},
  {"description": "demand satisfaction", "type": "demand", "parameters": ["demand_curve"]}
]"#
            .into()),
            EXTRACTION_SYSTEM => Ok(r#"[
  {"description": "purchasing cost", "role": "cost", "parameters": ["costs.purchasing"]},
  {"description": "inventory holding cost", "role": "cost", "parameters": ["costs.inventory"]},
  {"description": "lost sales penalty", "role": "cost", "parameters": ["costs.lost_sales"]}
]"#
            .into()),
            other => Err(LlmError::Transport(format!("no scripted reply for system prompt {other:?}"))),
        }
    }
}

/// Every file under `root`, relative path to contents, in path order.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
