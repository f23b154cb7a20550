//! Extraction-first run through detection, repair and re-verification.

use optverify::config::PipelineConfig;
use optverify::diagnostics::{ReportStatus, Severity};
use optverify::llm::ScriptedClient;
use optverify::pipeline::{InstanceInput, Pipeline, AUDIT_FILE, RESULT_FILE};
use optverify::repair::{AuditEntry, RepairDecision};
use optverify::runtime::{DataMode, Runtime};

const PROBLEM: &str = "A shop sells one item at price 3. Demand is 101 units and shelf capacity is 100 units. Maximize revenue.";

fn fenced(lang: &str, body: &str) -> String {
    format!("```{lang}\n{body}```\n")
}

const IGNORES_CAPACITY: &str = "sold = data['demand']\nprint('status: 2')\nprint(f\"objective: {data['price'] * sold}\")\n";
const RESPECTS_CAPACITY: &str =
    "sold = min(data['demand'], data['capacity'])\nprint('status: 2')\nprint(f\"objective: {data['price'] * sold}\")\n";
const CONSTRAINTS: &str = r#"[{"description": "shelf capacity", "type": "capacity", "parameters": ["capacity"]}]"#;
const TERMS: &str = r#"[{"description": "sales revenue", "role": "revenue", "parameters": ["price"]}]"#;

#[test]
fn missing_capacity_is_detected_and_repaired() {
    let llm = ScriptedClient::new([
        fenced("json", "{\"capacity\": 100, \"demand\": 101, \"price\": 3}\n"),
        fenced("python", IGNORES_CAPACITY),
        CONSTRAINTS.to_string(),
        TERMS.to_string(),
        fenced("python", RESPECTS_CAPACITY),
        CONSTRAINTS.to_string(),
        TERMS.to_string(),
    ]);
    let runtime = Runtime::default();
    let config = PipelineConfig::default();
    let pipeline = Pipeline {
        runtime: &runtime,
        llm: &llm,
        config: &config,
    };
    let out = tempfile::tempdir().unwrap();
    let input = InstanceInput {
        name: "shop".into(),
        problem: PROBLEM.into(),
        data: None,
    };
    let result = pipeline.run_instance(&input, out.path()).unwrap();

    assert_eq!(llm.remaining(), 0);
    assert_eq!(result.data_mode, Some(DataMode::ExternalDict));
    assert_eq!(result.objective, Some(300.0));
    assert_eq!(result.report_status, ReportStatus::Verified);
    assert_eq!(result.repair_calls, 1);
    assert!(result.diagnostics.iter().all(|d| d.severity != Severity::Warning));

    let inst = out.path().join("shop");
    for file in ["code.py", "stdout.txt", "stderr.txt", "report.json", "prompt.txt", "reply.txt"] {
        assert!(inst.join("attempt_0").join(file).is_file(), "attempt_0/{file}");
        assert!(inst.join("attempt_1").join(file).is_file(), "attempt_1/{file}");
    }
    let baseline: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inst.join("attempt_0/report.json")).unwrap()).unwrap();
    assert_eq!(baseline["status"], "NeedsRepair");
    assert!(std::fs::read_to_string(inst.join("attempt_1/prompt.txt")).unwrap().contains("shelf capacity"));

    let audit: Vec<AuditEntry> = std::fs::read_to_string(inst.join(AUDIT_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let decisions: Vec<_> = audit.iter().map(|e| e.decision).collect();
    assert_eq!(decisions, [RepairDecision::Adopted, RepairDecision::Verified]);
    assert!(inst.join(RESULT_FILE).is_file());
}
