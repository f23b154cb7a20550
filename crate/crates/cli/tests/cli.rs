mod common;

use std::process::{Command, Output};

use optverify::eval::{EvalRecord, Prediction};
use optverify::reference::{GroundTruth, GroundTruthFile};
use optverify::runtime::parse_contract;
use optverify::solver::SolveStatus;

fn optverify(args: &[&str]) -> Output {
    Command::new(common::BIN).args(args).output().unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_prints_the_output_contract() {
    let inst = common::suite().join("retail_f3_storage_bottleneck_v0.json");
    let full = optverify(&["solve", "--instance", path(&inst)]);
    assert!(full.status.success());
    let full = parse_contract(&String::from_utf8(full.stdout).unwrap());
    assert_eq!(full.status, Some(2));
    let relaxed = optverify(&["solve", "--instance", path(&inst), "--omit", "storage"]);
    let relaxed = parse_contract(&String::from_utf8(relaxed.stdout).unwrap());
    // Dropping a binding capacity can only lower a minimized cost.
    assert!(relaxed.objective.unwrap() < full.objective.unwrap());
}

#[test]
fn configuration_errors_exit_with_two() {
    let inst = common::suite().join("retail_f1_base_v0.json");
    assert_eq!(optverify(&["solve", "--instance", path(&inst), "--omit", "bogus"]).status.code(), Some(2));
    assert_eq!(optverify(&["solve", "--instance", "/nonexistent.json"]).status.code(), Some(2));
    let out = tempfile::tempdir().unwrap();
    let seed_without_dir = optverify(&["--seed-fixtures", "run", "--instances", path(common::suite()), "--out", path(out.path())]);
    assert_eq!(seed_without_dir.status.code(), Some(2));
    let bad_config = out.path().join("bad.toml");
    std::fs::write(&bad_config, "[pipeline]\nregression_guard = 0.5\n").unwrap();
    let guarded = optverify(&["--config", path(&bad_config), "report", "--eval", "/nonexistent"]);
    assert_eq!(guarded.status.code(), Some(2));
    let unknown = optverify(&["run", "--instances", path(common::suite()), "--out", path(out.path()), "--only", "retail_nope_v0", "--llm-replay", "/tmp"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn missing_fixtures_are_partial_failures() {
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = optverify(&[
        "--llm-replay",
        path(empty.path()),
        "run",
        "--instances",
        path(common::suite()),
        "--out",
        path(out.path()),
        "--only",
        "retail_f1_base_v0",
    ]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn evaluate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let gt: GroundTruthFile = [
        ("retail_f1_base_v0", SolveStatus::Optimal, Some(1000.0)),
        ("retail_f1_base_v1", SolveStatus::Optimal, Some(2000.0)),
        ("retail_f5_impossible_demand_v0", SolveStatus::Optimal, Some(5e6)),
    ]
    .into_iter()
    .map(|(n, status, objective)| (n.to_string(), GroundTruth { status, objective }))
    .collect();
    let gt_path = dir.path().join("gt.json");
    std::fs::write(&gt_path, serde_json::to_string(&gt).unwrap()).unwrap();
    let preds = [
        Prediction {
            instance: "retail_f1_base_v0".into(),
            executed: true,
            status: Some(SolveStatus::Optimal),
            objective: Some(1000.05),
        },
        Prediction {
            instance: "retail_f1_base_v1".into(),
            executed: true,
            status: Some(SolveStatus::Optimal),
            objective: Some(2100.0),
        },
    ];
    let pred_path = dir.path().join("preds.jsonl");
    optverify::eval::write_jsonl(&pred_path, &preds).unwrap();
    let eval_path = dir.path().join("eval.jsonl");
    let r = optverify(&[
        "evaluate",
        "--results",
        path(&pred_path),
        "--ground-truth",
        path(&gt_path),
        "--benchmark",
        "RetailOpt-190",
        "--out",
        path(&eval_path),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let records: Vec<EvalRecord> = optverify::eval::read_jsonl(&eval_path).unwrap();
    assert_eq!(records.len(), 3);
    // 5e-5 relative error: right at both tiers; 5%: wrong at both.
    assert!(records[0].correct_strict && records[0].correct_practical);
    assert!(!records[1].correct_practical);
    assert!(!records[2].executed);

    let table = optverify(&["report", "--eval", path(&eval_path)]);
    assert!(table.status.success());
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.contains("SF_rate"), "{text}");
    let json = optverify(&["report", "--eval", path(&eval_path), "--json"]);
    let summary: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(summary["total"]["executed"], 2);
    assert_eq!(summary["total"]["correct_strict"], 1);

    let unknown = optverify(&["evaluate", "--results", path(&pred_path), "--ground-truth", path(&gt_path), "--benchmark", "nope", "--out", path(&eval_path)]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn purchasing_term_passes_on_cost_dominant_instance() {
    use optverify::diagnostics::Severity;
    use optverify::l1::{l1_verify, L1Config};
    use optverify::l2::{objective_test, CandidateObjectiveTerm, L2Config, L2Subject, TermRole};
    use optverify::runtime::{CandidateProgram, Runtime};

    let rt = Runtime::default();
    let data = common::record("retail_f1_base_v0");
    let program = CandidateProgram::external(common::reference_wrapper(&[]));
    let baseline = l1_verify(&rt, &program, Some(&data), &L1Config::default(), None, None).unwrap().objective.unwrap();
    let subject = L2Subject {
        runtime: &rt,
        program: &program,
        data: Some(&data),
        baseline,
    };
    let term = CandidateObjectiveTerm {
        description: "purchasing cost".into(),
        role: TermRole::Cost,
        parameters: vec!["costs.purchasing".into()],
    };
    let diags = objective_test(&subject, &[term], &L2Config::default());
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].severity, Severity::Pass, "{}", diags[0].evidence);
}
