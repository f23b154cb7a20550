//! Reference objectives frozen from a ground-truth run of the suite.

use std::collections::BTreeMap;

use optverify::bench;
use optverify::reference::{self, check_flow_conservation, BuildOptions};
use optverify::solver::{HighsBackend, SolveParams, SolveStatus};

const REL_TOL: f64 = 1e-7;

fn golden() -> BTreeMap<String, f64> {
    serde_json::from_str(include_str!("fixtures/golden_objectives.json")).unwrap()
}

#[test]
fn lp_objectives_match_frozen_values() {
    let golden = golden();
    let suite: BTreeMap<String, _> = bench::suite_instances().into_iter().map(|i| (i.name.clone(), i)).collect();
    for (name, want) in &golden {
        let inst = &suite[name];
        let gt = reference::ground_truth(inst, &HighsBackend).unwrap();
        assert_eq!(gt.status, SolveStatus::Optimal, "{name}");
        let got = gt.objective.unwrap();
        assert!(((got - want) / want).abs() < REL_TOL, "{name}: {got} vs frozen {want}");
    }
}

#[test]
fn repeated_solves_are_identical_and_conserve_flow() {
    let inst = bench::suite_instances().into_iter().find(|i| i.name == "retail_f7_transshipment_v0").unwrap();
    let solve = || reference::solve_reference(&inst, &BuildOptions::default(), &HighsBackend, &SolveParams::default()).unwrap();
    let (_, first, sol) = solve();
    let (_, second, _) = solve();
    assert_eq!(first.objective, second.objective);
    assert_eq!(first.values, second.values);
    assert!(check_flow_conservation(&inst, &sol.unwrap()).is_empty());
}
