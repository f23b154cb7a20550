//! Re-records the checked-in LLM fixtures used by the offline replay.
//!
//! Run with `cargo test -p optverify-cli --test replay_fixtures -- --ignored`
//! after changing any prompt template.

mod common;

use optverify::bench::PromptFormat;
use optverify::config::PipelineConfig;
use optverify::llm::RecordingClient;
use optverify::pipeline::{self, Pipeline};
use optverify::runtime::Runtime;

#[test]
#[ignore = "rewrites tests/fixtures/replay"]
fn record_replay_fixtures() {
    let dir = common::replay_dir();
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    let llm = RecordingClient::new(&dir, common::FixtureAuthor);
    let config = PipelineConfig::default();
    let runtime = Runtime::default();
    let p = Pipeline {
        runtime: &runtime,
        llm: &llm,
        config: &config,
    };
    let inputs: Vec<_> = pipeline::load_instances(common::suite(), PromptFormat::SchemaBased)
        .unwrap()
        .into_iter()
        .filter(|i| common::REPLAY_INSTANCES.contains(&i.name.as_str()))
        .collect();
    assert_eq!(inputs.len(), common::REPLAY_INSTANCES.len());
    let out = tempfile::tempdir().unwrap();
    for r in p.run_all(&inputs, out.path(), 1) {
        let r = r.unwrap();
        println!("{} {:?} {:?} repairs={}", r.instance, r.report_status, r.objective, r.repair_calls);
    }
}
