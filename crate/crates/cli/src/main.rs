use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use optverify::bench::{self, PromptFormat};
use optverify::config::PipelineConfig;
use optverify::eval::{self, Benchmark, EvalRecord, Prediction};
use optverify::llm::{HttpClient, LlmClient, LlmConfig, RecordingClient, ReplayClient};
use optverify::pipeline::{self, Pipeline};
use optverify::reference::{self, BuildOptions, ConstraintFamily, GroundTruth, GroundTruthFile, ObjectiveTerm};
use optverify::runtime::Runtime;
use optverify::solver::{self, SolveParams};
use optverify::ScenarioInstance;

#[derive(Parser)]
#[command(name = "optverify", version, about = "Benchmark generation, verification and repair of generated optimization programs")]
struct Cli {
    /// Instances processed in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Record missing LLM fixtures from the live provider into the replay directory.
    #[arg(long, global = true)]
    seed_fixtures: bool,
    /// Serve LLM replies from recorded fixtures in this directory.
    #[arg(long, global = true, value_name = "DIR")]
    llm_replay: Option<PathBuf>,
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Schema,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 190-instance suite, prompts and manifest.
    GenBench {
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve every instance with the reference model.
    GroundTruth {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, verify and repair a program for every instance.
    Run {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value = "schema")]
        format: Format,
        /// LLM provider configuration (TOML). Not needed for pure replay.
        #[arg(long)]
        provider: Option<PathBuf>,
        /// Repair iterations; overrides the config file.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these instance names.
        #[arg(long = "only")]
        only: Vec<String>,
    },
    /// Judge run results against ground truth.
    Evaluate {
        /// Run directory, or a JSONL file of predictions.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value = "retailopt")]
        benchmark: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-family table for an evaluation file.
    Report {
        #[arg(long)]
        eval: PathBuf,
        /// Print the aggregate as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Solve one instance with the reference model, optionally mutated.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Constraint family to leave out (repeatable).
        #[arg(long = "omit")]
        omit: Vec<ConstraintFamily>,
        /// Objective term to leave out (repeatable).
        #[arg(long = "omit-term")]
        omit_term: Vec<ObjectiveTerm>,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
}

enum Failure {
    /// Bad flags, unreadable configuration or inputs: exit 2.
    Config(String),
    /// Some items failed while the rest completed: exit 1.
    Partial(String),
}

type CmdResult = Result<(), Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,highs=error")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    if cli.workers == 0 {
        return Err(Failure::Config("--workers must be at least 1".into()));
    }
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(config_err)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::GenBench { out } => gen_bench(out),
        Command::GroundTruth { instances, out } => ground_truth(instances, out, cli.workers),
        Command::Run {
            instances,
            format,
            provider,
            budget,
            out,
            only,
        } => {
            let mut config = config;
            if let Some(n) = budget {
                config.pipeline.repair_budget = *n;
            }
            config.validate().map_err(config_err)?;
            let llm = llm_client(cli, provider.as_deref())?;
            run(instances, *format, &*llm, &config, out, only, cli.workers)
        }
        Command::Evaluate {
            results,
            ground_truth,
            benchmark,
            out,
        } => evaluate(results, ground_truth, benchmark, out, &config),
        Command::Report { eval, json } => report(eval, *json),
        Command::Solve {
            instance,
            omit,
            omit_term,
            time_limit,
        } => solve(instance, omit, omit_term, *time_limit),
    }
}

fn llm_client(cli: &Cli, provider: Option<&Path>) -> Result<Box<dyn LlmClient>, Failure> {
    let live = || -> Result<HttpClient, Failure> {
        let path = provider.ok_or_else(|| Failure::Config("--provider is required for live LLM calls".into()))?;
        let cfg = LlmConfig::from_toml_file(path).map_err(config_err)?;
        cfg.validate().map_err(config_err)?;
        HttpClient::new(cfg).map_err(config_err)
    };
    match (&cli.llm_replay, cli.seed_fixtures) {
        (Some(dir), false) => Ok(Box::new(ReplayClient::new(dir))),
        (Some(dir), true) => Ok(Box::new(RecordingClient::new(dir, live()?))),
        (None, true) => Err(Failure::Config("--seed-fixtures needs --llm-replay DIR to record into".into())),
        (None, false) => Ok(Box::new(live()?)),
    }
}

fn gen_bench(out: &Path) -> CmdResult {
    let start = Instant::now();
    let manifest = bench::generate_suite(out).map_err(config_err)?;
    println!(
        "wrote {} instances to {} in {:.1} s",
        manifest.len(),
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

/// Instances in a suite directory: manifest order when present, otherwise
/// every parseable `*.json` file.
fn read_instances(dir: &Path) -> Result<Vec<ScenarioInstance>, Failure> {
    let manifest = dir.join("manifest.json");
    let files: Vec<PathBuf> = if manifest.is_file() {
        let text = fs::read_to_string(&manifest).map_err(config_err)?;
        let entries: Vec<bench::ManifestEntry> = serde_json::from_str(&text).map_err(config_err)?;
        entries.into_iter().map(|e| dir.join(e.json)).collect()
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    };
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            ScenarioInstance::from_json_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(config_err)
}

fn ground_truth(instances: &Path, out: &Path, workers: usize) -> CmdResult {
    let insts = read_instances(instances)?;
    let start = Instant::now();
    let solved: Vec<(String, Result<GroundTruth, String>)> = thread_pool(workers)?.install(|| {
        insts
            .par_iter()
            .map(|inst| {
                let r = reference::ground_truth(inst, &solver::HighsBackend).map_err(|e| e.to_string());
                log::info!("{}: {:?}", inst.name, r);
                (inst.name.clone(), r)
            })
            .collect()
    });
    let mut file = GroundTruthFile::new();
    let mut failures = Vec::new();
    for (name, r) in solved {
        match r {
            Ok(gt) => {
                file.insert(name, gt);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let mut text = serde_json::to_string_pretty(&file).expect("ground truth serializes");
    text.push('\n');
    fs::write(out, text).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    println!(
        "solved {} instances in {:.1} s -> {}",
        file.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{} instances failed:\n{}", failures.len(), failures.join("\n"))))
    }
}

fn run(
    instances: &Path,
    format: Format,
    llm: &dyn LlmClient,
    config: &PipelineConfig,
    out: &Path,
    only: &[String],
    workers: usize,
) -> CmdResult {
    let format = match format {
        Format::Schema => PromptFormat::SchemaBased,
        Format::Full => PromptFormat::DataEmbedded,
    };
    let mut inputs = pipeline::load_instances(instances, format).map_err(config_err)?;
    if !only.is_empty() {
        let unknown: Vec<&String> = only.iter().filter(|n| !inputs.iter().any(|i| &i.name == *n)).collect();
        if !unknown.is_empty() {
            return Err(Failure::Config(format!("unknown instances: {unknown:?}")));
        }
        inputs.retain(|i| only.contains(&i.name));
    }
    fs::create_dir_all(out).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    let runtime = Runtime::default();
    let p = Pipeline {
        runtime: &runtime,
        llm,
        config,
    };
    let results = p.run_all(&inputs, out, workers);
    let mut failures = Vec::new();
    for (input, r) in inputs.iter().zip(&results) {
        match r {
            Ok(res) => {
                println!(
                    "{:<40} {:?} objective={}",
                    res.instance,
                    res.report_status,
                    res.objective.map_or_else(|| "-".to_string(), |z| z.to_string())
                );
                if let Some(e) = &res.error {
                    failures.push(format!("{}: {e}", res.instance));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", input.name)),
        }
    }
    // A runner that cannot start at all is a setup problem, not a partial failure.
    if results.iter().all(|r| matches!(r, Err(pipeline::PipelineError::Runtime(_)))) && !results.is_empty() {
        return Err(Failure::Config(failures.join("\n")));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{} instances failed:\n{}", failures.len(), failures.join("\n"))))
    }
}

fn evaluate(results: &Path, gt_path: &Path, benchmark: &str, out: &Path, config: &PipelineConfig) -> CmdResult {
    let benchmark: Benchmark = benchmark.parse().map_err(config_err)?;
    let gt_text = fs::read_to_string(gt_path).map_err(|e| Failure::Config(format!("{}: {e}", gt_path.display())))?;
    let gt: GroundTruthFile = serde_json::from_str(&gt_text).map_err(config_err)?;
    let predictions: Vec<Prediction> = if results.is_dir() {
        pipeline::collect_results(results)
            .map_err(config_err)?
            .into_iter()
            .map(|r| Prediction {
                instance: r.instance,
                executed: r.executed,
                status: r.status,
                objective: r.objective,
            })
            .collect()
    } else {
        eval::read_jsonl(results).map_err(config_err)?
    };
    let records = eval::evaluate_all(&predictions, &gt, benchmark, &config.tolerances());
    eval::write_jsonl(out, &records).map_err(config_err)?;
    let summary = eval::aggregate(&records).map_err(config_err)?;
    print!("{}", eval::render_table(&summary));
    Ok(())
}

fn report(path: &Path, json: bool) -> CmdResult {
    let records: Vec<EvalRecord> = eval::read_jsonl(path).map_err(config_err)?;
    let summary = eval::aggregate(&records).map_err(config_err)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("report serializes"));
    } else {
        print!("{}", eval::render_table(&summary));
    }
    Ok(())
}

/// Prints the same `status:`/`objective:` lines a candidate program would.
fn solve(path: &Path, omit: &[ConstraintFamily], omit_term: &[ObjectiveTerm], time_limit: f64) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let inst = ScenarioInstance::from_json_str(&text).map_err(config_err)?;
    let opts = BuildOptions {
        omit_constraints: omit.iter().copied().collect::<BTreeSet<_>>(),
        omit_terms: omit_term.iter().copied().collect::<BTreeSet<_>>(),
    };
    let params = SolveParams {
        time_limit_s: time_limit,
        ..SolveParams::default()
    };
    let (_, result, _) = reference::solve_reference(&inst, &opts, &solver::HighsBackend, &params)
        .map_err(|e| Failure::Partial(e.to_string()))?;
    println!("status: {}", result.status.code());
    if let Some(z) = result.objective {
        println!("objective: {z}");
    }
    if let Some(gap) = result.duality_gap {
        println!("gap: {gap}");
    }
    Ok(())
}
