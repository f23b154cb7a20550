//! Benchmark suite: base scenario, 38 archetypes, seeded numeric variants and
//! prompt renderings.

mod archetypes;
pub mod prng;
pub mod prompt;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scenario::{Costs, Limit, Network, OrderingRules, ScenarioInstance};

pub use archetypes::{archetype, archetypes, Archetype};
pub use prompt::{render_prompt, PromptFormat};

/// Default perturbation intensity.
pub const DEFAULT_ALPHA: f64 = 0.15;
pub const VARIANTS_PER_ARCHETYPE: u8 = 5;
pub const SUITE_PREFIX: &str = "retail_";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),
    #[error("variant index {0} outside 0..=4")]
    BadVariantIndex(u8),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::F1,
        Family::F2,
        Family::F3,
        Family::F4,
        Family::F5,
        Family::F6,
        Family::F7,
        Family::F8,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Family::F1 => "Core Operations",
            Family::F2 => "Assortment",
            Family::F3 => "Resources",
            Family::F4 => "Dynamics",
            Family::F5 => "Feasibility Stress",
            Family::F6 => "Discrete Logistics",
            Family::F7 => "Network & Multi-Echelon",
            Family::F8 => "Omni-channel",
        }
    }

    /// Family of an archetype id or instance name such as `retail_f6_moq_binary_v2`.
    pub fn of_name(name: &str) -> Option<Family> {
        let rest = name.strip_prefix(SUITE_PREFIX).unwrap_or(name);
        let tag = rest.split('_').next()?;
        tag.to_ascii_uppercase().parse().ok()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown family `{s}`"))
    }
}

const BASE_PRODUCTS: [&str; 3] = ["SKU_Basic", "SKU_Premium", "SKU_ShortLife"];
const BASE_LOCATIONS: [&str; 5] = ["DC1", "DC2", "DC3", "DC4", "DC5"];
const BASE_PERIODS: usize = 20;

/// Seasonal aggregate demand for one product in 0-indexed period `t`.
pub fn seasonal_demand(multiplier: f64, t: usize) -> f64 {
    let offset = t as f64 - 10.0;
    (multiplier * (1000.0 * (-(offset * offset) / 18.0).exp()) + multiplier * 300.0).floor()
}

pub fn base_scenario() -> ScenarioInstance {
    let t = BASE_PERIODS;
    let products: Vec<String> = BASE_PRODUCTS.iter().map(|s| s.to_string()).collect();
    let locations: Vec<String> = BASE_LOCATIONS.iter().map(|s| s.to_string()).collect();
    let demand_curve = [1.0, 0.5, 0.4]
        .iter()
        .map(|&m| (0..t).map(|i| seasonal_demand(m, i)).collect())
        .collect();
    let production_cap = [800.0, 400.0, 500.0].iter().map(|&c| vec![c; t]).collect();
    ScenarioInstance {
        name: "retail_f1_base".into(),
        description: "Standard seasonal retail scenario.".into(),
        periods: t,
        shelf_life: vec![10, 8, 4],
        lead_time: vec![0, 0, 0],
        demand_curve,
        demand_share: vec![0.25, 0.2, 0.2, 0.2, 0.15],
        production_cap,
        cold_capacity: vec![4000.0, 3500.0, 3000.0, 3000.0, 2500.0],
        cold_usage: vec![1.0, 3.0, 1.2],
        labor_cap: vec![vec![99999.0; t]; locations.len()],
        labor_usage: vec![0.0; 3],
        return_rate: vec![0.0; 3],
        costs: Costs {
            purchasing: vec![10.0, 20.0, 15.0],
            inventory: vec![1.0, 1.5, 1.0],
            waste: vec![2.0, 3.0, 2.0],
            lost_sales: vec![50.0, 80.0, 40.0],
            fixed_order: 0.0,
            transshipment: 0.5,
        },
        constraints: OrderingRules {
            moq: 0.0,
            pack_size: 1,
            budget_per_period: Limit::Inactive,
            waste_limit_pct: Limit::Inactive,
        },
        network: Network {
            sub_edges: vec![(0, 1)],
            trans_edges: Vec::new(),
        },
        products,
        locations,
    }
}

/// Base scenario with one archetype's modification applied. The instance keeps
/// the archetype's full name (`retail_{id}`) without a variant suffix.
pub fn apply_archetype(archetype_id: &str) -> Result<ScenarioInstance, BenchError> {
    let id = archetype_id.strip_prefix(SUITE_PREFIX).unwrap_or(archetype_id);
    let arch = archetype(id).ok_or_else(|| BenchError::UnknownArchetype(archetype_id.into()))?;
    let mut inst = base_scenario();
    (arch.modify)(&mut inst);
    inst.name = arch.full_name();
    Ok(inst)
}

/// Seed for variant `v` of the archetype with full name `archetype_name`.
pub fn variant_seed(archetype_name: &str, v: u8) -> u32 {
    let digest = Sha256::digest(format!("{archetype_name}|{v}").as_bytes());
    u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]])
}

/// Numeric variant `v` of an instance: demand curves (product order, then period
/// order) and cold capacities (location order) are scaled by uniform draws on
/// `[1 - alpha, 1 + alpha]`, demand floored.
pub fn perturb_variant(
    inst: &ScenarioInstance,
    archetype_name: &str,
    v: u8,
    alpha: f64,
) -> Result<ScenarioInstance, BenchError> {
    if v >= VARIANTS_PER_ARCHETYPE {
        return Err(BenchError::BadVariantIndex(v));
    }
    let mut out = inst.clone();
    if v == 0 {
        return Ok(out);
    }
    let mut rng = prng::Pcg64::from_seed(variant_seed(archetype_name, v));
    let (low, high) = (1.0 - alpha, 1.0 + alpha);
    for row in out.demand_curve.iter_mut() {
        for d in row.iter_mut() {
            *d = (*d * rng.uniform(low, high)).floor();
        }
    }
    for c in out.cold_capacity.iter_mut() {
        *c *= rng.uniform(low, high);
    }
    Ok(out)
}

pub fn instance_name(archetype_name: &str, v: u8) -> String {
    format!("{archetype_name}_v{v}")
}

/// Every suite instance in archetype registry order, variants 0..=4.
pub fn suite_instances() -> Vec<ScenarioInstance> {
    archetypes()
        .iter()
        .flat_map(|arch| {
            let name = arch.full_name();
            let base = apply_archetype(arch.id).expect("registered archetype");
            (0..VARIANTS_PER_ARCHETYPE).map(move |v| {
                let mut inst =
                    perturb_variant(&base, &name, v, DEFAULT_ALPHA).expect("variant in range");
                inst.name = instance_name(&name, v);
                inst
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub instance: String,
    pub family: Family,
    pub archetype: String,
    pub variant: u8,
    pub json: String,
    pub schema_prompt: String,
    pub full_prompt: String,
}

/// Write the full suite plus `manifest.json` into `output_dir`.
pub fn generate_suite(output_dir: &Path) -> Result<Vec<ManifestEntry>, BenchError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    let mut manifest = Vec::new();
    for inst in suite_instances() {
        let family = Family::of_name(&inst.name).expect("suite names carry a family");
        let (archetype, variant) = split_variant(&inst.name).expect("suite names carry a variant");
        let entry = ManifestEntry {
            instance: inst.name.clone(),
            family,
            archetype: archetype.to_string(),
            variant,
            json: format!("{}.json", inst.name),
            schema_prompt: format!("{}.scenario.txt", inst.name),
            full_prompt: format!("{}.full.txt", inst.name),
        };
        let files = [
            (&entry.json, inst.to_json_pretty()),
            (&entry.schema_prompt, render_prompt(&inst, PromptFormat::SchemaBased)),
            (&entry.full_prompt, render_prompt(&inst, PromptFormat::DataEmbedded)),
        ];
        for (file, body) in files {
            let path = output_dir.join(file);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        manifest.push(entry);
    }
    let path = output_dir.join("manifest.json");
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    fs::write(&path, body).map_err(io_err(&path))?;
    Ok(manifest)
}

/// `retail_f1_base_v3` → (`retail_f1_base`, 3).
pub fn split_variant(instance: &str) -> Option<(&str, u8)> {
    let (stem, v) = instance.rsplit_once("_v")?;
    let v: u8 = v.parse().ok()?;
    (v < VARIANTS_PER_ARCHETYPE).then_some((stem, v))
}
