//! The two prompt renderings of a suite instance.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioInstance;

use super::{archetype, split_variant, Family, SUITE_PREFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFormat {
    /// Narrative plus type-level schema; data arrives at runtime as `data`.
    SchemaBased,
    /// Narrative plus the full instance JSON inline.
    DataEmbedded,
}

impl PromptFormat {
    pub fn file_suffix(self) -> &'static str {
        match self {
            PromptFormat::SchemaBased => "scenario.txt",
            PromptFormat::DataEmbedded => "full.txt",
        }
    }
}

impl FromStr for PromptFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schema" | "schema_based" | "scenario" => Ok(PromptFormat::SchemaBased),
            "full" | "data_embedded" | "embedded" => Ok(PromptFormat::DataEmbedded),
            other => Err(format!("unknown prompt format `{other}` (expected schema|full)")),
        }
    }
}

const DATA_SCHEMA: &str = r#"{
  "name": str, "description": str,
  "periods": int,       "products": [str, ...],  "locations": [str, ...],
  "shelf_life": {p: int},  "lead_time": {p: int},
  "demand_curve": {p: [float, ...]},
  "demand_share": {l: float},
  "production_cap": {p: [float, ...]},
  "cold_capacity": {l: float},  "cold_usage": {p: float},
  "labor_cap": {l: [float, ...]},  "labor_usage": {p: float},
  "return_rate": {p: float},
  "costs": { "purchasing": {p: float}, "inventory": {p: float},
             "waste": {p: float}, "lost_sales": {p: float},
             "fixed_order": float, "transshipment": float },
  "constraints": { "moq": float, "pack_size": int,
                   "budget_per_period": float|null,
                   "waste_limit_pct": float|null },
  "network": { "sub_edges": [[p_from, p_to], ...],
               "trans_edges": [[l_from, l_to], ...] }
}"#;

const DATA_ACCESS: &str = "- The variable `data` is pre-loaded. Do NOT use file I/O.
- Lists are 0-indexed (period t in model uses index [t-1] in
  data arrays)

CRITICAL - Network edges require tuple conversion for Gurobi:
  sub_edges = [tuple(e) for e in
               data.get('network', {}).get('sub_edges', [])]
  trans_edges = [tuple(e) for e in
               data.get('network', {}).get('trans_edges', [])]";

const STATUS_LINES: &str = "- Set Gurobi params: m.Params.OutputFlag = 0;
  m.Params.Threads = 1; m.Params.Seed = 0
- Print at end:
  print(f\"status: {m.Status}\")
  if m.Status == 2:
      print(f\"objective: {m.ObjVal}\")
- Output ONLY executable Python code. No markdown, no explanations.";

/// Render one prompt. Both formats share the `[SCENARIO]` and
/// `[BUSINESS DESCRIPTION]` sections byte for byte.
pub fn render_prompt(inst: &ScenarioInstance, format: PromptFormat) -> String {
    let mut out = String::new();
    out.push_str(&scenario_header(inst));
    out.push_str("\n[BUSINESS DESCRIPTION]\n");
    out.push_str(&business_description(inst));
    match format {
        PromptFormat::SchemaBased => {
            out.push_str("\n[DATA SCHEMA]\n");
            out.push_str(DATA_SCHEMA);
            out.push_str("\n\n[DATA ACCESS]\n");
            out.push_str(DATA_ACCESS);
            out.push_str("\n\n[OUTPUT FORMAT]\n");
            out.push_str("- Import: import gurobipy as gp; from gurobipy import GRB\n");
            out.push_str(STATUS_LINES);
            out.push_str("\n\n[TASK]\nWrite a GurobiPy script that models and solves this optimization\nproblem.\n");
        }
        PromptFormat::DataEmbedded => {
            out.push_str("\n[DATA]\nThe following JSON contains all instance data. Parse it directly\nin your code.\n\n```json\n");
            out.push_str(&inst.to_json_pretty());
            out.push_str("```\n\n[OUTPUT FORMAT]\n");
            out.push_str("- Import: import gurobipy as gp; from gurobipy import GRB;\n  import json\n");
            out.push_str(STATUS_LINES);
            out.push_str("\n\n[TASK]\nWrite a GurobiPy script that:\n1. Parses the JSON data above (use json.loads on the string)\n2. Models and solves the optimization problem\n3. Prints status and objective value\n");
        }
    }
    out
}

fn archetype_stem(inst: &ScenarioInstance) -> String {
    split_variant(&inst.name)
        .map(|(stem, _)| stem.to_string())
        .unwrap_or_else(|| inst.name.clone())
}

fn scenario_header(inst: &ScenarioInstance) -> String {
    let stem = archetype_stem(inst);
    let family = Family::of_name(&stem);
    let family_line = match family {
        Some(f) => format!("{f} ({})", f.title()),
        None => "unassigned".to_string(),
    };
    format!(
        "[SCENARIO]\nFamily: {family_line}\nArchetype: {stem}\nScenario ID: {}\n",
        inst.name
    )
}

fn family_narrative(family: Option<Family>) -> &'static str {
    match family {
        Some(Family::F1) | None => {
            "A regional grocery retailer plans replenishment of three perishable
products across its distribution centers. Seasonal demand rises toward
the middle of the horizon and falls afterwards. Each center keeps its
own refrigerated stock, and each product has a per-period production
limit. Customers are never backordered: demand that cannot be served in
a period is lost and penalized."
        }
        Some(Family::F2) => {
            "The retailer manages an assortment of related products whose
shoppers will sometimes accept an alternative when their first choice
is out of stock. Shelf space and cold storage are shared by the whole
assortment, so stocking one product crowds out another. Unserved demand
is lost and penalized."
        }
        Some(Family::F3) => {
            "The retailer runs its network against several physical resources at
once: refrigerated space at each center, per-product supply from the
producer, and the volume each unit occupies. Plans must respect every
resource in every period, and unserved demand is lost and penalized."
        }
        Some(Family::F4) => {
            "The retailer faces a horizon in which supply and demand shift over
time. Decisions taken in one period change what is on hand in the
next, so shortages and surpluses propagate forward through the aging
stock. Unserved demand is lost and penalized."
        }
        Some(Family::F5) => {
            "The retailer is operating under severe stress. Demand, storage or
supply is far out of balance, and the business still has to publish a
plan: whatever cannot be served is lost at a penalty, but the plan
itself must remain executable."
        }
        Some(Family::F6) => {
            "The retailer buys from suppliers with discrete ordering terms. Orders
may be subject to delivery delays, minimum quantities, a fixed charge
per order placed, or whole-pack multiples. Unserved demand is lost and
penalized."
        }
        Some(Family::F7) => {
            "The retailer operates a connected network of sites that can move
fresh stock between each other at a per-unit cost. Ordering, budget
and routing decisions interact across locations. Unserved demand is
lost and penalized."
        }
        Some(Family::F8) => {
            "The retailer serves both store and online customers. Fulfilment
consumes handling labor at each site, some sold units come back as
returns, and the company tracks how much product it throws away.
Unserved demand is lost and penalized."
        }
    }
}

fn archetype_narrative(id: &str) -> &'static str {
    match id {
        "f1_base" => "This is the reference planning situation with default parameters.",
        "f1_high_waste" => "Disposal of expired product is now very expensive.",
        "f1_jit_logic" => "Carrying stock overnight is now very expensive, favoring just-in-time\nreplenishment.",
        "f1_52_weeks" => "The plan covers a full year of weekly decisions, fifty-two periods,\nrepeating the seasonal pattern.",
        "f2_no_substitution" => "Shoppers never switch products in this scenario.",
        "f2_circular_sub" => "Substitution runs in a ring: each product may cover the next one's\ndemand.",
        "f2_cannibalization" => "The basic product draws twice the usual demand at a low penalty for\nlosing a sale, and refrigerated space is halved.",
        "f2_ultra_fresh" => "Every product is ultra-fresh and keeps for only one or two periods.",
        "f2_price_band_tight" => "Premium is cheaper to buy than usual, basic is dearer, and a lost\npremium sale costs twice as much.",
        "f2_promo_budget" => "A promotion doubles basic and short-life demand over the final four\nperiods while purchasing spend is capped each period.",
        "f3_storage_bottleneck" => "Refrigerated space at every center is cut to a fraction of normal.",
        "f3_volumetric_constraint" => "The premium product is bulky and occupies far more cold space per\nunit.",
        "f3_supply_bottleneck" => "Producer supply is cut sharply while storage is effectively\nunlimited.",
        "f3_unbalanced_network" => "Nearly all refrigerated space sits at one center; the others have\nalmost none.",
        "f4_early_stockout" => "Nothing can be produced during the first five periods.",
        "f4_peak_failure" => "Production stops entirely during the peak-demand window, periods 9\nto 12.",
        "f4_demand_surge" => "Demand spikes to four times its usual level in period 15.",
        "f4_quality_hold" => "A quality hold stops production of the basic product from period 11\nonward.",
        "f4_robust_variance" => "Demand alternates between high and low periods, and lost sales are\npenalized more heavily.",
        "f4_supply_risk" => "Supply is reduced for four mid-horizon periods and expired product\ncosts more to dispose of.",
        "f5_impossible_demand" => "Demand is five times the usual level, far beyond what can be\nproduced.",
        "f5_strict_service_trap" => "Refrigerated space is almost gone at every center.",
        "f5_storage_overflow" => "Each center has only half a unit of refrigerated space.",
        "f5_ultimate_stress" => "Storage is cut, production fails during the peak window, and\nshoppers will not switch products.",
        "f6_lead_time" => "Orders arrive several periods after they are placed, with a\ndifferent delay for each product.",
        "f6_moq_binary" => "Any order that is placed must meet a minimum order quantity.",
        "f6_fixed_order_cost" => "Every order placed incurs a large fixed charge.",
        "f6_pack_size_integer" => "Orders must be placed in whole packs.",
        "f7_transshipment" => "Any center may ship fresh stock to any other center.",
        "f7_hub_and_spoke" => "One large hub holds most of the space and supplies four small spokes.",
        "f7_budget_limit" => "Purchasing spend is capped in every period.",
        "f7_multi_sourcing" => "Products come from sources with very different delivery delays and\nholding costs.",
        "f7_multiechelon_chain" => "Product flows from a plant through two regional centers to three\nstores, and only the stores face customer demand.",
        "f7_ring_routing" => "Centers are linked in a one-way ring for transfers, and storage is\nreduced.",
        "f8_reverse_logistics" => "A share of each period's sales comes back in the following period and\ncan be resold as fresh stock.",
        "f8_labor_constraint" => "Each site has a small handling-labor budget per period and every unit\nsold consumes labor.",
        "f8_ship_from_store" => "Stores act as fulfilment points: storage is ample but picking and\npacking uses significant labor.",
        "f8_sustainability" => "Total waste over the horizon may not exceed a small share of total\ndemand.",
        _ => "",
    }
}

fn business_description(inst: &ScenarioInstance) -> String {
    let stem = archetype_stem(inst);
    let id = stem.strip_prefix(SUITE_PREFIX).unwrap_or(&stem);
    let family = Family::of_name(&stem);
    let mut s = String::from("Business narrative:\n");
    s.push_str(family_narrative(family));
    s.push('\n');
    let specific = if archetype(id).is_some() {
        archetype_narrative(id)
    } else {
        ""
    };
    if !specific.is_empty() {
        s.push_str(specific);
        s.push('\n');
    }
    s.push_str("\nStructure cues:\n");
    for cue in structure_cues(inst) {
        s.push_str(&cue);
        s.push('\n');
    }
    s
}

fn structure_cues(inst: &ScenarioInstance) -> Vec<String> {
    let mut cues = Vec::new();
    let has_lead = inst.lead_time.iter().any(|&l| l > 0);
    let has_trans = !inst.network.trans_edges.is_empty();
    let has_returns = inst.return_rate.iter().any(|&r| r > 0.0);

    cues.push(format!(
        "- Horizon: {} periods; {} products; {} locations. Location demand is\n  demand_curve[p][t-1] * demand_share[l].",
        inst.periods,
        inst.products.len(),
        inst.locations.len()
    ));

    let mut inflow = String::from("Q[p,l,t");
    if has_lead {
        inflow.push_str("-LT[p]");
    }
    inflow.push(']');
    if has_trans {
        inflow.push_str(" + inbound[p,l,t] - outbound[p,l,t]");
    }
    if has_returns {
        inflow.push_str(" + returns[p,l,t]");
    }
    let mut shelf = String::new();
    let _ = write!(
        shelf,
        "- Shelf life: Each product has a shelf life in periods.
  Inventory must be tracked by REMAINING LIFE.

  VARIABLE DEFINITION: I[p,l,t,r] = inventory at START of period t
  with r periods remaining.
  Convention: r=1 is OLDEST (sell first FIFO),
              r=shelf_life[p] is FRESHEST.

  KEY EQUATIONS - implement EXACTLY as written, do NOT add or
  remove terms:

  (1) Fresh inflow: I[p,l,t,SL] = {inflow}
      - This is ONLY the inflow from ordering. Do NOT subtract
        sales here!
  (2) Aging: I[p,l,t+1,r] = I[p,l,t,r+1] - sales[p,l,t,r+1]
      for r=1..SL-1
  (3) Waste: W[p,l,t] = I[p,l,t,1] - sales[p,l,t,1]
  (4) Sales availability: sales[p,l,t,r] <= I[p,l,t,r]
  (5) Inventory holding cost: charged on
      (I[p,l,t,r] - sales[p,l,t,r]) for r >= 2"
    );
    cues.push(shelf);

    if inst.network.sub_edges.is_empty() {
        cues.push("- No substitution between products in this scenario.".into());
    } else {
        cues.push(
            "- Substitution: Edge [p_from, p_to] means p_from's demand can
  be served by p_to's inventory.
  Variable sub[p_from, p_to, l, t] = units of p_from's demand
  fulfilled by p_to.

  Demand fulfillment equation:
  - For p_from: total_sales[p_from] + sub[p_from, p_to]
                + L[p_from] = demand[p_from]
  - For p_to:   total_sales[p_to] - sub[p_from, p_to]
                + L[p_to]   = demand[p_to]"
                .into(),
        );
    }

    cues.push(
        "- Storage: volume-weighted start-of-period inventory at each location
  may not exceed its cold capacity."
            .into(),
    );
    cues.push(
        "- Supply: total arrivals of a product across locations in a period
  may not exceed its production capacity for that period."
            .into(),
    );

    match (has_trans, has_lead) {
        (false, false) => {
            cues.push("- No transshipment and zero lead times in this scenario.".into())
        }
        (true, false) => cues.push(
            "- Transshipment: fresh stock may move along the listed directed edges
  in the period it arrives, at the per-unit transshipment cost. Lead
  times are zero."
                .into(),
        ),
        (false, true) => cues.push(
            "- Lead time: an order placed in period t arrives in period
  t + lead_time[p]; orders that would arrive before period 1 do not
  exist. No transshipment in this scenario."
                .into(),
        ),
        (true, true) => cues.push(
            "- Lead time: an order placed in period t arrives in period
  t + lead_time[p]. Transshipment moves fresh stock along the listed
  directed edges at the per-unit transshipment cost."
                .into(),
        ),
    }
    if inst.labor_usage.iter().any(|&h| h > 0.0) {
        cues.push(
            "- Labor: each unit sold uses labor_usage[p] hours; hours per location
  and period are limited by labor_cap."
                .into(),
        );
    }
    if has_returns {
        cues.push(
            "- Returns: return_rate[p] of the units sold in period t-1 re-enter
  fresh inventory in period t."
                .into(),
        );
    }
    if inst.constraints.moq > 0.0 {
        cues.push("- Minimum order: each order is either zero or at least moq units.".into());
    }
    if inst.constraints.pack_size > 1 {
        cues.push("- Pack size: order quantities are whole multiples of pack_size.".into());
    }
    if inst.costs.fixed_order > 0.0 {
        cues.push("- Fixed ordering cost: each order placed incurs fixed_order.".into());
    }
    if inst.constraints.budget_per_period.is_active() {
        cues.push(
            "- Budget: purchasing spend (including fixed order charges) in each
  period may not exceed budget_per_period."
                .into(),
        );
    }
    if inst.constraints.waste_limit_pct.is_active() {
        cues.push(
            "- Waste cap: total waste over the horizon may not exceed
  waste_limit_pct times total demand."
                .into(),
        );
    }
    cues.push(
        "- The objective is to minimize total cost over the horizon,
  aggregating purchasing, holding, waste, and lost sales costs
  together with any fixed ordering and transshipment costs."
            .into(),
    );
    cues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{apply_archetype, instance_name};

    fn weeks() -> ScenarioInstance {
        let mut inst = apply_archetype("f1_52_weeks").unwrap();
        inst.name = instance_name(&inst.name, 0);
        inst
    }

    fn section<'a>(prompt: &'a str, header: &str) -> &'a str {
        let start = prompt.find(header).unwrap();
        let rest = &prompt[start..];
        let end = rest[header.len()..]
            .find("\n[")
            .map(|i| i + header.len())
            .unwrap_or(rest.len());
        &rest[..end]
    }

    #[test]
    fn schema_prompt_sections() {
        let p = render_prompt(&weeks(), PromptFormat::SchemaBased);
        assert!(p.contains("[DATA ACCESS]"));
        assert!(p.contains("The variable `data` is pre-loaded"));
        assert!(p.contains("[DATA SCHEMA]"));
        assert!(!p.contains("\n[DATA]\n"));
        assert!(p.starts_with("[SCENARIO]\nFamily: F1 (Core Operations)\nArchetype: retail_f1_52_weeks\nScenario ID: retail_f1_52_weeks_v0\n"));
    }

    #[test]
    fn embedded_prompt_sections() {
        let p = render_prompt(&weeks(), PromptFormat::DataEmbedded);
        assert!(p.contains("\n[DATA]\n"));
        assert!(p.contains("\"periods\": 52"));
        assert!(!p.contains("[DATA SCHEMA]"));
        assert!(!p.contains("[DATA ACCESS]"));
        assert!(p.contains("use json.loads on the string"));
    }

    #[test]
    fn section_order() {
        for fmt in [PromptFormat::SchemaBased, PromptFormat::DataEmbedded] {
            let p = render_prompt(&weeks(), fmt);
            let order: Vec<usize> = ["[SCENARIO]", "[BUSINESS DESCRIPTION]", "[OUTPUT FORMAT]", "[TASK]"]
                .iter()
                .map(|h| p.find(h).unwrap())
                .collect();
            assert!(order.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn business_description_is_shared() {
        let inst = weeks();
        let a = render_prompt(&inst, PromptFormat::SchemaBased);
        let b = render_prompt(&inst, PromptFormat::DataEmbedded);
        assert_eq!(
            section(&a, "[BUSINESS DESCRIPTION]"),
            section(&b, "[BUSINESS DESCRIPTION]")
        );
        assert_eq!(section(&a, "[SCENARIO]"), section(&b, "[SCENARIO]"));
    }

    #[test]
    fn cues_follow_active_mechanisms() {
        let p = render_prompt(&apply_archetype("f7_transshipment").unwrap(), PromptFormat::SchemaBased);
        assert!(p.contains("inbound[p,l,t] - outbound[p,l,t]"));
        let p = render_prompt(&apply_archetype("f2_no_substitution").unwrap(), PromptFormat::SchemaBased);
        assert!(p.contains("No substitution between products"));
        let p = render_prompt(&apply_archetype("f6_lead_time").unwrap(), PromptFormat::SchemaBased);
        assert!(p.contains("Q[p,l,t-LT[p]]"));
    }
}
