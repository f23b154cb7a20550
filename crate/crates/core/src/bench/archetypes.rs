use crate::scenario::{Limit, ScenarioInstance};

use super::{Family, SUITE_PREFIX};

/// One structural modification of the base scenario.
#[derive(Clone, Copy)]
pub struct Archetype {
    pub id: &'static str,
    pub family: Family,
    pub summary: &'static str,
    /// Record fields (dotted for nested objects) the modifier is allowed to touch.
    pub fields: &'static [&'static str],
    pub modify: fn(&mut ScenarioInstance),
}

impl Archetype {
    pub fn full_name(&self) -> String {
        format!("{SUITE_PREFIX}{}", self.id)
    }
}

impl std::fmt::Debug for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Archetype")
            .field("id", &self.id)
            .field("family", &self.family)
            .finish()
    }
}

fn scale(xs: &mut [f64], factor: f64) {
    xs.iter_mut().for_each(|x| *x *= factor);
}

fn scale_periods(rows: &mut [Vec<f64>], periods: std::ops::Range<usize>, factor: f64) {
    for row in rows {
        for x in &mut row[periods.clone()] {
            *x *= factor;
        }
    }
}

fn tile(row: &[f64], len: usize) -> Vec<f64> {
    row.iter().copied().cycle().take(len).collect()
}

const PEAK_WINDOW: std::ops::Range<usize> = 8..12;

fn ring(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

static ARCHETYPES: &[Archetype] = &[
    // F1
    Archetype {
        id: "f1_base",
        family: Family::F1,
        summary: "baseline seasonal scenario",
        fields: &[],
        modify: |_| {},
    },
    Archetype {
        id: "f1_high_waste",
        family: Family::F1,
        summary: "waste cost x20",
        fields: &["costs.waste"],
        modify: |s| scale(&mut s.costs.waste, 20.0),
    },
    Archetype {
        id: "f1_jit_logic",
        family: Family::F1,
        summary: "holding cost x20",
        fields: &["costs.inventory"],
        modify: |s| scale(&mut s.costs.inventory, 20.0),
    },
    Archetype {
        id: "f1_52_weeks",
        family: Family::F1,
        summary: "52-period horizon with tiled arrays",
        fields: &["periods", "demand_curve", "production_cap", "labor_cap"],
        modify: |s| {
            let t = 52;
            s.periods = t;
            for rows in [&mut s.demand_curve, &mut s.production_cap, &mut s.labor_cap] {
                for row in rows.iter_mut() {
                    *row = tile(row, t);
                }
            }
        },
    },
    // F2
    Archetype {
        id: "f2_no_substitution",
        family: Family::F2,
        summary: "substitution edges removed",
        fields: &["network.sub_edges"],
        modify: |s| s.network.sub_edges.clear(),
    },
    Archetype {
        id: "f2_circular_sub",
        family: Family::F2,
        summary: "substitution ring Basic->Premium->ShortLife->Basic",
        fields: &["network.sub_edges"],
        modify: |s| s.network.sub_edges = ring(3),
    },
    Archetype {
        id: "f2_cannibalization",
        family: Family::F2,
        summary: "Basic demand x2, Basic lost-sales penalty 5, storage x0.5",
        fields: &["demand_curve", "costs.lost_sales", "cold_capacity"],
        modify: |s| {
            scale(&mut s.demand_curve[0], 2.0);
            s.costs.lost_sales[0] = 5.0;
            scale(&mut s.cold_capacity, 0.5);
        },
    },
    Archetype {
        id: "f2_ultra_fresh",
        family: Family::F2,
        summary: "shelf life {2,2,1}",
        fields: &["shelf_life"],
        modify: |s| s.shelf_life = vec![2, 2, 1],
    },
    Archetype {
        id: "f2_price_band_tight",
        family: Family::F2,
        summary: "Premium buy x0.8, Basic buy x1.1, Premium lost-sales x2",
        fields: &["costs.purchasing", "costs.lost_sales"],
        modify: |s| {
            s.costs.purchasing[1] *= 0.8;
            s.costs.purchasing[0] *= 1.1;
            s.costs.lost_sales[1] *= 2.0;
        },
    },
    Archetype {
        id: "f2_promo_budget",
        family: Family::F2,
        summary: "last four periods Basic/ShortLife demand x2, budget 15000",
        fields: &["demand_curve", "constraints.budget_per_period"],
        modify: |s| {
            let t = s.periods;
            for p in [0, 2] {
                for d in &mut s.demand_curve[p][t - 4..] {
                    *d *= 2.0;
                }
            }
            s.constraints.budget_per_period = Limit::Active(15000.0);
        },
    },
    // F3
    Archetype {
        id: "f3_storage_bottleneck",
        family: Family::F3,
        summary: "cold capacity x0.3",
        fields: &["cold_capacity"],
        modify: |s| scale(&mut s.cold_capacity, 0.3),
    },
    Archetype {
        id: "f3_volumetric_constraint",
        family: Family::F3,
        summary: "Premium cold usage 15",
        fields: &["cold_usage"],
        modify: |s| s.cold_usage[1] = 15.0,
    },
    Archetype {
        id: "f3_supply_bottleneck",
        family: Family::F3,
        summary: "production x0.3, storage 999999",
        fields: &["production_cap", "cold_capacity"],
        modify: |s| {
            let t = s.periods;
            scale_periods(&mut s.production_cap, 0..t, 0.3);
            s.cold_capacity.iter_mut().for_each(|c| *c = 999_999.0);
        },
    },
    Archetype {
        id: "f3_unbalanced_network",
        family: Family::F3,
        summary: "DC1 holds 96% of total storage, others 1% each",
        fields: &["cold_capacity"],
        modify: |s| {
            let total: f64 = s.cold_capacity.iter().sum();
            for (l, c) in s.cold_capacity.iter_mut().enumerate() {
                *c = total * if l == 0 { 0.96 } else { 0.01 };
            }
        },
    },
    // F4
    Archetype {
        id: "f4_early_stockout",
        family: Family::F4,
        summary: "no production in periods 1-5",
        fields: &["production_cap"],
        modify: |s| scale_periods(&mut s.production_cap, 0..5, 0.0),
    },
    Archetype {
        id: "f4_peak_failure",
        family: Family::F4,
        summary: "no production in periods 9-12",
        fields: &["production_cap"],
        modify: |s| scale_periods(&mut s.production_cap, PEAK_WINDOW, 0.0),
    },
    Archetype {
        id: "f4_demand_surge",
        family: Family::F4,
        summary: "period-15 demand x4",
        fields: &["demand_curve"],
        modify: |s| scale_periods(&mut s.demand_curve, 14..15, 4.0),
    },
    Archetype {
        id: "f4_quality_hold",
        family: Family::F4,
        summary: "no Basic production from period 11",
        fields: &["production_cap"],
        modify: |s| {
            for c in &mut s.production_cap[0][10..] {
                *c = 0.0;
            }
        },
    },
    Archetype {
        id: "f4_robust_variance",
        family: Family::F4,
        summary: "alternating demand x1.5 / x0.7, lost-sales x2.5",
        fields: &["demand_curve", "costs.lost_sales"],
        modify: |s| {
            for row in &mut s.demand_curve {
                for (t, d) in row.iter_mut().enumerate() {
                    let f = if t % 2 == 0 { 1.5 } else { 0.7 };
                    *d = (*d * f).floor();
                }
            }
            scale(&mut s.costs.lost_sales, 2.5);
        },
    },
    Archetype {
        id: "f4_supply_risk",
        family: Family::F4,
        summary: "production x0.4 in periods 9-12, waste cost x3",
        fields: &["production_cap", "costs.waste"],
        modify: |s| {
            scale_periods(&mut s.production_cap, PEAK_WINDOW, 0.4);
            scale(&mut s.costs.waste, 3.0);
        },
    },
    // F5
    Archetype {
        id: "f5_impossible_demand",
        family: Family::F5,
        summary: "all demand x5",
        fields: &["demand_curve"],
        modify: |s| {
            let t = s.periods;
            scale_periods(&mut s.demand_curve, 0..t, 5.0);
        },
    },
    Archetype {
        id: "f5_strict_service_trap",
        family: Family::F5,
        summary: "storage x0.1",
        fields: &["cold_capacity"],
        modify: |s| scale(&mut s.cold_capacity, 0.1),
    },
    Archetype {
        id: "f5_storage_overflow",
        family: Family::F5,
        summary: "cold capacity 0.5 everywhere",
        fields: &["cold_capacity"],
        modify: |s| s.cold_capacity.iter_mut().for_each(|c| *c = 0.5),
    },
    Archetype {
        id: "f5_ultimate_stress",
        family: Family::F5,
        summary: "storage x0.3, no production in periods 9-12, no substitution",
        fields: &["cold_capacity", "production_cap", "network.sub_edges"],
        modify: |s| {
            scale(&mut s.cold_capacity, 0.3);
            scale_periods(&mut s.production_cap, PEAK_WINDOW, 0.0);
            s.network.sub_edges.clear();
        },
    },
    // F6
    Archetype {
        id: "f6_lead_time",
        family: Family::F6,
        summary: "lead times {3,4,2}",
        fields: &["lead_time"],
        modify: |s| s.lead_time = vec![3, 4, 2],
    },
    Archetype {
        id: "f6_moq_binary",
        family: Family::F6,
        summary: "minimum order quantity 300",
        fields: &["constraints.moq"],
        modify: |s| s.constraints.moq = 300.0,
    },
    Archetype {
        id: "f6_fixed_order_cost",
        family: Family::F6,
        summary: "fixed ordering cost 5000",
        fields: &["costs.fixed_order"],
        modify: |s| s.costs.fixed_order = 5000.0,
    },
    Archetype {
        id: "f6_pack_size_integer",
        family: Family::F6,
        summary: "pack size 100",
        fields: &["constraints.pack_size"],
        modify: |s| s.constraints.pack_size = 100,
    },
    // F7
    Archetype {
        id: "f7_transshipment",
        family: Family::F7,
        summary: "transshipment between every ordered pair of DCs",
        fields: &["network.trans_edges"],
        modify: |s| {
            let n = s.locations.len();
            s.network.trans_edges = (0..n)
                .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
                .collect();
        },
    },
    Archetype {
        id: "f7_hub_and_spoke",
        family: Family::F7,
        summary: "hub DC1 50000 capacity feeding four 500-capacity spokes",
        fields: &["cold_capacity", "network.trans_edges"],
        modify: |s| {
            for (l, c) in s.cold_capacity.iter_mut().enumerate() {
                *c = if l == 0 { 50_000.0 } else { 500.0 };
            }
            s.network.trans_edges = (1..s.locations.len()).map(|l| (0, l)).collect();
        },
    },
    Archetype {
        id: "f7_budget_limit",
        family: Family::F7,
        summary: "per-period budget 10000",
        fields: &["constraints.budget_per_period"],
        modify: |s| s.constraints.budget_per_period = Limit::Active(10_000.0),
    },
    Archetype {
        id: "f7_multi_sourcing",
        family: Family::F7,
        summary: "lead times {5,0,1}, holding Basic 0.5 and Premium 10",
        fields: &["lead_time", "costs.inventory"],
        modify: |s| {
            s.lead_time = vec![5, 0, 1];
            s.costs.inventory[0] = 0.5;
            s.costs.inventory[1] = 10.0;
        },
    },
    Archetype {
        id: "f7_multiechelon_chain",
        family: Family::F7,
        summary: "plant, two DCs and three stores; demand only at stores",
        fields: &[
            "locations",
            "demand_share",
            "cold_capacity",
            "labor_cap",
            "network.trans_edges",
        ],
        modify: |s| {
            s.locations = ["Plant", "DC_North", "DC_South", "Store_A", "Store_B", "Store_C"]
                .iter()
                .map(|l| l.to_string())
                .collect();
            s.demand_share = vec![0.0, 0.0, 0.0, 0.4, 0.35, 0.25];
            s.cold_capacity = vec![20_000.0, 6000.0, 6000.0, 1500.0, 1500.0, 1500.0];
            s.labor_cap = vec![vec![99999.0; s.periods]; 6];
            s.network.trans_edges = vec![(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)];
        },
    },
    Archetype {
        id: "f7_ring_routing",
        family: Family::F7,
        summary: "transshipment ring DC1->...->DC5->DC1, storage x0.8",
        fields: &["cold_capacity", "network.trans_edges"],
        modify: |s| {
            scale(&mut s.cold_capacity, 0.8);
            s.network.trans_edges = ring(s.locations.len());
        },
    },
    // F8
    Archetype {
        id: "f8_reverse_logistics",
        family: Family::F8,
        summary: "return rates {0.20,0.10,0.05}",
        fields: &["return_rate"],
        modify: |s| s.return_rate = vec![0.2, 0.1, 0.05],
    },
    Archetype {
        id: "f8_labor_constraint",
        family: Family::F8,
        summary: "labor cap 200 per period, usage {0.1,0.2,0.1}",
        fields: &["labor_cap", "labor_usage"],
        modify: |s| {
            s.labor_cap.iter_mut().flatten().for_each(|h| *h = 200.0);
            s.labor_usage = vec![0.1, 0.2, 0.1];
        },
    },
    Archetype {
        id: "f8_ship_from_store",
        family: Family::F8,
        summary: "storage x5, labor cap 500, usage {0.5,0.8,0.6}",
        fields: &["cold_capacity", "labor_cap", "labor_usage"],
        modify: |s| {
            scale(&mut s.cold_capacity, 5.0);
            s.labor_cap.iter_mut().flatten().for_each(|h| *h = 500.0);
            s.labor_usage = vec![0.5, 0.8, 0.6];
        },
    },
    Archetype {
        id: "f8_sustainability",
        family: Family::F8,
        summary: "total waste at most 2% of total demand",
        fields: &["constraints.waste_limit_pct"],
        modify: |s| s.constraints.waste_limit_pct = Limit::Active(0.02),
    },
];

/// The 38 registered archetypes in family order.
pub fn archetypes() -> &'static [Archetype] {
    ARCHETYPES
}

/// Look up by short id (`f3_storage_bottleneck`).
pub fn archetype(id: &str) -> Option<&'static Archetype> {
    ARCHETYPES.iter().find(|a| a.id == id)
}
