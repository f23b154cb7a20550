//! Reference perishable-inventory MILP for any [`ScenarioInstance`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scenario::{Limit, ScenarioInstance};
use crate::solver::{
    self, Backend, Domain, ModelSpec, ObjectiveSense, RowSense, SolveParams, SolveResult,
    SolveStatus, SolverError, VarId,
};

/// Big-M linking order quantity and order trigger.
pub const BIG_M: f64 = 1e6;
/// Residual above which a flow-conservation violation is reported.
pub const FLOW_TOLERANCE: f64 = 1e-6;

/// Constraint groups that can be left out of the model (mutation testing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Init,
    FreshInflow,
    Aging,
    Expiration,
    Availability,
    Demand,
    SubstitutionBound,
    Production,
    Storage,
    Labor,
    Budget,
    WasteCap,
    Moq,
    PackSize,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 14] = [
        ConstraintFamily::Init,
        ConstraintFamily::FreshInflow,
        ConstraintFamily::Aging,
        ConstraintFamily::Expiration,
        ConstraintFamily::Availability,
        ConstraintFamily::Demand,
        ConstraintFamily::SubstitutionBound,
        ConstraintFamily::Production,
        ConstraintFamily::Storage,
        ConstraintFamily::Labor,
        ConstraintFamily::Budget,
        ConstraintFamily::WasteCap,
        ConstraintFamily::Moq,
        ConstraintFamily::PackSize,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ConstraintFamily::Init => "init",
            ConstraintFamily::FreshInflow => "fresh",
            ConstraintFamily::Aging => "aging",
            ConstraintFamily::Expiration => "expire",
            ConstraintFamily::Availability => "avail",
            ConstraintFamily::Demand => "demand",
            ConstraintFamily::SubstitutionBound => "subcap",
            ConstraintFamily::Production => "production",
            ConstraintFamily::Storage => "storage",
            ConstraintFamily::Labor => "labor",
            ConstraintFamily::Budget => "budget",
            ConstraintFamily::WasteCap => "wastecap",
            ConstraintFamily::Moq => "moq",
            ConstraintFamily::PackSize => "pack",
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ConstraintFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintFamily::ALL
            .iter()
            .copied()
            .find(|c| c.key() == s)
            .ok_or_else(|| format!("unknown constraint family `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveTerm {
    Purchasing,
    Holding,
    Waste,
    LostSales,
    FixedOrder,
    Transshipment,
}

impl ObjectiveTerm {
    pub const ALL: [ObjectiveTerm; 6] = [
        ObjectiveTerm::Purchasing,
        ObjectiveTerm::Holding,
        ObjectiveTerm::Waste,
        ObjectiveTerm::LostSales,
        ObjectiveTerm::FixedOrder,
        ObjectiveTerm::Transshipment,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ObjectiveTerm::Purchasing => "purchasing",
            ObjectiveTerm::Holding => "holding",
            ObjectiveTerm::Waste => "waste",
            ObjectiveTerm::LostSales => "lost_sales",
            ObjectiveTerm::FixedOrder => "fixed_order",
            ObjectiveTerm::Transshipment => "transshipment",
        }
    }
}

impl FromStr for ObjectiveTerm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectiveTerm::ALL
            .iter()
            .copied()
            .find(|t| t.key() == s)
            .ok_or_else(|| format!("unknown objective term `{s}`"))
    }
}

/// Which parts of the full formulation to build. The default builds everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub omit_constraints: BTreeSet<ConstraintFamily>,
    pub omit_terms: BTreeSet<ObjectiveTerm>,
}

impl BuildOptions {
    fn has(&self, c: ConstraintFamily) -> bool {
        !self.omit_constraints.contains(&c)
    }

    fn charges(&self, t: ObjectiveTerm) -> bool {
        !self.omit_terms.contains(&t)
    }
}

/// Variable handles of a built model. Time index `t` is 0-based here; bucket
/// index `k` is 0-based with `k = 0` the oldest bucket.
/// One two-level grid per network edge `(from, to)`.
pub type EdgeGrids<T> = Vec<((usize, usize), Vec<Vec<T>>)>;

#[derive(Debug, Clone)]
pub struct VarIndex {
    pub inventory: Vec<Vec<Vec<Vec<VarId>>>>,
    pub sales: Vec<Vec<Vec<Vec<VarId>>>>,
    pub orders: Vec<Vec<Vec<VarId>>>,
    pub waste: Vec<Vec<Vec<VarId>>>,
    pub lost: Vec<Vec<Vec<VarId>>>,
    /// Per substitution edge: `[l][t]`.
    pub substitution: EdgeGrids<VarId>,
    /// Per transshipment edge: `[p][t]`.
    pub transship: EdgeGrids<VarId>,
    pub triggers: Option<Vec<Vec<Vec<VarId>>>>,
    pub packs: Option<Vec<Vec<Vec<VarId>>>>,
}

#[derive(Debug, Clone)]
pub struct RetailModel {
    pub spec: ModelSpec,
    pub vars: VarIndex,
}

fn grid3<F: FnMut(usize, usize, usize) -> VarId>(a: usize, b: usize, c: usize, mut f: F) -> Vec<Vec<Vec<VarId>>> {
    (0..a)
        .map(|i| (0..b).map(|j| (0..c).map(|k| f(i, j, k)).collect()).collect())
        .collect()
}

/// Build the full reference model.
pub fn build_reference_model(inst: &ScenarioInstance) -> RetailModel {
    build_model_with(inst, &BuildOptions::default())
}

pub fn build_model_with(inst: &ScenarioInstance, opts: &BuildOptions) -> RetailModel {
    let np = inst.products.len();
    let nl = inst.locations.len();
    let nt = inst.periods;
    let pname = |p: usize| inst.products[p].as_str();
    let lname = |l: usize| inst.locations[l].as_str();
    let mut m = ModelSpec::new(ObjectiveSense::Minimize);

    let inventory: Vec<Vec<Vec<Vec<VarId>>>> = (0..np)
        .map(|p| {
            (0..nl)
                .map(|l| {
                    (0..nt)
                        .map(|t| {
                            (0..inst.shelf_life[p] as usize)
                                .map(|k| m.continuous(format!("I[{},{},{},{}]", pname(p), lname(l), t + 1, k + 1)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let sales: Vec<Vec<Vec<Vec<VarId>>>> = (0..np)
        .map(|p| {
            (0..nl)
                .map(|l| {
                    (0..nt)
                        .map(|t| {
                            (0..inst.shelf_life[p] as usize)
                                .map(|k| m.continuous(format!("y[{},{},{},{}]", pname(p), lname(l), t + 1, k + 1)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let orders = grid3(np, nl, nt, |p, l, t| m.continuous(format!("Q[{},{},{}]", pname(p), lname(l), t + 1)));
    let waste = grid3(np, nl, nt, |p, l, t| m.continuous(format!("W[{},{},{}]", pname(p), lname(l), t + 1)));
    let lost = grid3(np, nl, nt, |p, l, t| m.continuous(format!("L[{},{},{}]", pname(p), lname(l), t + 1)));
    let substitution: EdgeGrids<VarId> = inst
        .network
        .sub_edges
        .iter()
        .map(|&(a, b)| {
            let grid = (0..nl)
                .map(|l| {
                    (0..nt)
                        .map(|t| m.continuous(format!("S[{}->{},{},{}]", pname(a), pname(b), lname(l), t + 1)))
                        .collect()
                })
                .collect();
            ((a, b), grid)
        })
        .collect();
    let transship: EdgeGrids<VarId> = inst
        .network
        .trans_edges
        .iter()
        .map(|&(a, b)| {
            let grid = (0..np)
                .map(|p| {
                    (0..nt)
                        .map(|t| m.continuous(format!("X[{},{}->{},{}]", pname(p), lname(a), lname(b), t + 1)))
                        .collect()
                })
                .collect();
            ((a, b), grid)
        })
        .collect();
    let moq = inst.constraints.moq;
    let fixed = inst.costs.fixed_order;
    let triggers = (moq > 0.0 || fixed > 0.0).then(|| {
        grid3(np, nl, nt, |p, l, t| {
            m.add_var(format!("z[{},{},{}]", pname(p), lname(l), t + 1), Domain::Binary, 0.0, 1.0)
        })
    });
    let pack = inst.constraints.pack_size;
    let packs = (pack > 1).then(|| {
        grid3(np, nl, nt, |p, l, t| {
            m.add_var(format!("n[{},{},{}]", pname(p), lname(l), t + 1), Domain::Integer, 0.0, f64::INFINITY)
        })
    });

    // Objective.
    for p in 0..np {
        for l in 0..nl {
            for t in 0..nt {
                if opts.charges(ObjectiveTerm::Purchasing) {
                    m.add_objective_term(orders[p][l][t], inst.costs.purchasing[p]);
                }
                if opts.charges(ObjectiveTerm::Holding) {
                    let c = inst.costs.inventory[p];
                    for k in 1..inst.shelf_life[p] as usize {
                        m.add_objective_term(inventory[p][l][t][k], c);
                        m.add_objective_term(sales[p][l][t][k], -c);
                    }
                }
                if opts.charges(ObjectiveTerm::Waste) {
                    m.add_objective_term(waste[p][l][t], inst.costs.waste[p]);
                }
                if opts.charges(ObjectiveTerm::LostSales) {
                    m.add_objective_term(lost[p][l][t], inst.costs.lost_sales[p]);
                }
                if let Some(z) = &triggers {
                    if fixed > 0.0 && opts.charges(ObjectiveTerm::FixedOrder) {
                        m.add_objective_term(z[p][l][t], fixed);
                    }
                }
            }
        }
    }
    if opts.charges(ObjectiveTerm::Transshipment) {
        for (_, grid) in &transship {
            for x in grid.iter().flatten() {
                m.add_objective_term(*x, inst.costs.transshipment);
            }
        }
    }

    let arrival = |p: usize, l: usize, t: usize| -> Option<VarId> {
        let lt = inst.lead_time[p] as usize;
        (t >= lt).then(|| orders[p][l][t - lt])
    };

    for p in 0..np {
        let sl = inst.shelf_life[p] as usize;
        let rho = inst.return_rate[p];
        for l in 0..nl {
            let tag = |t: usize| format!("{},{},{}", pname(p), lname(l), t + 1);
            for t in 0..nt {
                let inv = &inventory[p][l][t];
                let sold = &sales[p][l][t];
                if t == 0 && opts.has(ConstraintFamily::Init) {
                    for (k, &bucket) in inv.iter().enumerate().take(sl - 1) {
                        m.add_constraint(
                            format!("init[{},{},{}]", pname(p), lname(l), k + 1),
                            vec![(bucket, 1.0)],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                }
                if opts.has(ConstraintFamily::FreshInflow) {
                    let mut terms = vec![(inv[sl - 1], 1.0)];
                    if let Some(a) = arrival(p, l, t) {
                        terms.push((a, -1.0));
                    }
                    for ((from, to), grid) in &transship {
                        if *to == l {
                            terms.push((grid[p][t], -1.0));
                        }
                        if *from == l {
                            terms.push((grid[p][t], 1.0));
                        }
                    }
                    if t > 0 && rho > 0.0 {
                        for &y in &sales[p][l][t - 1] {
                            terms.push((y, -rho));
                        }
                    }
                    m.add_constraint(format!("fresh[{}]", tag(t)), terms, RowSense::Eq, 0.0);
                }
                if t + 1 < nt && opts.has(ConstraintFamily::Aging) {
                    for k in 0..sl - 1 {
                        m.add_constraint(
                            format!("aging[{},{}]", tag(t), k + 1),
                            vec![
                                (inventory[p][l][t + 1][k], 1.0),
                                (inv[k + 1], -1.0),
                                (sold[k + 1], 1.0),
                            ],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                }
                if opts.has(ConstraintFamily::Expiration) {
                    m.add_constraint(
                        format!("expire[{}]", tag(t)),
                        vec![(waste[p][l][t], 1.0), (inv[0], -1.0), (sold[0], 1.0)],
                        RowSense::Eq,
                        0.0,
                    );
                }
                if opts.has(ConstraintFamily::Availability) {
                    for k in 0..sl {
                        m.add_constraint(
                            format!("avail[{},{}]", tag(t), k + 1),
                            vec![(sold[k], 1.0), (inv[k], -1.0)],
                            RowSense::Le,
                            0.0,
                        );
                    }
                }
                let demand = inst.demand(p, l, t + 1).expect("period in range");
                if opts.has(ConstraintFamily::Demand) {
                    let mut terms: Vec<(VarId, f64)> = sold.iter().map(|&y| (y, 1.0)).collect();
                    terms.push((lost[p][l][t], 1.0));
                    for ((from, to), grid) in &substitution {
                        if *from == p {
                            terms.push((grid[l][t], 1.0));
                        }
                        if *to == p {
                            terms.push((grid[l][t], -1.0));
                        }
                    }
                    m.add_constraint(format!("demand[{}]", tag(t)), terms, RowSense::Eq, demand);
                }
                if opts.has(ConstraintFamily::SubstitutionBound) {
                    let out: Vec<(VarId, f64)> = substitution
                        .iter()
                        .filter(|((from, _), _)| *from == p)
                        .map(|(_, grid)| (grid[l][t], 1.0))
                        .collect();
                    if !out.is_empty() {
                        m.add_constraint(format!("subcap[{}]", tag(t)), out, RowSense::Le, demand);
                    }
                }
                let q = orders[p][l][t];
                if let Some(z) = &triggers {
                    if opts.has(ConstraintFamily::Moq) {
                        m.add_constraint(
                            format!("moq_upper[{}]", tag(t)),
                            vec![(q, 1.0), (z[p][l][t], -BIG_M)],
                            RowSense::Le,
                            0.0,
                        );
                        if moq > 0.0 {
                            m.add_constraint(
                                format!("moq_lower[{}]", tag(t)),
                                vec![(q, 1.0), (z[p][l][t], -moq)],
                                RowSense::Ge,
                                0.0,
                            );
                        }
                    }
                }
                if let Some(n) = &packs {
                    if opts.has(ConstraintFamily::PackSize) {
                        m.add_constraint(
                            format!("pack[{}]", tag(t)),
                            vec![(q, 1.0), (n[p][l][t], -(pack as f64))],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                }
            }
        }
        if opts.has(ConstraintFamily::Production) {
            for t in 0..nt {
                let terms: Vec<(VarId, f64)> = (0..nl).filter_map(|l| arrival(p, l, t)).map(|a| (a, 1.0)).collect();
                if !terms.is_empty() {
                    m.add_constraint(
                        format!("production[{},{}]", pname(p), t + 1),
                        terms,
                        RowSense::Le,
                        inst.production_cap[p][t],
                    );
                }
            }
        }
    }

    for l in 0..nl {
        for t in 0..nt {
            if opts.has(ConstraintFamily::Storage) {
                let terms: Vec<(VarId, f64)> = (0..np)
                    .filter(|&p| inst.cold_usage[p] != 0.0)
                    .flat_map(|p| inventory[p][l][t].iter().map(move |&i| (i, inst.cold_usage[p])))
                    .collect();
                if !terms.is_empty() {
                    m.add_constraint(
                        format!("storage[{},{}]", lname(l), t + 1),
                        terms,
                        RowSense::Le,
                        inst.cold_capacity[l],
                    );
                }
            }
            if opts.has(ConstraintFamily::Labor) {
                let terms: Vec<(VarId, f64)> = (0..np)
                    .filter(|&p| inst.labor_usage[p] != 0.0)
                    .flat_map(|p| sales[p][l][t].iter().map(move |&y| (y, inst.labor_usage[p])))
                    .collect();
                if !terms.is_empty() {
                    m.add_constraint(
                        format!("labor[{},{}]", lname(l), t + 1),
                        terms,
                        RowSense::Le,
                        inst.labor_cap[l][t],
                    );
                }
            }
        }
    }

    if let Limit::Active(budget) = inst.constraints.budget_per_period {
        if opts.has(ConstraintFamily::Budget) {
            for t in 0..nt {
                let mut terms = Vec::new();
                for p in 0..np {
                    for l in 0..nl {
                        terms.push((orders[p][l][t], inst.costs.purchasing[p]));
                        if let Some(z) = &triggers {
                            if fixed > 0.0 {
                                terms.push((z[p][l][t], fixed));
                            }
                        }
                    }
                }
                m.add_constraint(format!("budget[{}]", t + 1), terms, RowSense::Le, budget);
            }
        }
    }

    if let Limit::Active(omega) = inst.constraints.waste_limit_pct {
        if opts.has(ConstraintFamily::WasteCap) {
            let terms: Vec<(VarId, f64)> = waste.iter().flatten().flatten().map(|&w| (w, 1.0)).collect();
            m.add_constraint("wastecap", terms, RowSense::Le, omega * inst.total_demand());
        }
    }

    RetailModel {
        spec: m,
        vars: VarIndex {
            inventory,
            sales,
            orders,
            waste,
            lost,
            substitution,
            transship,
            triggers,
            packs,
        },
    }
}

/// Decision values of a solved reference model, indexed like [`VarIndex`].
#[derive(Debug, Clone, PartialEq)]
pub struct RetailSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub inventory: Vec<Vec<Vec<Vec<f64>>>>,
    pub sales: Vec<Vec<Vec<Vec<f64>>>>,
    pub orders: Vec<Vec<Vec<f64>>>,
    pub waste: Vec<Vec<Vec<f64>>>,
    pub lost: Vec<Vec<Vec<f64>>>,
    pub substitution: EdgeGrids<f64>,
    pub transship: EdgeGrids<f64>,
    pub triggers: Option<Vec<Vec<Vec<f64>>>>,
    pub packs: Option<Vec<Vec<Vec<f64>>>>,
}

fn read3(v: &[Vec<Vec<VarId>>], values: &[f64]) -> Vec<Vec<Vec<f64>>> {
    v.iter()
        .map(|a| a.iter().map(|b| b.iter().map(|x| values[x.0]).collect()).collect())
        .collect()
}

fn read4(v: &[Vec<Vec<Vec<VarId>>>], values: &[f64]) -> Vec<Vec<Vec<Vec<f64>>>> {
    v.iter().map(|a| read3(a, values)).collect()
}

impl RetailModel {
    /// Extract a solution; `None` when the result carries no values.
    pub fn solution(&self, result: &SolveResult) -> Option<RetailSolution> {
        let values = &result.values;
        if values.len() != self.spec.variables.len() {
            return None;
        }
        let vars = &self.vars;
        let edges2 = |e: &EdgeGrids<VarId>| {
            e.iter()
                .map(|(edge, grid)| {
                    (
                        *edge,
                        grid.iter().map(|row| row.iter().map(|x| values[x.0]).collect()).collect(),
                    )
                })
                .collect()
        };
        Some(RetailSolution {
            status: result.status,
            objective: result.objective?,
            inventory: read4(&vars.inventory, values),
            sales: read4(&vars.sales, values),
            orders: read3(&vars.orders, values),
            waste: read3(&vars.waste, values),
            lost: read3(&vars.lost, values),
            substitution: edges2(&vars.substitution),
            transship: edges2(&vars.transship),
            triggers: vars.triggers.as_ref().map(|z| read3(z, values)),
            packs: vars.packs.as_ref().map(|n| read3(n, values)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowViolation {
    pub product: String,
    pub location: String,
    /// Inflow minus outflow over the horizon.
    pub residual: f64,
}

/// Every unit that arrives (orders, net transshipment, returns) must leave via
/// sales or waste, or remain as carried stock at the end of the horizon.
pub fn check_flow_conservation(inst: &ScenarioInstance, sol: &RetailSolution) -> Vec<FlowViolation> {
    let nt = inst.periods;
    let mut out = Vec::new();
    for p in 0..inst.products.len() {
        let lt = inst.lead_time[p] as usize;
        for l in 0..inst.locations.len() {
            let mut inflow = 0.0;
            for t in 0..nt {
                if t >= lt {
                    inflow += sol.orders[p][l][t - lt];
                }
                for ((from, to), grid) in &sol.transship {
                    if *to == l {
                        inflow += grid[p][t];
                    }
                    if *from == l {
                        inflow -= grid[p][t];
                    }
                }
                if t > 0 {
                    inflow += inst.return_rate[p] * sol.sales[p][l][t - 1].iter().sum::<f64>();
                }
            }
            let sold: f64 = sol.sales[p][l].iter().flatten().sum();
            let wasted: f64 = sol.waste[p][l].iter().sum();
            let last_inv = &sol.inventory[p][l][nt - 1];
            let last_sales = &sol.sales[p][l][nt - 1];
            let carried: f64 = (1..last_inv.len()).map(|k| last_inv[k] - last_sales[k]).sum();
            let residual = inflow - sold - wasted - carried;
            if residual.abs() >= FLOW_TOLERANCE {
                out.push(FlowViolation {
                    product: inst.products[p].clone(),
                    location: inst.locations[l].clone(),
                    residual,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub status: SolveStatus,
    pub objective: Option<f64>,
}

/// Ground-truth solve with the reference settings (60 s, 1% gap, quiet).
pub fn ground_truth(inst: &ScenarioInstance, backend: &dyn Backend) -> Result<GroundTruth, SolverError> {
    let model = build_reference_model(inst);
    let r = solver::solve(backend, &model.spec, &SolveParams::default())?;
    Ok(GroundTruth {
        status: r.status,
        objective: r.objective,
    })
}

/// Build with options, solve, and extract the structured solution.
pub fn solve_reference(
    inst: &ScenarioInstance,
    opts: &BuildOptions,
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<(RetailModel, SolveResult, Option<RetailSolution>), SolverError> {
    let model = build_model_with(inst, opts);
    let result = solver::solve(backend, &model.spec, params)?;
    let sol = model.solution(&result);
    Ok((model, result, sol))
}

/// Map of instance name to ground truth, serialized in name order.
pub type GroundTruthFile = BTreeMap<String, GroundTruth>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{apply_archetype, base_scenario};
    use crate::solver::HighsBackend;

    fn solve_full(inst: &ScenarioInstance) -> (RetailModel, SolveResult, RetailSolution) {
        let (m, r, s) =
            solve_reference(inst, &BuildOptions::default(), &HighsBackend, &SolveParams::default()).unwrap();
        (m, r, s.expect("solution"))
    }

    fn small() -> ScenarioInstance {
        let mut inst = base_scenario();
        inst.periods = 6;
        for rows in [&mut inst.demand_curve, &mut inst.production_cap, &mut inst.labor_cap] {
            for row in rows.iter_mut() {
                row.truncate(6);
            }
        }
        inst.shelf_life = vec![3, 2, 1];
        inst.validated().unwrap()
    }

    #[test]
    fn base_model_has_no_optional_discrete_vars() {
        let m = build_reference_model(&base_scenario());
        assert!(m.vars.triggers.is_none());
        assert!(m.vars.packs.is_none());
        assert!(m.vars.transship.is_empty());
        assert!(!m.spec.is_mip());
        assert!(m.spec.validate().is_ok());
        let names: Vec<&str> = m.spec.variables.iter().map(|v| v.name.as_str()).collect();
        assert!(names.iter().all(|n| !n.starts_with("z[") && !n.starts_with("n[") && !n.starts_with("X[")));
    }

    #[test]
    fn zero_demand_gives_zero_objective() {
        let mut inst = small();
        inst.demand_curve.iter_mut().flatten().for_each(|d| *d = 0.0);
        let (_, r, sol) = solve_full(&inst);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective.unwrap().abs() < 1e-9);
        assert!(r.values.iter().all(|v| v.abs() < 1e-9));
        assert!(check_flow_conservation(&inst, &sol).is_empty());
    }

    #[test]
    fn flow_defect_is_reported_once() {
        let inst = small();
        let (_, _, mut sol) = solve_full(&inst);
        assert!(check_flow_conservation(&inst, &sol).is_empty());
        sol.waste[1][2][3] += 1.0;
        let v = check_flow_conservation(&inst, &sol);
        assert_eq!(v.len(), 1);
        assert!((v[0].residual.abs() - 1.0).abs() < 1e-6);
        assert_eq!(v[0].product, "SKU_Premium");
        assert_eq!(v[0].location, "DC3");
    }

    #[test]
    fn waste_never_exceeds_oldest_bucket() {
        let inst = small();
        let (_, _, sol) = solve_full(&inst);
        for p in 0..3 {
            for l in 0..5 {
                for t in 0..inst.periods {
                    assert!(sol.waste[p][l][t] <= sol.inventory[p][l][t][0] + 1e-7);
                }
            }
        }
    }

    #[test]
    fn holding_term_bounds_objective_drop() {
        let inst = small();
        let (_, r, sol) = solve_full(&inst);
        let old = r.objective.unwrap();
        let mut holding = 0.0;
        for p in 0..3 {
            for l in 0..5 {
                for t in 0..inst.periods {
                    for k in 1..inst.shelf_life[p] as usize {
                        holding += inst.costs.inventory[p]
                            * (sol.inventory[p][l][t][k] - sol.sales[p][l][t][k]);
                    }
                }
            }
        }
        let mut free = inst.clone();
        free.costs.inventory = vec![0.0; 3];
        let (_, r2, _) = solve_full(&free);
        let new = r2.objective.unwrap();
        assert!(new <= old + 1e-6);
        assert!(new >= old - holding - 1e-6);
    }

    #[test]
    fn moq_and_pack_rules_hold() {
        let mut inst = small();
        inst.constraints.moq = 300.0;
        let (m, _, sol) = solve_full(&inst);
        assert!(m.vars.triggers.is_some());
        for q in sol.orders.iter().flatten().flatten() {
            assert!(*q <= 1e-6 || *q >= 300.0 - 1e-6, "order {q}");
        }
        let mut inst = small();
        inst.constraints.pack_size = 100;
        let (_, _, sol) = solve_full(&inst);
        for q in sol.orders.iter().flatten().flatten() {
            let r = q / 100.0;
            assert!((r - r.round()).abs() * 100.0 < 1e-6, "order {q}");
        }
    }

    #[test]
    fn omitting_storage_relaxes_bottleneck() {
        let inst = apply_archetype("f3_storage_bottleneck").unwrap();
        let full = build_reference_model(&inst);
        let mut opts = BuildOptions::default();
        opts.omit_constraints.insert(ConstraintFamily::Storage);
        let relaxed = build_model_with(&inst, &opts);
        assert!(full.spec.constraints.iter().any(|c| c.name == "storage[DC1,1]"));
        assert!(relaxed.spec.constraints.iter().all(|c| !c.name.starts_with("storage[")));
    }

    #[test]
    fn family_keys_parse() {
        for c in ConstraintFamily::ALL {
            assert_eq!(c.key().parse::<ConstraintFamily>().unwrap(), c);
        }
        for t in ObjectiveTerm::ALL {
            assert_eq!(t.key().parse::<ObjectiveTerm>().unwrap(), t);
        }
    }

    #[test]
    fn transshipment_and_returns_conserve_flow() {
        let mut inst = small();
        inst.network.trans_edges = vec![(0, 1), (1, 0), (2, 3)];
        inst.return_rate = vec![0.2, 0.1, 0.05];
        inst.lead_time = vec![1, 0, 2];
        let (_, r, sol) = solve_full(&inst);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(check_flow_conservation(&inst, &sol).is_empty());
    }
}
