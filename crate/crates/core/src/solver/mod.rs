//! Backend-agnostic MILP layer: model carrier, solve parameters, results,
//! irreducible infeasible subsystems and unbounded rays.

mod highs_backend;
mod model;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use highs_backend::HighsBackend;
pub use model::{
    Domain, LinearConstraint, ModelError, ModelSpec, Objective, ObjectiveSense, RowId, RowSense,
    VarId, Variable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub time_limit_s: f64,
    pub mip_gap: f64,
    pub threads: Option<u32>,
    pub seed: Option<i32>,
    pub output_quiet: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            time_limit_s: 60.0,
            mip_gap: 0.01,
            threads: None,
            seed: None,
            output_quiet: true,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.time_limit_s.is_nan() || self.time_limit_s <= 0.0 {
            return Err(SolverError::BadParams("time_limit_s must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.mip_gap) {
            return Err(SolverError::BadParams("mip_gap must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    Error,
}

impl SolveStatus {
    /// Integer status printed by candidate programs (Gurobi convention).
    pub fn code(self) -> i64 {
        match self {
            SolveStatus::Optimal => 2,
            SolveStatus::Infeasible => 3,
            SolveStatus::Unbounded => 5,
            SolveStatus::TimeLimit => 9,
            SolveStatus::Error => 1,
        }
    }

    /// Inverse of [`SolveStatus::code`]. `4` (infeasible or unbounded) maps to
    /// `Infeasible`; unknown codes map to `Error`.
    pub fn from_code(code: i64) -> SolveStatus {
        match code {
            2 => SolveStatus::Optimal,
            3 | 4 => SolveStatus::Infeasible,
            5 => SolveStatus::Unbounded,
            9 => SolveStatus::TimeLimit,
            _ => SolveStatus::Error,
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Indexed by [`VarId`]; empty when no solution is available.
    pub values: Vec<f64>,
    pub iis: Option<Vec<String>>,
    pub ray_vars: Option<Vec<String>>,
    pub duality_gap: Option<f64>,
}

impl SolveResult {
    pub fn status_only(status: SolveStatus) -> Self {
        SolveResult {
            status,
            objective: None,
            values: Vec::new(),
            iis: None,
            ray_vars: None,
            duality_gap: None,
        }
    }

    pub fn value(&self, var: VarId) -> Option<f64> {
        self.values.get(var.0).copied()
    }

    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid solve parameters: {0}")]
    BadParams(String),
    #[error("model is not infeasible")]
    NotInfeasible,
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub milp: bool,
    pub iis_native: bool,
    pub ray_native: bool,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    /// Raw solve: status, objective and values, no IIS or ray enrichment.
    fn solve_raw(&self, model: &ModelSpec, params: &SolveParams) -> Result<SolveResult, SolverError>;
}

/// Backend selected by configuration key.
pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>, SolverError> {
    match name {
        "highs" => Ok(Box::new(HighsBackend)),
        other => Err(SolverError::UnknownBackend(other.into())),
    }
}

/// Solve and, for unbounded models, attach the variables of an improving ray.
pub fn solve(
    backend: &dyn Backend,
    model: &ModelSpec,
    params: &SolveParams,
) -> Result<SolveResult, SolverError> {
    model.validate()?;
    params.validate()?;
    let mut result = backend.solve_raw(model, params)?;
    if result.status == SolveStatus::Unbounded {
        result.ray_vars = Some(unbounded_ray(backend, model, params)?);
    }
    Ok(result)
}

fn is_feasible(backend: &dyn Backend, model: &ModelSpec, params: &SolveParams) -> Result<bool, SolverError> {
    let status = backend.solve_raw(&model.feasibility_version(), params)?.status;
    match status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::Unbounded => Ok(true),
        other => Err(SolverError::Backend(format!(
            "feasibility check ended with status {other}"
        ))),
    }
}

/// Deletion filter: each constraint is tentatively dropped and stays dropped
/// while the remainder is still infeasible. The survivors form an irreducible
/// infeasible subsystem (variable bounds are always kept).
pub fn compute_iis(
    backend: &dyn Backend,
    model: &ModelSpec,
    params: &SolveParams,
) -> Result<Vec<String>, SolverError> {
    model.validate()?;
    let mut keep = vec![true; model.constraints.len()];
    if is_feasible(backend, model, params)? {
        return Err(SolverError::NotInfeasible);
    }
    for i in 0..keep.len() {
        keep[i] = false;
        if is_feasible(backend, &model.restricted(&keep), params)? {
            keep[i] = true;
        }
    }
    Ok(model
        .constraints
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(c, _)| c.name.clone())
        .collect())
}

/// Variables moving along an improving direction of an unbounded model.
///
/// Solves the homogeneous system `A d (sense) 0`, with `d` sign-restricted by
/// the finite bounds of each variable and boxed to `[-1, 1]`, minimizing the
/// objective along `d` (integrality relaxed).
pub fn unbounded_ray(
    backend: &dyn Backend,
    model: &ModelSpec,
    params: &SolveParams,
) -> Result<Vec<String>, SolverError> {
    let mut aux = ModelSpec::new(ObjectiveSense::Minimize);
    for v in &model.variables {
        let lower = if v.lower.is_finite() { 0.0 } else { -1.0 };
        let upper = if v.upper.is_finite() { 0.0 } else { 1.0 };
        aux.add_var(&v.name, Domain::Continuous, lower, upper);
    }
    for c in &model.constraints {
        aux.add_constraint(&c.name, c.terms.clone(), c.sense, 0.0);
    }
    let flip = match model.objective.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    for &(v, coef) in &model.objective.terms {
        aux.add_objective_term(v, flip * coef);
    }
    let res = backend.solve_raw(&aux, params)?;
    match (res.status, res.objective) {
        (SolveStatus::Optimal, Some(obj)) if obj < -1e-9 => Ok(aux
            .variables
            .iter()
            .zip(&res.values)
            .filter(|(_, &d)| d.abs() > 1e-9)
            .map(|(v, _)| v.name.clone())
            .collect()),
        _ => Ok(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_model(sense: ObjectiveSense) -> (ModelSpec, VarId) {
        let mut m = ModelSpec::new(sense);
        let x = m.add_var("x", Domain::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        (m, x)
    }

    #[test]
    fn trivial_optimum() {
        let (mut m, x) = x_model(ObjectiveSense::Minimize);
        m.add_constraint("x>=3", vec![(x, 1.0)], RowSense::Ge, 3.0);
        m.add_objective_term(x, 1.0);
        let r = solve(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn objective_constant_is_added() {
        let (mut m, x) = x_model(ObjectiveSense::Minimize);
        m.add_constraint("x>=3", vec![(x, 1.0)], RowSense::Ge, 3.0);
        m.add_objective_term(x, 2.0);
        m.objective.constant = 10.0;
        let r = solve(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert!((r.objective.unwrap() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_infeasible() {
        let (mut m, x) = x_model(ObjectiveSense::Minimize);
        m.add_constraint("lo", vec![(x, 1.0)], RowSense::Ge, 1.0);
        m.add_constraint("hi", vec![(x, 1.0)], RowSense::Le, 0.0);
        let r = solve(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.objective.is_none());
    }

    #[test]
    fn free_maximization_is_unbounded_with_ray() {
        let (mut m, x) = x_model(ObjectiveSense::Maximize);
        m.add_objective_term(x, 1.0);
        let r = solve(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
        assert_eq!(r.ray_vars, Some(vec!["x".to_string()]));
    }

    #[test]
    fn iis_drops_redundant_row() {
        let (mut m, x) = x_model(ObjectiveSense::Minimize);
        m.add_constraint("x>=1", vec![(x, 1.0)], RowSense::Ge, 1.0);
        m.add_constraint("x<=0", vec![(x, 1.0)], RowSense::Le, 0.0);
        m.add_constraint("x>=-5", vec![(x, 1.0)], RowSense::Ge, -5.0);
        let iis = compute_iis(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(iis, vec!["x>=1", "x<=0"]);
    }

    #[test]
    fn iis_of_three_way_conflict() {
        let mut m = ModelSpec::default();
        let x = m.add_var("x", Domain::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_var("y", Domain::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("x+y>=10", vec![(x, 1.0), (y, 1.0)], RowSense::Ge, 10.0);
        m.add_constraint("x<=2", vec![(x, 1.0)], RowSense::Le, 2.0);
        m.add_constraint("y<=3", vec![(y, 1.0)], RowSense::Le, 3.0);
        m.add_constraint("x>=0", vec![(x, 1.0)], RowSense::Ge, 0.0);
        let iis = compute_iis(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(iis, vec!["x+y>=10", "x<=2", "y<=3"]);
    }

    #[test]
    fn iis_rejects_feasible_model() {
        let (mut m, x) = x_model(ObjectiveSense::Minimize);
        m.add_constraint("x>=1", vec![(x, 1.0)], RowSense::Ge, 1.0);
        assert_eq!(
            compute_iis(&HighsBackend, &m, &SolveParams::default()),
            Err(SolverError::NotInfeasible)
        );
    }

    #[test]
    fn integer_rounding_is_respected() {
        let mut m = ModelSpec::default();
        let n = m.add_var("n", Domain::Integer, 0.0, f64::INFINITY);
        m.add_constraint("need", vec![(n, 100.0)], RowSense::Ge, 250.0);
        m.add_objective_term(n, 1.0);
        let r = solve(&HighsBackend, &m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.values[n.0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn status_codes_round_trip() {
        for s in [
            SolveStatus::Optimal,
            SolveStatus::Infeasible,
            SolveStatus::Unbounded,
            SolveStatus::TimeLimit,
        ] {
            assert_eq!(SolveStatus::from_code(s.code()), s);
        }
        assert_eq!(SolveStatus::from_code(4), SolveStatus::Infeasible);
        assert_eq!(SolveStatus::from_code(42), SolveStatus::Error);
    }

    #[test]
    fn bad_params_rejected() {
        let p = SolveParams {
            mip_gap: 1.0,
            ..SolveParams::default()
        };
        assert!(p.validate().is_err());
        let p = SolveParams {
            time_limit_s: 0.0,
            ..SolveParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn repeated_solves_agree() {
        let mut m = ModelSpec::default();
        let vars: Vec<VarId> = (0..6).map(|i| m.continuous(format!("v{i}"))).collect();
        for (i, w) in vars.windows(2).enumerate() {
            m.add_constraint(format!("c{i}"), vec![(w[0], 1.0), (w[1], 2.0)], RowSense::Ge, 3.0 + i as f64);
        }
        for (i, &v) in vars.iter().enumerate() {
            m.add_objective_term(v, 1.0 + i as f64 * 0.5);
        }
        let p = SolveParams {
            threads: None,
            ..SolveParams::default()
        };
        let a = solve(&HighsBackend, &m, &p).unwrap();
        let b = solve(&HighsBackend, &m, &p).unwrap();
        assert_eq!(a.status, b.status);
        assert!((a.objective.unwrap() - b.objective.unwrap()).abs() <= 1e-9);
    }
}
