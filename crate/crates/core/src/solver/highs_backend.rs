use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use super::{
    Backend, Capabilities, Domain, ModelSpec, ObjectiveSense, RowSense, SolveParams, SolveResult,
    SolveStatus, SolverError,
};

/// HiGHS through the `highs` bindings.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            milp: true,
            iis_native: false,
            ray_native: false,
        }
    }

    fn solve_raw(&self, model: &ModelSpec, params: &SolveParams) -> Result<SolveResult, SolverError> {
        if model.variables.is_empty() {
            return Ok(solve_empty(model));
        }
        let costs = model.objective_vector();
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .zip(&costs)
            .map(|(v, &c)| {
                let integer = v.domain != Domain::Continuous;
                pb.add_column_with_integrality(c, v.lower..=v.upper, integer)
            })
            .collect();
        for row in &model.constraints {
            let terms: Vec<_> = row.terms.iter().map(|&(v, c)| (cols[v.0], c)).collect();
            match row.sense {
                RowSense::Le => pb.add_row(..=row.rhs, terms),
                RowSense::Ge => pb.add_row(row.rhs.., terms),
                RowSense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
            }
        }
        let sense = match model.objective.sense {
            ObjectiveSense::Minimize => Sense::Minimise,
            ObjectiveSense::Maximize => Sense::Maximise,
        };
        let mut m = pb
            .try_optimise(sense)
            .map_err(|s| SolverError::Backend(format!("model load failed: {s:?}")))?;
        if params.output_quiet {
            m.make_quiet();
        }
        m.set_option("time_limit", params.time_limit_s);
        m.set_option("mip_rel_gap", params.mip_gap);
        if let Some(seed) = params.seed {
            m.set_option("random_seed", seed);
        }
        if let Some(threads) = params.threads {
            m.set_option("threads", threads as i32);
        }
        let solved = m
            .try_solve()
            .map_err(|s| SolverError::Backend(format!("solve failed: {s:?}")))?;

        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            HighsModelStatus::UnboundedOrInfeasible => {
                return disambiguate(self, model, params);
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedSolutionLimit => SolveStatus::TimeLimit,
            other => return Err(SolverError::Backend(format!("unexpected model status {other:?}"))),
        };
        let has_incumbent = match status {
            SolveStatus::Optimal => true,
            SolveStatus::TimeLimit => solved.primal_solution_status() == HighsSolutionStatus::Feasible,
            _ => false,
        };
        if !has_incumbent {
            return Ok(SolveResult::status_only(status));
        }
        let values = solved.get_solution().columns().to_vec();
        let gap = if model.is_mip() {
            let g = solved.mip_gap();
            g.is_finite().then_some(g)
        } else {
            None
        };
        Ok(SolveResult {
            status,
            objective: Some(solved.objective_value() + model.objective.constant),
            values,
            iis: None,
            ray_vars: None,
            duality_gap: gap,
        })
    }
}

fn solve_empty(model: &ModelSpec) -> SolveResult {
    let feasible = model.constraints.iter().all(|c| c.violation(&[]) <= 1e-9);
    if feasible {
        SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(model.objective.constant),
            values: Vec::new(),
            iis: None,
            ray_vars: None,
            duality_gap: None,
        }
    } else {
        SolveResult::status_only(SolveStatus::Infeasible)
    }
}

fn disambiguate(
    backend: &HighsBackend,
    model: &ModelSpec,
    params: &SolveParams,
) -> Result<SolveResult, SolverError> {
    let feas = backend.solve_raw(&model.feasibility_version(), params)?;
    Ok(SolveResult::status_only(match feas.status {
        SolveStatus::Optimal => SolveStatus::Unbounded,
        _ => SolveStatus::Infeasible,
    }))
}
