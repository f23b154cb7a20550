use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("constraint `{0}` references an undeclared variable")]
    UnknownVariable(String),
    #[error("variable `{0}` has lower bound above upper bound")]
    EmptyDomain(String),
}

/// Generic linear or mixed-integer model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Objective,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::new(ObjectiveSense::Minimize)
    }
}

impl ModelSpec {
    pub fn new(sense: ObjectiveSense) -> Self {
        ModelSpec {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense,
                terms: Vec::new(),
                constant: 0.0,
            },
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, domain: Domain, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match domain {
            Domain::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            domain,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, Domain::Continuous, 0.0, f64::INFINITY)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> RowId {
        self.constraints.push(LinearConstraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        RowId(self.constraints.len() - 1)
    }

    pub fn add_objective_term(&mut self, var: VarId, coefficient: f64) {
        if coefficient != 0.0 {
            self.objective.terms.push((var, coefficient));
        }
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.domain != Domain::Continuous)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn name_index(&self) -> HashMap<&str, VarId> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), VarId(i)))
            .collect()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.constant
            + self
                .objective
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Dense objective coefficient per variable (duplicates summed).
    pub fn objective_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, coef) in &self.objective.terms {
            c[v.0] += coef;
        }
        c
    }

    /// Same model keeping only the constraints whose index is selected.
    pub fn restricted(&self, keep: &[bool]) -> ModelSpec {
        ModelSpec {
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(c, _)| c.clone())
                .collect(),
            objective: self.objective.clone(),
        }
    }

    /// Same constraints and bounds with a zero objective.
    pub fn feasibility_version(&self) -> ModelSpec {
        ModelSpec {
            variables: self.variables.clone(),
            constraints: self.constraints.clone(),
            objective: Objective {
                sense: ObjectiveSense::Minimize,
                terms: Vec::new(),
                constant: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        let n = self.variables.len();
        for c in &self.constraints {
            if !seen.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateConstraint(c.name.clone()));
            }
            if c.terms.iter().any(|(v, _)| v.0 >= n) {
                return Err(ModelError::UnknownVariable(c.name.clone()));
            }
        }
        if self.objective.terms.iter().any(|(v, _)| v.0 >= n) {
            return Err(ModelError::UnknownVariable("<objective>".into()));
        }
        Ok(())
    }
}
