//! Pipeline configuration file: one TOML table per verification layer.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::Thresholds;
use crate::eval::Tolerances;
use crate::l1::L1Config;
use crate::l2::{ConstraintFactors, L2Config, PresenceTest, TermFactors};
use crate::llm::GenerationStyle;
use crate::repair::{RepairConfig, RepairConfigError};

#[derive(Debug, Error)]
pub enum PipelineConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Repair(#[from] RepairConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Section {
    /// Seconds per candidate execution.
    pub timeout: f64,
    pub max_regenerations: usize,
    pub duality_gap_threshold: f64,
}

impl Default for L1Section {
    fn default() -> Self {
        L1Section {
            timeout: 60.0,
            max_regenerations: 3,
            duality_gap_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CptSection {
    pub missing_threshold: f64,
    pub uncertain_threshold: f64,
    pub max_candidates: usize,
    pub capacity_factor: f64,
    pub demand_factor: f64,
    pub other_factor: f64,
}

impl Default for CptSection {
    fn default() -> Self {
        let f = ConstraintFactors::default();
        CptSection {
            missing_threshold: 0.05,
            uncertain_threshold: 0.30,
            max_candidates: 10,
            capacity_factor: f.capacity,
            demand_factor: f.demand,
            other_factor: f.other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptSection {
    pub missing_threshold: f64,
    pub uncertain_threshold: f64,
    pub max_candidates: usize,
    pub cost_factor: f64,
    pub revenue_factor: f64,
    pub other_factor: f64,
}

impl Default for OptSection {
    fn default() -> Self {
        let f = TermFactors::default();
        OptSection {
            missing_threshold: 0.05,
            uncertain_threshold: 0.30,
            max_candidates: 10,
            cost_factor: f.cost,
            revenue_factor: f.revenue,
            other_factor: f.other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Repair iterations (N).
    pub repair_budget: usize,
    /// Rollback threshold on relative objective shift (τr).
    pub regression_guard: f64,
    pub generation: GenerationStyle,
    /// Seconds per perturbation run.
    pub perturbation_timeout: f64,
    /// Below this change a record perturbation also tries source literals.
    pub hybrid_threshold: f64,
    /// Concurrent perturbation runs inside one instance.
    pub perturbation_workers: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            repair_budget: 3,
            regression_guard: 0.04,
            generation: GenerationStyle::Cot,
            perturbation_timeout: 60.0,
            hybrid_threshold: 0.01,
            perturbation_workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub strict_tolerance: f64,
    pub practical_tolerance: f64,
    /// Both tiers for the MIP family.
    pub mip_tolerance: f64,
    pub external_tolerance: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let t = Tolerances::default();
        EvalSection {
            strict_tolerance: t.retail_strict,
            practical_tolerance: t.retail_practical,
            mip_tolerance: t.retail_mip,
            external_tolerance: t.external,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub l1: L1Section,
    pub l2_cpt: CptSection,
    pub l2_opt: OptSection,
    pub pipeline: PipelineSection,
    pub eval: EvalSection,
}

fn positive(name: &str, v: f64) -> Result<(), PipelineConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PipelineConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

fn ordered(table: &str, missing: f64, uncertain: f64) -> Result<(), PipelineConfigError> {
    if 0.0 < missing && missing < uncertain {
        Ok(())
    } else {
        Err(PipelineConfigError::Invalid(format!(
            "[{table}] needs 0 < missing_threshold < uncertain_threshold, got {missing} and {uncertain}"
        )))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineConfigError> {
        positive("l1.timeout", self.l1.timeout)?;
        positive("pipeline.perturbation_timeout", self.pipeline.perturbation_timeout)?;
        ordered("l2_cpt", self.l2_cpt.missing_threshold, self.l2_cpt.uncertain_threshold)?;
        ordered("l2_opt", self.l2_opt.missing_threshold, self.l2_opt.uncertain_threshold)?;
        for (name, v) in [
            ("l2_cpt.capacity_factor", self.l2_cpt.capacity_factor),
            ("l2_cpt.demand_factor", self.l2_cpt.demand_factor),
            ("l2_cpt.other_factor", self.l2_cpt.other_factor),
            ("l2_opt.cost_factor", self.l2_opt.cost_factor),
            ("l2_opt.revenue_factor", self.l2_opt.revenue_factor),
            ("l2_opt.other_factor", self.l2_opt.other_factor),
            ("eval.strict_tolerance", self.eval.strict_tolerance),
            ("eval.practical_tolerance", self.eval.practical_tolerance),
            ("eval.mip_tolerance", self.eval.mip_tolerance),
            ("eval.external_tolerance", self.eval.external_tolerance),
        ] {
            positive(name, v)?;
        }
        if self.eval.strict_tolerance > self.eval.practical_tolerance {
            return Err(PipelineConfigError::Invalid(
                "eval.strict_tolerance must not exceed eval.practical_tolerance".into(),
            ));
        }
        // The rollback guard must be tighter than both Warning bands.
        let tightest = Thresholds {
            low: self.l2_cpt.missing_threshold.min(self.l2_opt.missing_threshold),
            high: self.l2_cpt.uncertain_threshold,
        };
        self.repair().validate(&tightest)?;
        Ok(())
    }

    pub fn l1(&self) -> L1Config {
        L1Config {
            timeout_s: self.l1.timeout,
            duality_gap_threshold: self.l1.duality_gap_threshold,
        }
    }

    pub fn l2(&self) -> L2Config {
        L2Config {
            cpt: PresenceTest {
                thresholds: Thresholds {
                    low: self.l2_cpt.missing_threshold,
                    high: self.l2_cpt.uncertain_threshold,
                },
                max_candidates: self.l2_cpt.max_candidates,
            },
            opt: PresenceTest {
                thresholds: Thresholds {
                    low: self.l2_opt.missing_threshold,
                    high: self.l2_opt.uncertain_threshold,
                },
                max_candidates: self.l2_opt.max_candidates,
            },
            timeout_s: self.pipeline.perturbation_timeout,
            hybrid_threshold: self.pipeline.hybrid_threshold,
            constraint_factors: ConstraintFactors {
                capacity: self.l2_cpt.capacity_factor,
                demand: self.l2_cpt.demand_factor,
                other: self.l2_cpt.other_factor,
            },
            term_factors: TermFactors {
                cost: self.l2_opt.cost_factor,
                revenue: self.l2_opt.revenue_factor,
                other: self.l2_opt.other_factor,
            },
            workers: self.pipeline.perturbation_workers.max(1),
        }
    }

    pub fn repair(&self) -> RepairConfig {
        RepairConfig {
            max_iterations: self.pipeline.repair_budget,
            regression_threshold: self.pipeline.regression_guard,
            ..RepairConfig::default()
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            retail_strict: self.eval.strict_tolerance,
            retail_practical: self.eval.practical_tolerance,
            retail_mip: self.eval.mip_tolerance,
            external: self.eval.external_tolerance,
        }
    }
}
