//! Verification and repair of generated optimization programs, plus a
//! perishable retail planning benchmark with its reference MILP.

pub mod bench;
pub mod config;
pub mod diagnostics;
pub mod eval;
pub mod l1;
pub mod l2;
pub mod llm;
pub mod pipeline;
pub mod reference;
pub mod repair;
pub mod runtime;
pub mod scenario;
pub mod solver;

pub use scenario::ScenarioInstance;
