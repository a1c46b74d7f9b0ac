//! Flexibility benchmark for multi-objective optimizers on an orthogonal
//! metal-cutting model.
//!
//! The crate covers the cut evaluator ([`oxley`], [`material`]), the
//! per-material optimization task ([`task`]), NSGA-II and its adaption
//! variants ([`nsga2`], [`adapt`]), the measurement stack ([`metrics`]), the
//! stored-front format ([`archive`]) and the experiment driver ([`harness`]).

pub mod adapt;
pub mod archive;
pub mod error;
pub mod harness;
pub mod material;
pub mod metrics;
pub mod nsga2;
pub mod oxley;
mod scalar;
pub mod task;

pub use adapt::{ActiveInactive, GoalSchedule};
pub use archive::{AlgorithmTag, ArchiveEntry, GenotypeKind, ParetoArchive};
pub use error::{Error, Result};
pub use material::{builtin_materials, find_material, flow_stress, MaterialParams};
pub use metrics::{computational_effort, cost_aggregates, hypervolume, success_threshold};
pub use nsga2::{AlgoConfig, Problem, RunResult};
pub use oxley::{layer_count, solve_cut, CutOutputs, ProcessParams};
pub use task::{evaluate, normalize, EvalResult, ObjectiveVector, TaskSpec};
