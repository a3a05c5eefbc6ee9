//! Gradient-based meta-learning: per-block networks turn loss gradients into
//! variable updates and are trained online by Adam on the averaged meta-loss.

pub mod adam;
pub mod mlp;
pub mod objective;
pub mod optimizer;
pub mod reference;

pub use adam::AdamState;
pub use mlp::Mlp;
pub use objective::Objective;
pub use optimizer::{
    initial_point, inner_cycle, outer_iteration, run, run_observed, run_with, CycleRecord, GmlHyperParams, InnerStep,
    NetworkBundle, NoopObserver, OuterOutcome, OuterStep, RunObserver, RunResult,
};
pub use reference::{reference_optimizer, ReferenceOptions};
