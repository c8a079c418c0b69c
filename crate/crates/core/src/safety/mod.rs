//! Closed-loop safety demo: a discrete-time linear system whose feedback acts on a perceived
//! state, robust invariant sets by halfspace iteration, and Monte-Carlo simulation.
//!
//! Invariant sets come from iterating `S <- S ∩ pre(S)` on halfspace polytopes with LP-based
//! redundancy removal. This is a substitute method; reports label it as such.

mod polytope;
mod simulate;
mod system;

pub use polytope::{invariant_set, pre_set, Halfspace, Polytope, Verdict};
pub use simulate::{simulate, write_trajectory_csv, Policy, Simulation, StepRecord};
pub use system::{LinearSystem, SafetyConfig};
