//! Reference points for the certified bound: the exact twin MILP, a brute-force grid oracle
//! for low-dimensional inputs, and gradient attacks that give empirical lower bounds.

mod attack;
mod dataset;
mod exact;
mod grid;

pub use attack::{fgsm_perturb, pgd_epsilon, AttackConfig, AttackResult};
pub use dataset::Dataset;
pub use exact::{exact_epsilon, exact_epsilon_with, ExactConfig, ExactResult};
pub use grid::grid_oracle;
