//! Linear and mixed-integer programming.

mod lu;
mod milp;
mod simplex;
mod system;

pub use milp::{solve_milp, MilpSolver, SolveResult, SolveStatus, INTEGRALITY_TOL, RELATIVE_GAP};
pub use simplex::{LpOutcome, LpSolver, LpStatus};
pub use system::{
    check_feasible, Constraint, ConstraintSystem, LinExpr, Objective, Relation, Sense, VarId, Variable,
};
