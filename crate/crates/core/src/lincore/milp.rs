use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::simplex::{LpSolver, LpStatus};
use super::system::{ConstraintSystem, Objective};
use crate::error::Result;

/// Distance from the nearest integer below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative optimality gap at which branch and bound stops.
pub const RELATIVE_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal within the relative gap.
    Optimal,
    Infeasible,
    /// The node limit was reached; only `dual_bound` is guaranteed.
    BoundOnly,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Best feasible objective found, or the dual bound when none was found.
    pub objective_value: f64,
    /// A value no better than the true optimum can exceed: an upper bound when maximizing,
    /// a lower bound when minimizing.
    pub dual_bound: f64,
    /// Point achieving `objective_value`, when one was found.
    pub assignment: Option<Vec<f64>>,
    pub nodes_explored: usize,
    pub lp_pivots: usize,
}

struct Node {
    /// Upper bound on the (maximization-normalized) objective in this subtree.
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| Reverse(self.seq).cmp(&Reverse(other.seq)))
    }
}

fn gap(incumbent: f64) -> f64 {
    RELATIVE_GAP * (1.0 + incumbent.abs())
}

/// Best-bound branch and bound over the binaries of a [`ConstraintSystem`].
///
/// The LP relaxation is warm-started across nodes and across objectives.
#[derive(Clone, Debug)]
pub struct MilpSolver {
    lp: LpSolver,
    binaries: Vec<usize>,
    base: Vec<(f64, f64)>,
}

impl MilpSolver {
    pub fn new(cs: &ConstraintSystem) -> Result<Self> {
        let lp = LpSolver::new(cs)?;
        let binaries: Vec<usize> = cs.binaries().map(|v| v.0).collect();
        let base = binaries.iter().map(|&b| lp.bounds(b)).collect();
        Ok(MilpSolver { lp, binaries, base })
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for (k, &b) in self.binaries.iter().enumerate() {
            let (l, u) = self.base[k];
            if self.lp.bounds(b) != (l, u) {
                self.lp.set_var_bounds(b, l, u);
            }
        }
        for &(k, v) in fixings {
            self.lp.set_var_bounds(self.binaries[k], v, v);
        }
    }

    /// Solves with `objective`; at most `node_limit` LP relaxations are solved.
    pub fn solve(&mut self, objective: &Objective, node_limit: usize) -> Result<SolveResult> {
        let sign = objective.sense.sign();
        self.lp.set_objective(objective);
        let mut queue = BinaryHeap::new();
        let mut seq = 0u64;
        queue.push(Node {
            bound: f64::INFINITY,
            seq,
            fixings: Vec::new(),
        });
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        // largest bound discarded only because of the gap tolerance
        let mut pruned = f64::NEG_INFINITY;
        let mut nodes = 0usize;
        let mut pivots = 0usize;
        let node_limit = node_limit.max(1);

        while let Some(node) = queue.pop() {
            if let Some((inc, _)) = &incumbent {
                if node.bound <= inc + gap(*inc) {
                    pruned = pruned.max(node.bound);
                    continue;
                }
            }
            if nodes >= node_limit {
                queue.push(node);
                break;
            }
            nodes += 1;
            self.apply(&node.fixings);
            let out = self.lp.solve()?;
            pivots += out.pivots;
            if out.status == LpStatus::Infeasible {
                continue;
            }
            let score = (sign * out.objective).min(node.bound);
            if let Some((inc, _)) = &incumbent {
                if score <= inc + gap(*inc) {
                    pruned = pruned.max(score);
                    continue;
                }
            }
            let mut branch: Option<(usize, f64)> = None;
            let mut worst = INTEGRALITY_TOL;
            for (k, &b) in self.binaries.iter().enumerate() {
                let v = out.x[b];
                let frac = (v - v.round()).abs();
                if frac > worst {
                    worst = frac;
                    branch = Some((k, v));
                }
            }
            match branch {
                None => incumbent = Some((score, out.x)),
                Some((k, v)) => {
                    let first = if v >= 0.5 { 1.0 } else { 0.0 };
                    for val in [first, 1.0 - first] {
                        seq += 1;
                        let mut fixings = node.fixings.clone();
                        fixings.push((k, val));
                        queue.push(Node {
                            bound: score,
                            seq,
                            fixings,
                        });
                    }
                }
            }
        }
        self.apply(&[]);

        if let Some((inc, _)) = &incumbent {
            let limit = inc + gap(*inc);
            queue.retain(|n| {
                if n.bound <= limit {
                    pruned = pruned.max(n.bound);
                    false
                } else {
                    true
                }
            });
        }
        let open = queue.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
        let status = if !queue.is_empty() {
            SolveStatus::BoundOnly
        } else if incumbent.is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        };
        let inc_score = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(s, _)| *s);
        let dual = inc_score.max(pruned).max(open);
        let (objective_value, assignment) = match incumbent {
            Some((s, x)) => (sign * s, Some(x)),
            None => (sign * dual, None),
        };
        Ok(SolveResult {
            status,
            objective_value,
            dual_bound: sign * dual,
            assignment,
            nodes_explored: nodes,
            lp_pivots: pivots,
        })
    }
}

/// Solves `cs` with its own objective. Returns the LP optimum when there are no binaries.
pub fn solve_milp(cs: &ConstraintSystem, node_limit: usize) -> Result<SolveResult> {
    MilpSolver::new(cs)?.solve(cs.objective(), node_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::system::LinExpr;

    #[test]
    fn knapsack() {
        // max 2a + 2b + c  s.t. a + b + c <= 2
        let mut cs = ConstraintSystem::new();
        let v: Vec<_> = (0..3).map(|i| cs.add_binary(format!("z{i}"))).collect();
        let sum = v.iter().fold(LinExpr::new(), |e, &z| e + LinExpr::from(z));
        cs.add_le(&sum, 2.0);
        cs.set_objective(Objective::maximize(
            LinExpr::term(v[0], 2.0) + LinExpr::term(v[1], 2.0) + LinExpr::term(v[2], 1.0),
        ));
        let r = solve_milp(&cs, 1000).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective_value - 4.0).abs() < 1e-9);
        assert!(cs.check_feasible(r.assignment.as_ref().unwrap(), 1e-6));
    }

    #[test]
    fn fractional_knapsack_branches() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 4.5: LP relaxation is fractional
        let mut cs = ConstraintSystem::new();
        let v: Vec<_> = (0..3).map(|i| cs.add_binary(format!("z{i}"))).collect();
        cs.add_le(
            &(LinExpr::term(v[0], 2.0) + LinExpr::term(v[1], 3.0) + LinExpr::term(v[2], 1.0)),
            4.5,
        );
        cs.set_objective(Objective::maximize(
            LinExpr::term(v[0], 5.0) + LinExpr::term(v[1], 4.0) + LinExpr::term(v[2], 3.0),
        ));
        let r = solve_milp(&cs, 1000).unwrap();
        assert!((r.objective_value - 8.0).abs() < 1e-9, "{r:?}");
        assert!(r.nodes_explored > 1);
    }

    #[test]
    fn infeasible_binary_program() {
        let mut cs = ConstraintSystem::new();
        let a = cs.add_binary("a");
        let b = cs.add_binary("b");
        cs.add_eq(&(LinExpr::from(a) + LinExpr::from(b)), 1.5);
        let r = solve_milp(&cs, 100).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.assignment.is_none());
    }

    #[test]
    fn node_limit_gives_valid_bound() {
        let mut cs = ConstraintSystem::new();
        let v: Vec<_> = (0..6).map(|i| cs.add_binary(format!("z{i}"))).collect();
        let weights = [3.0, 5.0, 7.0, 4.0, 6.0, 2.5];
        let values = [4.0, 6.5, 9.0, 5.0, 7.5, 3.0];
        let w = v.iter().zip(weights).fold(LinExpr::new(), |e, (&z, c)| e + LinExpr::term(z, c));
        let p = v.iter().zip(values).fold(LinExpr::new(), |e, (&z, c)| e + LinExpr::term(z, c));
        cs.add_le(&w, 13.3);
        cs.set_objective(Objective::maximize(p));
        let exact = solve_milp(&cs, 10_000).unwrap();
        assert_eq!(exact.status, SolveStatus::Optimal);
        let mut prev = f64::INFINITY;
        for limit in [1, 2, 3, 5, 8, 13] {
            let r = solve_milp(&cs, limit).unwrap();
            assert!(r.dual_bound >= exact.objective_value - 1e-9);
            assert!(r.dual_bound <= prev + 1e-9, "bound grew at limit {limit}");
            prev = r.dual_bound;
        }
    }
}
