use serde::{Deserialize, Serialize};

use super::system::LinearSystem;
use crate::error::{Error, Result};
use crate::lincore::{ConstraintSystem, LinExpr, LpSolver, LpStatus, Objective, VarId};

/// Variable box for polytope LPs. Every polytope handled here is bounded well inside it.
const LP_BOX: f64 = 1e6;
const NORMAL_TOL: f64 = 1e-12;

/// `normal . x <= offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    fn value(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(h, v)| h * v).sum()
    }

    /// Scaled to a unit normal; `None` when the normal vanishes.
    fn normalized(&self) -> Option<Halfspace> {
        let norm = self.normal.iter().map(|h| h * h).sum::<f64>().sqrt();
        (norm > NORMAL_TOL).then(|| Halfspace {
            normal: self.normal.iter().map(|h| h / norm).collect(),
            offset: self.offset / norm,
        })
    }
}

/// Intersection of halfspaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub rows: Vec<Halfspace>,
}

impl Polytope {
    pub fn new(dim: usize, rows: Vec<Halfspace>) -> Result<Polytope> {
        if rows.iter().any(|r| r.normal.len() != dim || r.normal.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument(format!("halfspace normals must be finite with length {dim}")));
        }
        Ok(Polytope { dim, rows })
    }

    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Polytope> {
        if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box bounds must have equal length and lower <= upper".into()));
        }
        let n = lower.len();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rows.push(Halfspace {
                normal: e.clone(),
                offset: upper[i],
            });
            e[i] = -1.0;
            rows.push(Halfspace {
                normal: e,
                offset: -lower[i],
            });
        }
        Polytope::new(n, rows)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.value(x) <= r.offset + tol)
    }

    pub fn intersect(&self, other: &Polytope) -> Polytope {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Polytope { dim: self.dim, rows }
    }

    fn lp(&self) -> Result<(LpSolver, Vec<VarId>)> {
        let mut cs = ConstraintSystem::new();
        let vars: Vec<VarId> = (0..self.dim).map(|i| cs.add_var(format!("x{i}"), -LP_BOX, LP_BOX)).collect();
        for r in &self.rows {
            let mut e = LinExpr::new();
            for (&v, &h) in vars.iter().zip(&r.normal) {
                if h != 0.0 {
                    e.push(v, h);
                }
            }
            cs.add_le(&e, r.offset);
        }
        Ok((LpSolver::new(&cs)?, vars))
    }

    fn direction(vars: &[VarId], h: &[f64]) -> Objective {
        let mut e = LinExpr::new();
        for (&v, &c) in vars.iter().zip(h) {
            if c != 0.0 {
                e.push(v, c);
            }
        }
        Objective::maximize(e)
    }

    pub fn is_empty(&self) -> Result<bool> {
        if self.rows.iter().any(|r| r.normal.iter().all(|h| h.abs() <= NORMAL_TOL) && r.offset < 0.0) {
            return Ok(true);
        }
        let (mut lp, _) = self.lp()?;
        Ok(lp.solve()?.status == LpStatus::Infeasible)
    }

    /// `max direction . x` over the polytope, `None` when empty.
    pub fn support(&self, direction: &[f64]) -> Result<Option<f64>> {
        let (mut lp, vars) = self.lp()?;
        lp.set_objective(&Self::direction(&vars, direction));
        let out = lp.solve()?;
        Ok((out.status == LpStatus::Optimal).then_some(out.objective))
    }

    /// `self` inside `other` up to `tol` on every halfspace offset of `other`.
    pub fn is_subset_of(&self, other: &Polytope, tol: f64) -> Result<bool> {
        let (mut lp, vars) = self.lp()?;
        for r in &other.rows {
            lp.set_objective(&Self::direction(&vars, &r.normal));
            let out = lp.solve()?;
            if out.status == LpStatus::Infeasible {
                return Ok(true);
            }
            if out.objective > r.offset + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Same set with unit normals, duplicate directions merged and implied rows dropped.
    pub fn remove_redundant(&self, tol: f64) -> Result<Polytope> {
        let mut rows: Vec<Halfspace> = Vec::new();
        for r in &self.rows {
            let Some(r) = r.normalized() else {
                if r.offset < 0.0 {
                    // empty set: keep the contradiction
                    return Ok(Polytope {
                        dim: self.dim,
                        rows: vec![r.clone()],
                    });
                }
                continue;
            };
            match rows
                .iter_mut()
                .find(|q| q.normal.iter().zip(&r.normal).all(|(a, b)| (a - b).abs() <= 1e-12))
            {
                Some(q) => q.offset = q.offset.min(r.offset),
                None => rows.push(r),
            }
        }
        let mut keep = vec![true; rows.len()];
        for i in 0..rows.len() {
            // relax row i and see whether the others already enforce it
            let mut trial: Vec<Halfspace> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && keep[j])
                .map(|(_, r)| r.clone())
                .collect();
            trial.push(Halfspace {
                normal: rows[i].normal.clone(),
                offset: rows[i].offset + 1.0,
            });
            let p = Polytope { dim: self.dim, rows: trial };
            match p.support(&rows[i].normal)? {
                None => {
                    return Ok(Polytope {
                        dim: self.dim,
                        rows,
                    })
                }
                Some(v) if v <= rows[i].offset + tol => keep[i] = false,
                Some(_) => {}
            }
        }
        let rows = rows.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect();
        Ok(Polytope { dim: self.dim, rows })
    }

    /// Interval hull along each axis, `None` when empty.
    pub fn bounding_box(&self) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            let Some(u) = self.support(&e)? else { return Ok(None) };
            e[i] = -1.0;
            let Some(l) = self.support(&e)? else { return Ok(None) };
            hi[i] = u;
            lo[i] = -l;
        }
        Ok(Some((lo, hi)))
    }
}

/// States whose successor stays in `s` for every admissible disturbance.
pub fn pre_set(sys: &LinearSystem, s: &Polytope) -> Polytope {
    let cl = sys.closed_loop();
    let n = sys.dim();
    let bk1: Vec<f64> = sys.b.iter().map(|b| b * sys.k[0]).collect();
    let rows = s
        .rows
        .iter()
        .map(|r| {
            let h = &r.normal;
            let normal: Vec<f64> = (0..n).map(|j| (0..n).map(|i| h[i] * cl[i][j]).sum()).collect();
            let he: f64 = h.iter().zip(&sys.e).map(|(a, b)| a * b).sum();
            let hb: f64 = h.iter().zip(&bk1).map(|(a, b)| a * b).sum();
            let w2: f64 = h.iter().zip(&sys.w2_bound).map(|(a, b)| a.abs() * b).sum();
            Halfspace {
                normal,
                offset: r.offset - sys.w1_bound * he.abs() - w2 - sys.dd_bound * hb.abs(),
            }
        })
        .collect();
    Polytope { dim: s.dim, rows }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// A robust invariant subset of the safe set.
    Invariant { set: Polytope, iterations: usize },
    Empty { iterations: usize },
    /// Iteration limit reached; `set` is the last iterate and is not certified.
    NotConverged { set: Polytope, iterations: usize },
}

impl Verdict {
    pub fn set(&self) -> Option<&Polytope> {
        match self {
            Verdict::Invariant { set, .. } => Some(set),
            _ => None,
        }
    }
}

/// Largest robust invariant subset of `safe` by iterating `S <- S ∩ pre(S)`.
pub fn invariant_set(sys: &LinearSystem, safe: &Polytope, max_iters: usize) -> Result<Verdict> {
    const TOL: f64 = 1e-9;
    sys.validate()?;
    if safe.dim != sys.dim() {
        return Err(Error::InvalidArgument("safe set dimension must match the state".into()));
    }
    let mut s = safe.remove_redundant(TOL)?;
    for it in 0..=max_iters {
        if s.is_empty()? {
            return Ok(Verdict::Empty { iterations: it });
        }
        let pre = pre_set(sys, &s);
        if s.is_subset_of(&pre, TOL)? {
            return Ok(Verdict::Invariant { set: s, iterations: it });
        }
        if it == max_iters {
            break;
        }
        s = s.intersect(&pre).remove_redundant(TOL)?;
    }
    Ok(Verdict::NotConverged {
        set: s,
        iterations: max_iters,
    })
}
