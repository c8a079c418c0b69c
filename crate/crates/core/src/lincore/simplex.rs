//! Bounded-variable revised simplex over a sparse LU of the basis.
//!
//! Every constraint row gets a slack `s` with `a x + s = b`; `<=` rows have `s >= 0`,
//! equality rows have `s = 0`. A dual feasible starting basis (the usual case after bound
//! changes in branch and bound) is repaired with the dual method. Otherwise the primal
//! phase 1 minimizes the sum of bound violations of the basic variables, so any basis can
//! be used as a starting point.

use super::lu::Lu;
use super::system::{ConstraintSystem, Objective, Relation};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
/// Bound violations below this are ignored by phase 1.
const PRIMAL_TOL: f64 = 1e-9;
/// Largest violation accepted as feasible when phase 1 stalls.
const FEAS_TOL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-10;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 1000;
/// Consecutive dual-degenerate pivots before handing over to the primal method.
const DUAL_STALL: usize = 50;
/// Basis updates kept in product form before refactoring.
const MAX_UPDATES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Objective in the caller's sense (meaningless when infeasible).
    pub objective: f64,
    /// Structural variable values.
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// Reusable LP solver over the structure of one [`ConstraintSystem`].
///
/// Integrality markers are ignored. Bounds and objective may be changed between solves.
#[derive(Clone, Debug)]
pub struct LpSolver {
    n: usize,
    m: usize,
    /// Structural columns in compressed form.
    col_start: Vec<usize>,
    col_entries: Vec<(usize, f64)>,
    /// Slack columns, one unit entry per row.
    unit: Vec<(usize, f64)>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lu: Lu,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    /// Minimization cost over all columns.
    cost: Vec<f64>,
    sign: f64,
    constant: f64,
    max_pivots: usize,
    /// Basic values are out of date after bound changes.
    stale: bool,
}

impl LpSolver {
    pub fn new(cs: &ConstraintSystem) -> Result<Self> {
        cs.validate()?;
        let n = cs.num_vars();
        let m = cs.constraints().len();
        let w = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut b = vec![0.0; m];
        let mut lower = Vec::with_capacity(w);
        let mut upper = Vec::with_capacity(w);
        for v in cs.vars() {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in cs.constraints().iter().enumerate() {
            for &(v, coef) in &c.terms {
                match cols[v.0].last_mut() {
                    Some(last) if last.0 == i => last.1 += coef,
                    _ => cols[v.0].push((i, coef)),
                }
            }
            b[i] = c.rhs;
            lower.push(0.0);
            upper.push(match c.relation {
                Relation::Le => f64::INFINITY,
                Relation::Eq => 0.0,
            });
        }
        let mut col_start = vec![0];
        let mut col_entries = Vec::new();
        for col in &cols {
            col_entries.extend(col.iter().filter(|e| e.1 != 0.0));
            col_start.push(col_entries.len());
        }
        let mut solver = LpSolver {
            n,
            m,
            col_start,
            col_entries,
            unit: (0..m).map(|i| (i, 1.0)).collect(),
            b,
            lower,
            upper,
            lu: Lu::default(),
            beta: vec![0.0; m],
            basis: (n..w).collect(),
            state: vec![State::AtLower; w],
            cost: vec![0.0; w],
            sign: 1.0,
            constant: 0.0,
            max_pivots: 50_000 + 200 * w,
            stale: false,
        };
        solver.slack_basis();
        solver.set_objective(cs.objective());
        Ok(solver)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_objective(&mut self, obj: &Objective) {
        self.sign = obj.sense.sign();
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in &obj.expr.terms {
            // internal form is minimization
            self.cost[v.0] -= self.sign * c;
        }
        self.constant = obj.expr.constant;
    }

    /// Changes the bounds of a structural variable. The basis is kept.
    pub fn set_var_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(var < self.n && lower.is_finite() && upper.is_finite());
        let old = self.nonbasic_value(var);
        self.lower[var] = lower;
        self.upper[var] = upper;
        match self.state[var] {
            State::Basic(_) => {}
            s => {
                let new_state = if s == State::AtUpper { State::AtUpper } else { State::AtLower };
                self.state[var] = new_state;
                if self.nonbasic_value(var) != old {
                    self.stale = true;
                }
            }
        }
    }

    fn w(&self) -> usize {
        self.n + self.m
    }

    fn nonbasic_value(&self, j: usize) -> Option<f64> {
        match self.state[j] {
            State::Basic(_) => None,
            State::AtLower => Some(self.lower[j]),
            State::AtUpper => Some(self.upper[j]),
        }
    }

    /// Column `j` of `[A | I]` as (row, value) pairs.
    fn column(&self, j: usize) -> &[(usize, f64)] {
        if j < self.n {
            &self.col_entries[self.col_start[j]..self.col_start[j + 1]]
        } else {
            &self.unit[j - self.n..j - self.n + 1]
        }
    }

    fn scatter(&self, j: usize, out: &mut [f64], scale: f64) {
        for &(i, v) in self.column(j) {
            out[i] += scale * v;
        }
    }

    /// `B^-1 a_j`, indexed by basis position.
    fn ftran_column(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        self.scatter(j, &mut v, 1.0);
        self.lu.ftran(&mut v);
        v
    }

    /// `y^T a_j` for a row-indexed `y`.
    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        self.column(j).iter().map(|&(i, v)| v * y[i]).sum()
    }

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            let prev = match self.state[j] {
                State::Basic(r) => self.beta[r],
                State::AtLower => self.lower[j],
                State::AtUpper => self.upper[j],
            };
            self.state[j] = if (prev - self.upper[j]).abs() < (prev - self.lower[j]).abs() {
                State::AtUpper
            } else {
                State::AtLower
            };
        }
        for i in 0..m {
            self.basis[i] = n + i;
            self.state[n + i] = State::Basic(i);
        }
        self.refactor();
    }

    /// Factors the current basis and recomputes the basic values from the original rows.
    fn refactor(&mut self) {
        loop {
            match Lu::factor(self.m, |k| self.column(self.basis[k])) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(sing) => {
                    log::debug!("singular basis during refactorization; repairing with slacks");
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.basis[pos];
                        let v = self.beta[pos];
                        self.state[old] = if (v - self.upper[old]).abs() < (v - self.lower[old]).abs() {
                            State::AtUpper
                        } else {
                            State::AtLower
                        };
                        let slack = self.n + row;
                        self.basis[pos] = slack;
                        self.state[slack] = State::Basic(pos);
                    }
                }
            }
        }
        self.refresh();
    }

    /// Recomputes the basic values from the original rows with the current factors.
    fn refresh(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.w() {
            if let Some(v) = self.nonbasic_value(j) {
                if v != 0.0 {
                    self.scatter(j, &mut rhs, -v);
                }
            }
        }
        self.lu.ftran(&mut rhs);
        self.beta = rhs;
        self.stale = false;
    }

    /// Largest bound violation of a basic variable.
    fn max_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .map(|(&j, &v)| (self.lower[j] - v).max(v - self.upper[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest residual of the original rows at the current point.
    fn residual(&self) -> f64 {
        let x = self.values();
        let mut act = x[self.n..].to_vec();
        for j in 0..self.n {
            if x[j] != 0.0 {
                self.scatter(j, &mut act, x[j]);
            }
        }
        act.iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max)
    }

    /// Values of all columns (structurals then slacks).
    fn values(&self) -> Vec<f64> {
        (0..self.w())
            .map(|j| match self.state[j] {
                State::Basic(r) => self.beta[r],
                State::AtLower => self.lower[j],
                State::AtUpper => self.upper[j],
            })
            .collect()
    }

    /// Phase-2 reduced costs of every column; zero for basic columns.
    fn reduced_costs(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.lu.btran(&mut y);
        (0..self.w())
            .map(|j| match self.state[j] {
                State::Basic(_) => 0.0,
                _ => self.cost[j] - self.dot_column(j, &y),
            })
            .collect()
    }

    /// Moves boxed nonbasic columns to the bound their reduced cost prefers. Returns whether
    /// the basis is then dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let d = self.reduced_costs();
        let mut flipped = false;
        for j in 0..self.w() {
            let (l, u) = (self.lower[j], self.upper[j]);
            match self.state[j] {
                State::Basic(_) => {}
                _ if u - l <= 0.0 => {}
                State::AtLower if d[j] < -DUAL_TOL => {
                    if !u.is_finite() {
                        return false;
                    }
                    self.state[j] = State::AtUpper;
                    flipped = true;
                }
                State::AtUpper if d[j] > DUAL_TOL => {
                    self.state[j] = State::AtLower;
                    flipped = true;
                }
                _ => {}
            }
        }
        if flipped {
            self.refresh();
        }
        true
    }

    /// Dual simplex from a dual feasible basis. Returns `Some(Infeasible)` when a dual ray
    /// proves infeasibility, `None` once the basis is primal feasible or the dual stalls.
    fn dual(&mut self, pivots: &mut usize) -> Result<Option<LpStatus>> {
        let (m, w) = (self.m, self.w());
        let mut d = self.reduced_costs();
        let mut row = vec![0.0; w];
        let mut stalled = 0;
        loop {
            if stalled > DUAL_STALL {
                return Ok(None);
            }
            if self.lu.num_updates() >= MAX_UPDATES || self.lu.is_bloated() {
                self.refactor();
                d = self.reduced_costs();
            }
            let mut leave = None;
            let mut worst = PRIMAL_TOL;
            for i in 0..m {
                let j = self.basis[i];
                let v = self.beta[i];
                let viol = (self.lower[j] - v).max(v - self.upper[j]);
                if viol > worst {
                    worst = viol;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { return Ok(None) };
            let out = self.basis[r];
            let v = self.beta[r];
            let up = v < self.lower[out];
            let target = if up { self.lower[out] } else { self.upper[out] };

            let mut rho = vec![0.0; m];
            rho[r] = 1.0;
            self.lu.btran(&mut rho);
            // x_out moves by -row_j * step_j; it must rise when `up`
            let want = if up { -1.0 } else { 1.0 };
            let mut theta_max = f64::INFINITY;
            for j in 0..w {
                row[j] = 0.0;
                if matches!(self.state[j], State::Basic(_)) || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let a = self.dot_column(j, &rho);
                row[j] = a;
                let dj = match self.state[j] {
                    State::AtLower if want * a > PIVOT_TOL => d[j].max(0.0),
                    State::AtUpper if want * a < -PIVOT_TOL => (-d[j]).max(0.0),
                    _ => continue,
                };
                theta_max = theta_max.min((dj + DUAL_TOL) / a.abs());
            }
            let mut entering: Option<usize> = None;
            let mut best = 0.0;
            for j in 0..w {
                let a = row[j];
                let dj = match self.state[j] {
                    State::Basic(_) => continue,
                    _ if self.upper[j] - self.lower[j] <= 0.0 => continue,
                    State::AtLower if want * a > PIVOT_TOL => d[j].max(0.0),
                    State::AtUpper if want * a < -PIVOT_TOL => (-d[j]).max(0.0),
                    _ => continue,
                };
                if dj / a.abs() <= theta_max && a.abs() > best {
                    best = a.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                if self.lu.num_updates() > 0 {
                    self.refactor();
                    d = self.reduced_costs();
                    continue;
                }
                return Ok(Some(LpStatus::Infeasible));
            };

            *pivots += 1;
            let col = self.ftran_column(q);
            let step = (v - target) / col[r];
            let entering_value = self.nonbasic_value(q).unwrap() + step;
            for (b, a) in self.beta.iter_mut().zip(&col) {
                *b -= a * step;
            }
            let t = d[q] / row[q];
            if t.abs() <= DEGENERATE_STEP {
                stalled += 1;
            } else {
                stalled = 0;
            }
            for j in 0..w {
                if row[j] != 0.0 {
                    d[j] -= t * row[j];
                }
            }
            d[q] = 0.0;
            d[out] = -t;
            self.state[out] = if up { State::AtLower } else { State::AtUpper };
            self.basis[r] = q;
            self.state[q] = State::Basic(r);
            self.beta[r] = entering_value;
            self.lu.update(r, &col);
        }
    }

    pub fn solve(&mut self) -> Result<LpOutcome> {
        let w = self.w();
        let m = self.m;
        let mut pivots = 0usize;
        let mut stalled = 0usize;
        let mut feas_tol = PRIMAL_TOL;
        let mut cb = vec![0.0; m];
        if self.stale {
            self.refresh();
        }
        if self.max_infeasibility() > PRIMAL_TOL && self.make_dual_feasible() {
            if let Some(status) = self.dual(&mut pivots)? {
                return Ok(LpOutcome {
                    status,
                    objective: f64::NAN,
                    x: self.values()[..self.n].to_vec(),
                    pivots,
                });
            }
        }
        loop {
            if pivots > self.max_pivots {
                return Err(Error::Solver(format!("simplex pivot limit {} exceeded", self.max_pivots)));
            }
            if self.lu.num_updates() >= MAX_UPDATES || self.lu.is_bloated() {
                self.refactor();
            }
            let mut phase1 = false;
            for i in 0..m {
                let j = self.basis[i];
                let v = self.beta[i];
                cb[i] = if v < self.lower[j] - feas_tol {
                    phase1 = true;
                    -1.0
                } else if v > self.upper[j] + feas_tol {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for i in 0..m {
                    cb[i] = self.cost[self.basis[i]];
                }
            }
            let mut y = cb.clone();
            self.lu.btran(&mut y);

            let bland = stalled >= BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..w {
                if matches!(self.state[j], State::Basic(_)) || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_column(j, &y);
                let dir = match self.state[j] {
                    State::AtLower if d < -DUAL_TOL => 1.0,
                    State::AtUpper if d > DUAL_TOL => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                if phase1 {
                    if self.lu.num_updates() > 0 {
                        self.refactor();
                        continue;
                    }
                    if self.max_infeasibility() <= FEAS_TOL && feas_tol < FEAS_TOL {
                        feas_tol = FEAS_TOL;
                        continue;
                    }
                    return Ok(LpOutcome {
                        status: LpStatus::Infeasible,
                        objective: f64::NAN,
                        x: self.values()[..self.n].to_vec(),
                        pivots,
                    });
                }
                if self.lu.num_updates() > 0 && self.residual() > 1e-9 {
                    self.refactor();
                    continue;
                }
                let x = self.values()[..self.n].to_vec();
                let min_obj: f64 = x.iter().zip(&self.cost).map(|(v, c)| v * c).sum();
                return Ok(LpOutcome {
                    status: LpStatus::Optimal,
                    objective: -self.sign * min_obj + self.constant,
                    x,
                    pivots,
                });
            };

            let col = self.ftran_column(q);
            // ratio test: basic i moves by -alpha_i * theta
            let flip_limit = self.upper[q] - self.lower[q];
            let mut theta_max = flip_limit;
            for i in 0..m {
                let alpha = dir * col[i];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[i];
                let v = self.beta[i];
                let (l, u) = (self.lower[j], self.upper[j]);
                let relaxed = if alpha > 0.0 {
                    if v < l - feas_tol {
                        continue;
                    } else if v > u + feas_tol {
                        (v - u) / alpha
                    } else {
                        (v - l + HARRIS_TOL) / alpha
                    }
                } else if v > u + feas_tol {
                    continue;
                } else if v < l - feas_tol {
                    (v - l) / alpha
                } else if u.is_finite() {
                    (v - u - HARRIS_TOL) / alpha
                } else {
                    continue;
                };
                if relaxed < theta_max {
                    theta_max = relaxed.max(0.0);
                }
            }
            if !theta_max.is_finite() {
                return Err(Error::Solver("linear program is unbounded".into()));
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut leave_key = (f64::NEG_INFINITY, usize::MAX);
            for i in 0..m {
                let alpha = dir * col[i];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[i];
                let v = self.beta[i];
                let (l, u) = (self.lower[j], self.upper[j]);
                let (ratio, to_upper) = if alpha > 0.0 {
                    if v < l - feas_tol {
                        continue;
                    } else if v > u + feas_tol {
                        ((v - u) / alpha, true)
                    } else {
                        ((v - l) / alpha, false)
                    }
                } else if v > u + feas_tol {
                    continue;
                } else if v < l - feas_tol {
                    ((v - l) / alpha, false)
                } else if u.is_finite() {
                    ((v - u) / alpha, true)
                } else {
                    continue;
                };
                if ratio > theta_max {
                    continue;
                }
                let key = if bland {
                    (-ratio, usize::MAX - j)
                } else {
                    (alpha.abs(), usize::MAX - j)
                };
                if key > leave_key {
                    leave_key = key;
                    leave = Some((i, ratio.max(0.0), to_upper));
                }
            }

            pivots += 1;
            match leave {
                Some((r, theta, to_upper)) if theta <= flip_limit => {
                    let entering_value = self.nonbasic_value(q).unwrap() + dir * theta;
                    for (b, a) in self.beta.iter_mut().zip(&col) {
                        *b -= a * dir * theta;
                    }
                    let leaving = self.basis[r];
                    self.state[leaving] = if to_upper { State::AtUpper } else { State::AtLower };
                    self.basis[r] = q;
                    self.state[q] = State::Basic(r);
                    self.beta[r] = entering_value;
                    self.lu.update(r, &col);
                    if theta <= DEGENERATE_STEP {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                }
                _ => {
                    // bound flip
                    let delta = dir * flip_limit;
                    self.state[q] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    for (b, a) in self.beta.iter_mut().zip(&col) {
                        *b -= a * delta;
                    }
                    stalled = 0;
                }
            }
        }
    }
}
