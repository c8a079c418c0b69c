use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Handle of a variable inside one [`ConstraintSystem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

/// `sum(coef * var) + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        LinExpr {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, v: VarId, coef: f64) {
        self.terms.push((v, coef));
    }

    /// `self += coef * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, coef: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * coef)));
        self.constant += other.constant * coef;
    }

    /// The single variable this expression is, if it is exactly `1 * v`.
    pub fn as_var(&self) -> Option<VarId> {
        match self.terms.as_slice() {
            [(v, c)] if *c == 1.0 && self.constant == 0.0 => Some(*v),
            _ => None,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(v, c)| acc + c * point[v.0])
    }

    /// Terms with duplicates merged and zeros dropped, sorted by variable.
    pub fn normalized_terms(&self) -> Vec<(VarId, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(t.len());
        for (v, c) in t {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        self.terms.iter_mut().for_each(|(_, c)| *c *= k);
        self.constant *= k;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

/// `sum(terms) <relation> rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * point[v.0]).sum()
    }

    /// Amount by which `point` violates this constraint (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let a = self.activity(point);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// +1 for maximization, -1 for minimization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub expr: LinExpr,
    pub sense: Sense,
}

impl Objective {
    pub fn maximize(expr: impl Into<LinExpr>) -> Self {
        Objective {
            expr: expr.into(),
            sense: Sense::Maximize,
        }
    }

    pub fn minimize(expr: impl Into<LinExpr>) -> Self {
        Objective {
            expr: expr.into(),
            sense: Sense::Minimize,
        }
    }
}

/// Variables with finite bounds, linear constraints, binary markers, and a linear objective.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl Default for ConstraintSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstraintSystem {
    pub fn new() -> Self {
        ConstraintSystem {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Objective::maximize(LinExpr::new()),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.binary).map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    /// Intersects the bounds of `v` with `[lower, upper]`.
    pub fn tighten_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = var.lower.max(lower);
        var.upper = var.upper.min(upper);
    }

    fn push(&mut self, expr: &LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            terms: expr.normalized_terms(),
            relation,
            rhs: rhs - expr.constant,
        });
    }

    /// `expr <= rhs`.
    pub fn add_le(&mut self, expr: &LinExpr, rhs: f64) {
        self.push(expr, Relation::Le, rhs);
    }

    /// `expr >= rhs`, stored as `-expr <= -rhs`.
    pub fn add_ge(&mut self, expr: &LinExpr, rhs: f64) {
        self.push(&(expr.clone() * -1.0), Relation::Le, -rhs);
    }

    pub fn add_eq(&mut self, expr: &LinExpr, rhs: f64) {
        self.push(expr, Relation::Eq, rhs);
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.objective = objective;
    }

    /// Checks that bounds are finite and ordered, binaries lie within `[0, 1]`, and every
    /// coefficient is finite and references a declared variable.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(Error::InvalidArgument(format!("variable {i} ({}) has an infinite bound", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::InvalidArgument(format!(
                    "variable {i} ({}) has lower {} > upper {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidArgument(format!("binary {i} ({}) has bounds outside [0, 1]", v.name)));
            }
        }
        let n = self.vars.len();
        let check_terms = |terms: &[(VarId, f64)], what: &str| -> Result<()> {
            for &(v, c) in terms {
                if v.0 >= n {
                    return Err(Error::InvalidArgument(format!("{what} references undeclared variable {}", v.0)));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("{what} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        for (k, c) in self.constraints.iter().enumerate() {
            check_terms(&c.terms, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("constraint {k} has a non-finite right-hand side")));
            }
        }
        check_terms(&self.objective.expr.terms, "objective")?;
        Ok(())
    }

    /// Objective value at `point`.
    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.expr.eval(point)
    }

    /// Whether `point` satisfies every bound, constraint and integrality marker within `tol`.
    pub fn check_feasible(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.vars.len() {
            return false;
        }
        let bounds_ok = self.vars.iter().zip(point).all(|(v, &x)| {
            x >= v.lower - tol && x <= v.upper + tol && (!v.binary || (x - x.round()).abs() <= tol)
        });
        bounds_ok && self.constraints.iter().all(|c| c.violation(point) <= tol)
    }

    /// Debug dump in LP text format.
    ///
    /// ```text
    /// Maximize | Minimize
    ///  obj: <terms> [+ constant]
    /// Subject To
    ///  c<k>: <terms> <= | = <rhs>
    /// Bounds
    ///  <lower> <= <name> <= <upper>
    /// Binaries
    ///  <name> ...
    /// End
    /// ```
    ///
    /// `<terms>` is a sequence of `+ <coef> <name>` / `- <coef> <name>`. Names are the
    /// variable names with any character outside `[A-Za-z0-9_]` replaced by `_`, suffixed with
    /// `#<id>` when needed for uniqueness.
    pub fn to_lp_string(&self) -> String {
        let names: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let clean: String = v
                    .name
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                    .collect();
                if clean.is_empty() {
                    format!("v{i}")
                } else {
                    format!("{clean}_{i}")
                }
            })
            .collect();
        let terms = |terms: &[(VarId, f64)]| -> String {
            if terms.is_empty() {
                return "0".into();
            }
            terms
                .iter()
                .map(|&(v, c)| {
                    let sign = if c < 0.0 { '-' } else { '+' };
                    format!("{sign} {} {}", c.abs(), names[v.0])
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}",
            match self.objective.sense {
                Sense::Maximize => "Maximize",
                Sense::Minimize => "Minimize",
            }
        );
        let obj_terms = self.objective.expr.normalized_terms();
        let _ = write!(out, " obj: {}", terms(&obj_terms));
        if self.objective.expr.constant != 0.0 {
            let _ = write!(out, " + {}", self.objective.expr.constant);
        }
        out.push('\n');
        out.push_str("Subject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " c{k}: {} {rel} {}", terms(&c.terms), c.rhs);
        }
        out.push_str("Bounds\n");
        for (v, name) in self.vars.iter().zip(&names) {
            let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
        }
        let bins: Vec<&str> = self
            .vars
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.binary)
            .map(|(_, n)| n.as_str())
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            let _ = writeln!(out, " {}", bins.join(" "));
        }
        out.push_str("End\n");
        out
    }
}

/// Free-function form of [`ConstraintSystem::check_feasible`].
pub fn check_feasible(cs: &ConstraintSystem, point: &[f64], tol: f64) -> bool {
    cs.check_feasible(point, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_merge_and_move_constants() {
        let mut cs = ConstraintSystem::new();
        let x = cs.add_var("x", 0.0, 1.0);
        let y = cs.add_var("y", 0.0, 1.0);
        let e = LinExpr::from(x) + LinExpr::from(y) * 2.0 - LinExpr::from(x) * 0.5 + LinExpr::constant(1.0);
        cs.add_le(&e, 3.0);
        cs.add_ge(&LinExpr::from(y), 0.25);
        let c = &cs.constraints()[0];
        assert_eq!(c.terms, vec![(x, 0.5), (y, 2.0)]);
        assert_eq!(c.rhs, 2.0);
        assert_eq!(cs.constraints()[1].terms, vec![(y, -1.0)]);
        assert_eq!(cs.constraints()[1].rhs, -0.25);
    }

    #[test]
    fn feasibility_check() {
        let mut cs = ConstraintSystem::new();
        let x = cs.add_var("x", 0.0, 1.0);
        cs.add_le(&LinExpr::from(x), 0.5);
        assert!(check_feasible(&cs, &[0.5], 1e-9));
        assert!(!check_feasible(&cs, &[0.501], 1e-6));
        assert!(!check_feasible(&cs, &[-0.1], 1e-6));
        let z = cs.add_binary("z");
        assert!(!cs.check_feasible(&[0.2, 0.5], 1e-6));
        assert!(cs.check_feasible(&[0.2, 1.0], 1e-6));
        let _ = z;
    }

    #[test]
    fn validation_rejects_bad_systems() {
        let mut cs = ConstraintSystem::new();
        let x = cs.add_var("x", 0.0, f64::INFINITY);
        assert!(cs.validate().is_err());
        cs.set_bounds(x, 0.0, 1.0);
        assert!(cs.validate().is_ok());
        cs.add_le(&LinExpr::term(VarId(5), 1.0), 1.0);
        assert!(cs.validate().is_err());
    }

    #[test]
    fn lp_dump_has_all_sections() {
        let mut cs = ConstraintSystem::new();
        let x = cs.add_var("y[1,0]", -1.0, 1.0);
        let z = cs.add_binary("z");
        cs.add_le(&(LinExpr::from(x) - LinExpr::from(z)), 0.0);
        cs.set_objective(Objective::minimize(x));
        let s = cs.to_lp_string();
        for section in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(s.contains(section), "{s}");
        }
        assert!(s.contains("c0: + 1 y_1_0__0 - 1 z_1 <= 0"), "{s}");
    }
}
