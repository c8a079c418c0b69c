use crate::error::{Error, Result};
use crate::lincore::{ConstraintSystem, LinExpr, VarId};
use crate::model::Interval;

fn require_unstable(range: &Interval) -> Result<()> {
    if range.lo.is_finite() && range.hi.is_finite() && range.lo < 0.0 && range.hi > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "ReLU gadget needs an unstable range, got [{}, {}]",
            range.lo, range.hi
        )))
    }
}

/// `x >= 0`, as a bound when `x` is a plain variable.
fn nonnegative(cs: &mut ConstraintSystem, x: &LinExpr) {
    match x.as_var() {
        Some(v) => cs.tighten_bounds(v, 0.0, f64::INFINITY),
        None => cs.add_ge(x, 0.0),
    }
}

/// Big-M encoding of `x = relu(y)` for `y` in `range`:
/// `x >= 0`, `x >= y`, `x <= y - lo (1 - z)`, `x <= hi z` with a fresh binary `z`.
pub fn encode_relu_exact(
    cs: &mut ConstraintSystem,
    y: &LinExpr,
    x: &LinExpr,
    range: Interval,
    name: &str,
) -> Result<VarId> {
    require_unstable(&range)?;
    let z = cs.add_binary(format!("z_{name}"));
    nonnegative(cs, x);
    cs.add_ge(&(x.clone() - y.clone()), 0.0);
    // x - y - lo z <= -lo
    cs.add_le(&(x.clone() - y.clone() - LinExpr::term(z, range.lo)), -range.lo);
    cs.add_le(&(x.clone() - LinExpr::term(z, range.hi)), 0.0);
    Ok(z)
}

/// Triangle relaxation of `x = relu(y)`: `x >= 0`, `x >= y`, `x <= hi (y - lo) / (hi - lo)`.
pub fn encode_relu_lpr(cs: &mut ConstraintSystem, y: &LinExpr, x: &LinExpr, range: Interval) -> Result<()> {
    require_unstable(&range)?;
    nonnegative(cs, x);
    cs.add_ge(&(x.clone() - y.clone()), 0.0);
    let s = range.hi / (range.hi - range.lo);
    cs.add_le(&(x.clone() - y.clone() * s), -s * range.lo);
    Ok(())
}

/// Relaxation of `dx = relu(y + dy) - relu(y)` over all `y` for `dy` in `range`.
///
/// With `l = min(0, lo)` and `u = max(0, hi)`:
/// `l (u - dy) / (u - l) <= dx <= u (dy - l) / (u - l)`, or `dx = 0` when `u = l`.
pub fn encode_dist_lpr(cs: &mut ConstraintSystem, dy: &LinExpr, dx: &LinExpr, range: Interval) -> Result<()> {
    if !range.lo.is_finite() || !range.hi.is_finite() {
        return Err(Error::InvalidArgument("distance range must be finite".into()));
    }
    let (l, u) = dist_hull(range);
    if u == l {
        match dx.as_var() {
            Some(v) => cs.tighten_bounds(v, 0.0, 0.0),
            None => cs.add_eq(dx, 0.0),
        }
        return Ok(());
    }
    let span = u - l;
    cs.add_ge(&(dx.clone() + dy.clone() * (l / span)), l * u / span);
    cs.add_le(&(dx.clone() - dy.clone() * (u / span)), -u * l / span);
    Ok(())
}

fn dist_hull(range: Interval) -> (f64, f64) {
    (range.lo.min(0.0), range.hi.max(0.0))
}

/// Interval of `dx` allowed by [`encode_dist_lpr`] at a given `dy`.
pub fn dist_lpr_bounds(range: Interval, dy: f64) -> Interval {
    let (l, u) = dist_hull(range);
    if u == l {
        return Interval::ZERO;
    }
    Interval::new(l * (u - dy) / (u - l), u * (dy - l) / (u - l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{solve_milp, LpSolver, Objective, SolveStatus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(cs: &mut ConstraintSystem, lo: f64, hi: f64) -> (VarId, VarId) {
        let y = cs.add_var("y", lo, hi);
        let x = cs.add_var("x", lo.min(0.0), hi.max(0.0));
        (y, x)
    }

    #[test]
    fn exact_gadget_is_the_relu_graph() {
        let mut cs = ConstraintSystem::new();
        let (y, x) = pair(&mut cs, -1.0, 1.0);
        let r = Interval::new(-1.0, 1.0);
        let z = encode_relu_exact(&mut cs, &y.into(), &x.into(), r, "n").unwrap();
        assert_eq!(z.0, 2);
        assert!(cs.check_feasible(&[0.5, 0.5, 1.0], 1e-9));
        for zv in [0.0, 1.0] {
            assert!(!cs.check_feasible(&[0.5, 0.0, zv], 1e-9));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let yv: f64 = rng.gen_range(-1.0..=1.0);
            let zv = if yv > 0.0 { 1.0 } else { 0.0 };
            assert!(cs.check_feasible(&[yv, yv.max(0.0), zv], 1e-9));
        }
        cs.set_objective(Objective::maximize(LinExpr::from(x) - LinExpr::from(y)));
        let res = solve_milp(&cs, 100).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_at_zero_and_endpoint() {
        let mut cs = ConstraintSystem::new();
        let (y, x) = pair(&mut cs, -1.0, 1.0);
        encode_relu_lpr(&mut cs, &y.into(), &x.into(), Interval::new(-1.0, 1.0)).unwrap();
        let mut lp = LpSolver::new(&cs).unwrap();
        lp.set_var_bounds(y.0, 0.0, 0.0);
        lp.set_objective(&Objective::maximize(x));
        assert!((lp.solve().unwrap().objective - 0.5).abs() < 1e-9);
        lp.set_objective(&Objective::minimize(x));
        assert!(lp.solve().unwrap().objective.abs() < 1e-9);
        lp.set_var_bounds(y.0, 1.0, 1.0);
        assert!((lp.solve().unwrap().objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_gap_is_the_base_score() {
        // max x - relu(y) over the triangle, split at y = 0
        let mut cs = ConstraintSystem::new();
        let (y, x) = pair(&mut cs, -1.0, 1.0);
        encode_relu_lpr(&mut cs, &y.into(), &x.into(), Interval::new(-1.0, 1.0)).unwrap();
        let mut lp = LpSolver::new(&cs).unwrap();
        lp.set_var_bounds(y.0, -1.0, 0.0);
        lp.set_objective(&Objective::maximize(x));
        let left = lp.solve().unwrap().objective;
        lp.set_var_bounds(y.0, 0.0, 1.0);
        lp.set_objective(&Objective::maximize(LinExpr::from(x) - LinExpr::from(y)));
        let right = lp.solve().unwrap().objective;
        assert!((left.max(right) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unstable_precondition() {
        let mut cs = ConstraintSystem::new();
        let (y, x) = pair(&mut cs, 0.2, 1.0);
        let r = Interval::new(0.2, 1.0);
        assert!(encode_relu_lpr(&mut cs, &y.into(), &x.into(), r).is_err());
        assert!(encode_relu_exact(&mut cs, &y.into(), &x.into(), r, "n").is_err());
    }

    #[test]
    fn distance_relaxation_examples() {
        let b = dist_lpr_bounds(Interval::new(-0.15, 0.15), 0.0);
        assert!((b.lo + 0.075).abs() < 1e-12 && (b.hi - 0.075).abs() < 1e-12);
        let b = dist_lpr_bounds(Interval::new(0.0, 0.2), 0.13);
        assert!(b.lo.abs() < 1e-12 && (b.hi - 0.13).abs() < 1e-12);
        assert_eq!(dist_lpr_bounds(Interval::ZERO, 0.0), Interval::ZERO);
    }

    #[test]
    fn distance_rows_match_bounds() {
        let r = Interval::new(-0.1, 0.3);
        let mut cs = ConstraintSystem::new();
        let dy = cs.add_var("dy", r.lo, r.hi);
        let dx = cs.add_var("dx", -1.0, 1.0);
        encode_dist_lpr(&mut cs, &dy.into(), &dx.into(), r).unwrap();
        for dyv in [-0.1, 0.0, 0.05, 0.3] {
            let b = dist_lpr_bounds(r, dyv);
            assert!(cs.check_feasible(&[dyv, b.lo], 1e-12));
            assert!(cs.check_feasible(&[dyv, b.hi], 1e-12));
            assert!(!cs.check_feasible(&[dyv, b.hi + 1e-6], 1e-9));
            assert!(!cs.check_feasible(&[dyv, b.lo - 1e-6], 1e-9));
        }
        let mut cs = ConstraintSystem::new();
        let dy = cs.add_var("dy", 0.0, 0.0);
        let dx = cs.add_var("dx", -1.0, 1.0);
        encode_dist_lpr(&mut cs, &dy.into(), &dx.into(), Interval::ZERO).unwrap();
        assert_eq!((cs.var(dx).lower, cs.var(dx).upper), (0.0, 0.0));
    }
}
