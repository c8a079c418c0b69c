use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::relu::{encode_dist_lpr, encode_relu_exact, encode_relu_lpr};
use crate::error::{Error, Result};
use crate::lincore::{ConstraintSystem, LinExpr, Objective, Sense};
use crate::model::{Interval, NeuronRanges, NeuronRef, Phase, RangeTable, Stage, SubNetwork, Trace};

/// Slack below which an input coupling row counts as implied by the variable bounds.
const IMPLIED_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Interleaving: per-neuron distance variables tie the two copies together.
    Itne,
    /// Basic: two independent copies coupled only at the input.
    Btne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relaxation {
    Lpr,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    /// Base input pinned to the given point.
    Local(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingConfig {
    pub scheme: Scheme,
    pub relaxation: Relaxation,
    pub refine_set: BTreeSet<NeuronRef>,
    pub mode: Mode,
    /// Adds the triangle relaxation on the perturbed copy of unrefined unstable neurons (ITNE).
    pub include_hat_relaxation: bool,
    /// Always encode the target neuron exactly.
    pub refine_target: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            scheme: Scheme::Itne,
            relaxation: Relaxation::Lpr,
            refine_set: BTreeSet::new(),
            mode: Mode::Global,
            include_hat_relaxation: true,
            refine_target: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Y,
    X,
    DeltaY,
    DeltaX,
    HatY,
    HatX,
}

/// Expressions for the six values of one encoded neuron.
///
/// Under ITNE `hat_y = y + dy`; under BTNE `dy = hat_y - y`. Stable neurons may map to
/// constants or to another neuron's expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronVars {
    pub y: LinExpr,
    pub x: LinExpr,
    pub dy: LinExpr,
    pub dx: LinExpr,
    pub hat_y: LinExpr,
    pub hat_x: LinExpr,
}

impl NeuronVars {
    pub fn get(&self, q: Quantity) -> &LinExpr {
        match q {
            Quantity::Y => &self.y,
            Quantity::X => &self.x,
            Quantity::DeltaY => &self.dy,
            Quantity::DeltaX => &self.dx,
            Quantity::HatY => &self.hat_y,
            Quantity::HatX => &self.hat_x,
        }
    }
}

/// What a variable of the encoding stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRole {
    Value(NeuronRef, Quantity),
    /// Phase binary of the base (`false`) or perturbed (`true`) copy.
    Phase(NeuronRef, bool),
}

#[derive(Clone, Debug)]
pub struct TwinEncoding {
    pub cs: ConstraintSystem,
    pub neurons: BTreeMap<NeuronRef, NeuronVars>,
    pub roles: Vec<VarRole>,
    pub inputs: Vec<NeuronRef>,
    pub target: NeuronRef,
    pub refined: Vec<NeuronRef>,
}

impl TwinEncoding {
    pub fn expr(&self, n: NeuronRef, q: Quantity) -> Option<&LinExpr> {
        self.neurons.get(&n).map(|v| v.get(q))
    }

    /// Objective on a quantity of the target neuron.
    pub fn objective(&self, q: Quantity, sense: Sense) -> Objective {
        Objective {
            expr: self.neurons[&self.target].get(q).clone(),
            sense,
        }
    }

    pub fn num_binaries(&self) -> usize {
        self.cs.num_binaries()
    }

    /// Assigns every variable from a pair of full-network forward traces.
    pub fn point_from_traces(&self, base: &Trace, hat: &Trace) -> Vec<f64> {
        self.roles
            .iter()
            .map(|role| match *role {
                VarRole::Value(n, q) => {
                    let (b, h) = match q {
                        Quantity::Y | Quantity::DeltaY | Quantity::HatY => {
                            (base.pre[n.layer][n.index], hat.pre[n.layer][n.index])
                        }
                        _ => (base.post[n.layer][n.index], hat.post[n.layer][n.index]),
                    };
                    match q {
                        Quantity::Y | Quantity::X => b,
                        Quantity::DeltaY | Quantity::DeltaX => h - b,
                        Quantity::HatY | Quantity::HatX => h,
                    }
                }
                VarRole::Phase(n, is_hat) => {
                    let trace = if is_hat { hat } else { base };
                    if trace.pre[n.layer][n.index] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

struct Builder<'a> {
    cs: ConstraintSystem,
    roles: Vec<VarRole>,
    neurons: BTreeMap<NeuronRef, NeuronVars>,
    refined: Vec<NeuronRef>,
    cfg: &'a EncodingConfig,
}

fn check_range(n: NeuronRef, what: &str, r: &Interval) -> Result<()> {
    if r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "invalid {what} range [{}, {}] for neuron ({}, {})",
            r.lo, r.hi, n.layer, n.index
        )))
    }
}

fn tag(n: NeuronRef) -> String {
    format!("{}_{}", n.layer, n.index)
}

impl Builder<'_> {
    fn var(&mut self, n: NeuronRef, q: Quantity, range: &Interval) -> Result<LinExpr> {
        check_range(n, &format!("{q:?}"), range)?;
        let prefix = match q {
            Quantity::Y => "y",
            Quantity::X => "x",
            Quantity::DeltaY => "dy",
            Quantity::DeltaX => "dx",
            Quantity::HatY => "hy",
            Quantity::HatX => "hx",
        };
        let v = self.cs.add_var(format!("{prefix}_{}", tag(n)), range.lo, range.hi);
        self.roles.push(VarRole::Value(n, q));
        Ok(v.into())
    }

    /// `lo <= expr <= hi`, skipping sides already implied by `implied`.
    fn keep_within(&mut self, expr: &LinExpr, range: &Interval, implied: &Interval) {
        if implied.lo < range.lo - IMPLIED_TOL {
            self.cs.add_ge(expr, range.lo);
        }
        if implied.hi > range.hi + IMPLIED_TOL {
            self.cs.add_le(expr, range.hi);
        }
    }

    fn exact(&mut self, n: NeuronRef, is_hat: bool, y: &LinExpr, x: &LinExpr, range: Interval) -> Result<()> {
        let name = format!("{}{}", if is_hat { "h" } else { "" }, tag(n));
        let z = encode_relu_exact(&mut self.cs, y, x, range, &name)?;
        debug_assert_eq!(z.0, self.roles.len());
        self.roles.push(VarRole::Phase(n, is_hat));
        Ok(())
    }

    /// Constrains `x = relu(y)` for one copy, given that copy's pre-activation range.
    fn relu_copy(
        &mut self,
        n: NeuronRef,
        is_hat: bool,
        y: &LinExpr,
        x: &LinExpr,
        range: Interval,
        refined: bool,
        relax: bool,
    ) -> Result<()> {
        match Phase::of(&range) {
            Phase::Inactive => {
                match x.as_var() {
                    Some(v) => self.cs.tighten_bounds(v, 0.0, 0.0),
                    None => self.cs.add_eq(x, 0.0),
                }
                Ok(())
            }
            Phase::Active => {
                self.cs.add_eq(&(x.clone() - y.clone()), 0.0);
                Ok(())
            }
            Phase::Unstable if refined => self.exact(n, is_hat, y, x, range),
            Phase::Unstable if relax => encode_relu_lpr(&mut self.cs, y, x, range),
            Phase::Unstable => Ok(()),
        }
    }

    fn is_refined(&self, n: NeuronRef, is_target: bool) -> bool {
        self.cfg.relaxation == Relaxation::Exact
            || self.cfg.refine_set.contains(&n)
            || (is_target && self.cfg.refine_target)
    }

    fn input(&mut self, n: NeuronRef, r: &NeuronRanges, pin: Option<f64>) -> Result<()> {
        let mut xr = r.x;
        if let Some(v) = pin {
            xr = Interval::point(v);
        }
        let x = self.var(n, Quantity::X, &xr)?;
        let vars = match self.cfg.scheme {
            Scheme::Itne => {
                let dx = self.var(n, Quantity::DeltaX, &r.dx)?;
                let hat = x.clone() + dx.clone();
                self.keep_within(&hat, &r.hat_x, &xr.add(&r.dx));
                NeuronVars {
                    y: x.clone(),
                    x,
                    dy: dx.clone(),
                    dx,
                    hat_y: hat.clone(),
                    hat_x: hat,
                }
            }
            Scheme::Btne => {
                let hat = self.var(n, Quantity::HatX, &r.hat_x)?;
                let d = hat.clone() - x.clone();
                if n.layer == 0 {
                    self.keep_within(&d, &r.dx, &r.hat_x.sub(&xr));
                }
                NeuronVars {
                    y: x.clone(),
                    x,
                    dy: d.clone(),
                    dx: d,
                    hat_y: hat.clone(),
                    hat_x: hat,
                }
            }
        };
        self.neurons.insert(n, vars);
        Ok(())
    }

    fn affine(&self, sub: &SubNetwork, n: NeuronRef, q: Quantity, bias: bool) -> LinExpr {
        let layer = sub.layer(n.layer);
        let mut e = LinExpr::constant(if bias { layer.bias[n.index] } else { 0.0 });
        for &(c, w) in &layer.rows[n.index] {
            e.add_scaled(self.neurons[&NeuronRef::new(n.layer - 1, c)].get(q), w);
        }
        e
    }

    /// Fresh variable `v` with bounds `range` and the row `v = expr`.
    fn defined(&mut self, n: NeuronRef, q: Quantity, range: &Interval, expr: LinExpr) -> Result<LinExpr> {
        let v = self.var(n, q, range)?;
        self.cs.add_eq(&(v.clone() - expr), 0.0);
        Ok(v)
    }

    fn hidden_itne(&mut self, sub: &SubNetwork, n: NeuronRef, r: &NeuronRanges, relu: bool, is_target: bool) -> Result<()> {
        let y_expr = self.affine(sub, n, Quantity::X, true);
        let dy_expr = self.affine(sub, n, Quantity::DeltaX, false);
        let y = self.defined(n, Quantity::Y, &r.y, y_expr)?;
        let dy = self.defined(n, Quantity::DeltaY, &r.dy, dy_expr)?;
        let hat_y = y.clone() + dy.clone();
        check_range(n, "hat_y", &r.hat_y)?;
        self.keep_within(&hat_y, &r.hat_y, &r.y.add(&r.dy));
        let (bp, hp) = (Phase::of(&r.y), Phase::of(&r.hat_y));
        let vars = if !relu || (bp == Phase::Active && hp == Phase::Active) {
            NeuronVars {
                x: y.clone(),
                dx: dy.clone(),
                hat_x: hat_y.clone(),
                y,
                dy,
                hat_y,
            }
        } else if bp == Phase::Inactive && hp == Phase::Inactive {
            NeuronVars {
                y,
                x: LinExpr::new(),
                dy,
                dx: LinExpr::new(),
                hat_y,
                hat_x: LinExpr::new(),
            }
        } else {
            let refined = self.is_refined(n, is_target);
            let x = self.var(n, Quantity::X, &r.x)?;
            let dx = self.var(n, Quantity::DeltaX, &r.dx)?;
            let hat_x = x.clone() + dx.clone();
            self.relu_copy(n, false, &y, &x, r.y, refined, true)?;
            let relax_hat = self.cfg.include_hat_relaxation;
            self.relu_copy(n, true, &hat_y, &hat_x, r.hat_y, refined, relax_hat)?;
            if refined {
                self.refined.push(n);
            }
            encode_dist_lpr(&mut self.cs, &dy, &dx, r.dy)?;
            NeuronVars {
                y,
                x,
                dy,
                dx,
                hat_y,
                hat_x,
            }
        };
        self.neurons.insert(n, vars);
        Ok(())
    }

    fn hidden_btne(&mut self, sub: &SubNetwork, n: NeuronRef, r: &NeuronRanges, relu: bool, is_target: bool) -> Result<()> {
        let y_expr = self.affine(sub, n, Quantity::X, true);
        let hy_expr = self.affine(sub, n, Quantity::HatX, true);
        let y = self.defined(n, Quantity::Y, &r.y, y_expr)?;
        let hat_y = self.defined(n, Quantity::HatY, &r.hat_y, hy_expr)?;
        let refined = relu && self.is_refined(n, is_target);
        let copy = |b: &mut Self, is_hat: bool, yv: &LinExpr, range: Interval| -> Result<LinExpr> {
            if !relu {
                return Ok(yv.clone());
            }
            match Phase::of(&range) {
                Phase::Inactive => Ok(LinExpr::new()),
                Phase::Active => Ok(yv.clone()),
                Phase::Unstable => {
                    let q = if is_hat { Quantity::HatX } else { Quantity::X };
                    let x = b.var(n, q, &range.relu())?;
                    b.relu_copy(n, is_hat, yv, &x, range, refined, true)?;
                    Ok(x)
                }
            }
        };
        let x = copy(self, false, &y, r.y)?;
        let hat_x = copy(self, true, &hat_y, r.hat_y)?;
        if refined && !r.is_stable() {
            self.refined.push(n);
        }
        self.neurons.insert(
            n,
            NeuronVars {
                dy: hat_y.clone() - y.clone(),
                dx: hat_x.clone() - x.clone(),
                y,
                x,
                hat_y,
                hat_x,
            },
        );
        Ok(())
    }
}

/// Encodes the twin pair of a sub-network.
///
/// `ranges` must cover every layer from the sub-network input up to the layer before the
/// target; the target's own ranges come from `target_ranges` when given, else from `ranges`.
/// Only neurons that can influence the target are encoded.
pub fn encode_twin_subnet(
    sub: &SubNetwork,
    ranges: &RangeTable,
    cfg: &EncodingConfig,
    target_ranges: Option<&NeuronRanges>,
) -> Result<TwinEncoding> {
    let s = sub.source();
    let target = sub.target();
    let needed = if target_ranges.is_some() { target.layer } else { target.layer + 1 };
    if ranges.layers.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "range table has {} layers, encoding needs {needed}",
            ranges.layers.len()
        )));
    }
    let pin = match &cfg.mode {
        Mode::Local(x0) if s == 0 => {
            if x0.len() != sub.input_dim() {
                return Err(Error::InvalidArgument(format!(
                    "local point has length {}, expected {}",
                    x0.len(),
                    sub.input_dim()
                )));
            }
            Some(x0.as_slice())
        }
        _ => None,
    };
    let cone = sub.cone();
    let mut b = Builder {
        cs: ConstraintSystem::new(),
        roles: Vec::new(),
        neurons: BTreeMap::new(),
        refined: Vec::new(),
        cfg,
    };
    let mut inputs = Vec::with_capacity(cone[0].len());
    for &k in &cone[0] {
        let n = NeuronRef::new(s, k);
        let r = ranges
            .layers
            .get(s)
            .and_then(|l| l.get(k))
            .ok_or_else(|| Error::InvalidArgument(format!("missing ranges for input neuron ({s}, {k})")))?;
        b.input(n, r, pin.map(|p| p[k]))?;
        inputs.push(n);
    }
    for layer in s + 1..=target.layer {
        let is_target_layer = layer == target.layer;
        let relu = sub.layer(layer).relu && (!is_target_layer || sub.stage() == Stage::Post);
        for &j in &cone[layer - s] {
            let n = NeuronRef::new(layer, j);
            let r = match target_ranges {
                Some(t) if is_target_layer => t,
                _ => ranges
                    .layers
                    .get(layer)
                    .and_then(|l| l.get(j))
                    .ok_or_else(|| Error::InvalidArgument(format!("missing ranges for neuron ({layer}, {j})")))?,
            };
            match cfg.scheme {
                Scheme::Itne => b.hidden_itne(sub, n, r, relu, is_target_layer)?,
                Scheme::Btne => b.hidden_btne(sub, n, r, relu, is_target_layer)?,
            }
        }
    }
    debug_assert_eq!(b.roles.len(), b.cs.num_vars());
    Ok(TwinEncoding {
        cs: b.cs,
        neurons: b.neurons,
        roles: b.roles,
        inputs,
        target,
        refined: b.refined,
    })
}
