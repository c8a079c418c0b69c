//! Intervals, input boxes, the per-neuron range table, and interval-arithmetic propagation
//! through twin network copies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{AffineLayer, Network};
use super::subnet::NeuronRef;
use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        other.lo >= self.lo - tol && other.hi <= self.hi + tol
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval::new(self.lo + other.lo, self.hi + other.hi)
    }

    /// `{a - b}` for `a` in `self`, `b` in `other`.
    pub fn sub(&self, other: &Interval) -> Interval {
        Interval::new(self.lo - other.hi, self.hi - other.lo)
    }

    /// Intersection; if the two are disjoint (only possible through rounding) the result
    /// collapses onto the nearest endpoint of `self`.
    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Interval::new(lo, hi)
        } else if other.hi < self.lo {
            Interval::point(self.lo)
        } else {
            Interval::point(self.hi)
        }
    }

    pub fn relu(&self) -> Interval {
        Interval::new(self.lo.max(0.0), self.hi.max(0.0))
    }

    /// Widened so that it contains zero.
    pub fn with_zero(&self) -> Interval {
        Interval::new(self.lo.min(0.0), self.hi.max(0.0))
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn scale(&self, w: f64) -> Interval {
        if w >= 0.0 {
            Interval::new(w * self.lo, w * self.hi)
        } else {
            Interval::new(w * self.hi, w * self.lo)
        }
    }
}

/// Axis-aligned box; the input domain `X` and layer-wise range vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument(format!(
                "box bounds have different lengths ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidArgument(format!("box bound {i} is not finite")));
            }
            if l > u {
                return Err(Error::InvalidArgument(format!("box lower {l} > upper {u} at {i}")));
            }
        }
        Ok(HyperBox { lower, upper })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        HyperBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn point(x: &[f64]) -> Self {
        HyperBox {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::new(self.lower[i], self.upper[i])
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, &v)| self.interval(i).contains(v, tol))
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// The L-infinity ball of radius `delta` around `center`, intersected with `self`.
    pub fn ball_intersection(&self, center: &[f64], delta: f64) -> HyperBox {
        HyperBox {
            lower: center.iter().zip(&self.lower).map(|(c, l)| (c - delta).max(*l)).collect(),
            upper: center.iter().zip(&self.upper).map(|(c, u)| (c + delta).min(*u)).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: HyperBox = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        HyperBox::new(b.lower, b.upper)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("box serializes");
        s.push('\n');
        s
    }
}

/// Reads a domain file `{"lower": [...], "upper": [...]}`.
pub fn load_box(path: impl AsRef<Path>) -> Result<HyperBox> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    HyperBox::from_json(&text)
}

/// Certified ranges of one neuron.
///
/// `hat_y`/`hat_x` bound the perturbed copy (`y + dy`, `x + dx`). In global mode they equal
/// the base ranges; in local mode the base copy is pinned and they differ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronRanges {
    pub y: Interval,
    pub x: Interval,
    pub dy: Interval,
    pub dx: Interval,
    pub hat_y: Interval,
    pub hat_x: Interval,
}

/// ReLU phase of one copy of a neuron, judged from its pre-activation range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Inactive,
    Active,
    Unstable,
}

impl Phase {
    pub fn of(range: &Interval) -> Phase {
        if range.hi <= 0.0 {
            Phase::Inactive
        } else if range.lo >= 0.0 {
            Phase::Active
        } else {
            Phase::Unstable
        }
    }
}

impl NeuronRanges {
    /// Ranges for an input coordinate.
    pub fn input(x: Interval, hat_x: Interval, dx: Interval) -> Self {
        NeuronRanges {
            y: x,
            x,
            dy: dx,
            dx,
            hat_y: hat_x,
            hat_x,
        }
    }

    /// Fills in the post-activation ranges from `y`, `dy`, `hat_y` using the stable-phase rules
    /// and the distance bound `[min(0, dy_lo), max(0, dy_hi)]`.
    pub fn from_pre(y: Interval, dy: Interval, hat_y: Interval, relu: bool) -> Self {
        if !relu {
            return NeuronRanges {
                y,
                x: y,
                dy,
                dx: dy,
                hat_y,
                hat_x: hat_y,
            };
        }
        let x = y.relu();
        let hat_x = hat_y.relu();
        NeuronRanges {
            y,
            x,
            dy,
            dx: relu_distance_range(&y, &dy, &hat_y),
            hat_y,
            hat_x,
        }
    }

    pub fn base_phase(&self) -> Phase {
        Phase::of(&self.y)
    }

    pub fn hat_phase(&self) -> Phase {
        Phase::of(&self.hat_y)
    }

    /// Both copies stable: the ReLU pair needs no relaxation at all.
    pub fn is_stable(&self) -> bool {
        self.base_phase() != Phase::Unstable && self.hat_phase() != Phase::Unstable
    }
}

/// Sound interval for `relu(y + dy) - relu(y)` given the ranges of `y`, `dy` and `y + dy`.
pub fn relu_distance_range(y: &Interval, dy: &Interval, hat_y: &Interval) -> Interval {
    let by_phase = match (Phase::of(y), Phase::of(hat_y)) {
        (Phase::Inactive, Phase::Inactive) => Interval::ZERO,
        (Phase::Active, Phase::Active) => *dy,
        _ => dy.with_zero(),
    };
    keep_zero(by_phase.intersect(&hat_y.relu().sub(&y.relu())), dy)
}

// The unperturbed pair (dy = 0, dx = 0) stays reachable whenever `reference` admits zero.
fn keep_zero(iv: Interval, reference: &Interval) -> Interval {
    if reference.contains(0.0, 0.0) {
        iv.with_zero()
    } else {
        iv
    }
}

/// Per-neuron ranges for every layer; layer 0 describes the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeTable {
    pub layers: Vec<Vec<NeuronRanges>>,
}

impl RangeTable {
    pub fn get(&self, n: NeuronRef) -> &NeuronRanges {
        &self.layers[n.layer][n.index]
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Input-layer ranges for the twin pair `x in base`, `x_hat in hat`, `|x_hat - x| <= delta`.
    pub fn input_layer(base: &HyperBox, hat: &HyperBox, delta: f64) -> Vec<NeuronRanges> {
        (0..base.dim())
            .map(|i| {
                let x = base.interval(i);
                let hx = hat.interval(i);
                let dx = Interval::symmetric(delta).intersect(&hx.sub(&x));
                NeuronRanges::input(x, hx, dx)
            })
            .collect()
    }
}

fn affine_interval(layer: &AffineLayer, row: usize, input: &[Interval], bias: bool) -> Interval {
    let b = if bias { layer.bias[row] } else { 0.0 };
    let mut lo = b;
    let mut hi = b;
    for &(c, w) in &layer.rows[row] {
        let r = input[c].scale(w);
        lo += r.lo;
        hi += r.hi;
    }
    Interval::new(lo, hi)
}

/// Interval propagation for the twin pair over one more layer.
pub fn propagate_layer(layer: &AffineLayer, prev: &[NeuronRanges]) -> Vec<NeuronRanges> {
    let x: Vec<Interval> = prev.iter().map(|r| r.x).collect();
    let hx: Vec<Interval> = prev.iter().map(|r| r.hat_x).collect();
    let dx: Vec<Interval> = prev.iter().map(|r| r.dx).collect();
    (0..layer.out_dim())
        .map(|j| {
            let y = affine_interval(layer, j, &x, true);
            let dy0 = affine_interval(layer, j, &dx, false);
            let hy = affine_interval(layer, j, &hx, true).intersect(&y.add(&dy0));
            let dy = keep_zero(dy0.intersect(&hy.sub(&y)), &dy0);
            NeuronRanges::from_pre(y, dy, hy, layer.relu)
        })
        .collect()
}

/// Interval propagation of twin copies with base input in `base` and perturbed input in `hat`.
pub fn propagate_twin_intervals(net: &Network, base: &HyperBox, hat: &HyperBox, delta: f64) -> Result<RangeTable> {
    if base.dim() != net.input_dim() || hat.dim() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "domain dimension {} != network input dimension {}",
            base.dim(),
            net.input_dim()
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    let mut layers = vec![RangeTable::input_layer(base, hat, delta)];
    for layer in net.affine() {
        let next = propagate_layer(layer, layers.last().unwrap());
        layers.push(next);
    }
    Ok(RangeTable { layers })
}

/// Global-mode interval propagation: both copies range over `domain`, `|x_hat - x| <= delta`.
pub fn propagate_intervals(net: &Network, domain: &HyperBox, delta: f64) -> Result<RangeTable> {
    propagate_twin_intervals(net, domain, domain, delta)
}
