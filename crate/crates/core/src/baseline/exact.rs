use serde::{Deserialize, Serialize};

use crate::encode::{encode_twin_subnet, EncodingConfig, Mode, Quantity, Relaxation, Scheme};
use crate::error::{Error, Result};
use crate::lincore::{MilpSolver, Sense, SolveStatus};
use crate::model::{decompose, propagate_twin_intervals, HyperBox, Network, Phase, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Refuse networks with more unstable ReLUs than this (either copy counts).
    pub max_unstable: usize,
    pub node_limit: usize,
    pub mode: Mode,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_unstable: 24,
            node_limit: 2_000_000,
            mode: Mode::Global,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub epsilon: f64,
    /// Minimum and maximum of `F_j(x_hat) - F_j(x)`.
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
    pub unstable: usize,
}

/// Exact `max |F_j(x_hat) - F_j(x)|` from the two-copy Big-M MILP over the whole network.
pub fn exact_epsilon(net: &Network, domain: &HyperBox, delta: f64, output: usize) -> Result<f64> {
    Ok(exact_epsilon_with(net, domain, delta, output, &ExactConfig::default())?.epsilon)
}

pub fn exact_epsilon_with(
    net: &Network,
    domain: &HyperBox,
    delta: f64,
    output: usize,
    cfg: &ExactConfig,
) -> Result<ExactResult> {
    if domain.dim() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "domain dimension {} != network input dimension {}",
            domain.dim(),
            net.input_dim()
        )));
    }
    let (base, hat) = match &cfg.mode {
        Mode::Global => (domain.clone(), domain.clone()),
        Mode::Local(x0) => {
            if !domain.contains(x0, 0.0) {
                return Err(Error::InvalidArgument("local point must lie in the domain".into()));
            }
            (HyperBox::point(x0), domain.ball_intersection(x0, delta))
        }
    };
    let ranges = propagate_twin_intervals(net, &base, &hat, delta)?;
    let depth = net.depth();
    let sub = decompose(net, depth, output, Stage::Post, depth)?;
    let cone = sub.cone();
    let mut unstable = 0;
    for (k, idx) in cone.iter().enumerate().skip(1) {
        let layer = sub.source() + k;
        if !net.affine_layer(layer).relu {
            continue;
        }
        for &i in idx {
            let r = &ranges.layers[layer][i];
            if r.base_phase() == Phase::Unstable || r.hat_phase() == Phase::Unstable {
                unstable += 1;
            }
        }
    }
    if unstable > cfg.max_unstable {
        return Err(Error::Guard(format!(
            "{unstable} unstable ReLUs exceed the limit of {}",
            cfg.max_unstable
        )));
    }
    let ecfg = EncodingConfig {
        scheme: Scheme::Btne,
        relaxation: Relaxation::Exact,
        mode: cfg.mode.clone(),
        ..Default::default()
    };
    let enc = encode_twin_subnet(&sub, &ranges, &ecfg, None)?;
    let mut solver = MilpSolver::new(&enc.cs)?;
    let mut values = [0.0; 2];
    let mut nodes = 0;
    for (k, sense) in [Sense::Minimize, Sense::Maximize].into_iter().enumerate() {
        let res = solver.solve(&enc.objective(Quantity::DeltaX, sense), cfg.node_limit)?;
        nodes += res.nodes_explored;
        if res.status != SolveStatus::Optimal {
            return Err(Error::Solver(format!("exact {sense:?} solve ended with status {:?}", res.status)));
        }
        values[k] = res.objective_value;
    }
    Ok(ExactResult {
        epsilon: values[0].abs().max(values[1].abs()),
        min: values[0],
        max: values[1],
        nodes,
        unstable,
    })
}
