use serde::{Deserialize, Serialize};

use crate::encode::{Mode, Scheme};
use crate::error::{Error, Result};
use crate::model::{HyperBox, Network, RangeTable};

/// Where hidden pre-activation ranges come from before each layer's distance solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreBounds {
    /// Per-neuron LP/MILP solves on the value and distance of `y` (full layer-by-layer scheme).
    Lp,
    /// Interval propagation only; LPs are solved for `dx` alone.
    Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertConfig {
    pub delta: f64,
    pub domain: HyperBox,
    /// Sub-network depth `W`.
    pub window: usize,
    /// Neurons refined per sub-problem, chosen by score among those that reach the target.
    pub refine_count: usize,
    pub scheme: Scheme,
    pub mode: Mode,
    /// Branch-and-bound nodes per MILP; truncated solves contribute their dual bound.
    pub node_limit: usize,
    /// Output indices to certify; all when `None`.
    pub outputs: Option<Vec<usize>>,
    pub refine_target: bool,
    pub include_hat_relaxation: bool,
    pub pre_bounds: PreBounds,
}

impl CertConfig {
    pub fn new(domain: HyperBox, delta: f64) -> Self {
        CertConfig {
            delta,
            domain,
            window: 2,
            refine_count: 0,
            scheme: Scheme::Itne,
            mode: Mode::Global,
            node_limit: 1000,
            outputs: None,
            refine_target: true,
            include_hat_relaxation: true,
            pre_bounds: PreBounds::Lp,
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        if self.node_limit == 0 {
            return Err(Error::InvalidArgument("node limit must be >= 1".into()));
        }
        if self.domain.dim() != net.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "domain dimension {} != network input dimension {}",
                self.domain.dim(),
                net.input_dim()
            )));
        }
        if let Mode::Local(x0) = &self.mode {
            if x0.len() != net.input_dim() || !self.domain.contains(x0, 0.0) {
                return Err(Error::InvalidArgument("local point must lie in the domain".into()));
            }
        }
        if let Some(outs) = &self.outputs {
            if let Some(&bad) = outs.iter().find(|&&j| j >= net.output_dim()) {
                return Err(Error::OutOfRange(format!(
                    "output {bad} >= output dimension {}",
                    net.output_dim()
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn output_indices(&self, net: &Network) -> Vec<usize> {
        match &self.outputs {
            Some(o) => {
                let mut o = o.clone();
                o.sort_unstable();
                o.dedup();
                o
            }
            None => (0..net.output_dim()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertStats {
    /// Solves without binaries.
    pub lp_solves: usize,
    /// Solves with at least one binary.
    pub milp_solves: usize,
    pub bb_nodes: usize,
    /// Solves stopped by the node limit.
    pub truncated_solves: usize,
    /// Refined neurons summed over sub-problems.
    pub refined_neurons: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl CertStats {
    pub(crate) fn merge(&mut self, other: &CertStats) {
        self.lp_solves += other.lp_solves;
        self.milp_solves += other.milp_solves;
        self.bb_nodes += other.bb_nodes;
        self.truncated_solves += other.truncated_solves;
        self.refined_neurons += other.refined_neurons;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputBound {
    pub index: usize,
    pub epsilon_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub config: CertConfig,
    pub outputs: Vec<OutputBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangeTable>,
    pub stats: CertStats,
}

impl CertReport {
    /// Bound for output `j`, if it was certified.
    pub fn epsilon(&self, j: usize) -> Option<f64> {
        self.outputs.iter().find(|o| o.index == j).map(|o| o.epsilon_upper)
    }

    /// Pretty JSON. `stable` drops the wall time so identical runs give identical bytes.
    pub fn to_json(&self, include_ranges: bool, stable: bool) -> String {
        let mut r = self.clone();
        if !include_ranges {
            r.ranges = None;
        }
        if stable {
            r.stats.wall_time_seconds = None;
        }
        let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
        s.push('\n');
        s
    }
}
