use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::network::{AffineLayer, Network};
use crate::error::{Error, Result};

/// The `index`-th neuron of affine layer `layer` (layer 0 is the input).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronRef {
    pub layer: usize,
    pub index: usize,
}

impl NeuronRef {
    pub fn new(layer: usize, index: usize) -> Self {
        NeuronRef { layer, index }
    }
}

/// Which value of the target neuron a sub-network produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Pre-activation `y`.
    Pre,
    /// Post-activation `x` (equal to `y` on layers without ReLU).
    Post,
}

/// A `w`-layer slice of a network ending in a single target neuron.
///
/// Intermediate layers are kept whole; only the last layer is narrowed to the target.
#[derive(Clone, Copy, Debug)]
pub struct SubNetwork<'a> {
    source: usize,
    target: NeuronRef,
    stage: Stage,
    layers: &'a [AffineLayer],
}

impl<'a> SubNetwork<'a> {
    /// Layer index of the sub-network input (`i - w`).
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> NeuronRef {
        self.target
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Number of affine layers `w`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Affine layer by absolute network index, `source < layer <= target.layer`.
    pub fn layer(&self, layer: usize) -> &'a AffineLayer {
        &self.layers[layer - self.source - 1]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Whether the target value passes through a ReLU.
    pub fn target_has_relu(&self) -> bool {
        self.stage == Stage::Post && self.layers.last().unwrap().relu
    }

    /// Evaluates the slice on `x^(i-w)`.
    pub fn eval(&self, input: &[f64]) -> f64 {
        let mut current = input.to_vec();
        for k in self.source + 1..self.target.layer {
            let layer = self.layer(k);
            current = layer.eval(&current);
            if layer.relu {
                current.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        let y = self.layer(self.target.layer).eval_row(self.target.index, &current);
        if self.target_has_relu() {
            y.max(0.0)
        } else {
            y
        }
    }

    /// Neurons that can influence the target, per layer from `source` to the target layer
    /// (each sorted ascending; the last entry is just the target index).
    pub fn cone(&self) -> Vec<Vec<usize>> {
        let mut needed: Vec<Vec<usize>> = vec![Vec::new(); self.depth() + 1];
        needed[self.depth()] = vec![self.target.index];
        for k in (self.source + 1..=self.target.layer).rev() {
            let layer = self.layer(k);
            let mut prev = BTreeSet::new();
            for &n in &needed[k - self.source] {
                prev.extend(layer.rows[n].iter().map(|&(c, _)| c));
            }
            needed[k - self.source - 1] = prev.into_iter().collect();
        }
        needed
    }
}

/// Extracts the `w`-layer sub-network that computes the given value of neuron `neuron` in layer `layer`.
pub fn decompose(net: &Network, layer: usize, neuron: usize, stage: Stage, w: usize) -> Result<SubNetwork<'_>> {
    if layer == 0 || layer > net.depth() {
        return Err(Error::OutOfRange(format!("layer {layer} not in 1..={}", net.depth())));
    }
    if neuron >= net.width(layer) {
        return Err(Error::OutOfRange(format!(
            "neuron {neuron} >= width {} of layer {layer}",
            net.width(layer)
        )));
    }
    if w == 0 || w > layer {
        return Err(Error::OutOfRange(format!("window {w} not in 1..={layer}")));
    }
    let source = layer - w;
    Ok(SubNetwork {
        source,
        target: NeuronRef::new(layer, neuron),
        stage,
        layers: &net.affine()[source..layer],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward::forward;
    use crate::toy::toy_network;

    #[test]
    fn first_layer_neuron() {
        let net = toy_network();
        let sub = decompose(&net, 1, 0, Stage::Post, 1).unwrap();
        // relu(x1 + 0.5 x2)
        assert_eq!(sub.eval(&[1.0, 1.0]), 1.5);
        assert_eq!(sub.eval(&[-1.0, 0.5]), 0.0);
        assert_eq!(sub.layer(1).rows[0], vec![(0, 1.0), (1, 0.5)]);
    }

    #[test]
    fn whole_network_when_window_is_depth() {
        let net = toy_network();
        let sub = decompose(&net, 2, 0, Stage::Post, 2).unwrap();
        assert_eq!(sub.source(), 0);
        for x in [[0.3, -0.2], [1.0, 0.0], [-1.0, 1.0]] {
            assert_eq!(sub.eval(&x), forward(&net, &x).unwrap().output()[0]);
        }
    }

    #[test]
    fn pre_activation_slice_is_affine() {
        let net = toy_network();
        let sub = decompose(&net, 2, 0, Stage::Pre, 1).unwrap();
        assert_eq!(sub.eval(&[0.2, 0.7]), 0.2 - 0.7);
        assert!(!sub.target_has_relu());
    }

    #[test]
    fn rejects_bad_indices() {
        let net = toy_network();
        assert!(decompose(&net, 3, 0, Stage::Post, 1).is_err());
        assert!(decompose(&net, 2, 1, Stage::Post, 1).is_err());
        assert!(decompose(&net, 1, 0, Stage::Post, 2).is_err());
        assert!(decompose(&net, 1, 0, Stage::Post, 0).is_err());
    }
}
