//! Shared fixtures for the criterion benches.

use twincert::encode::{encode_twin_subnet, EncodingConfig, TwinEncoding};
use twincert::model::{decompose, propagate_intervals, Stage};
use twincert::synth::dense_network;
use twincert::{HyperBox, Network, Result};

/// Dense ReLU net `inputs -> width x hidden -> 1` with a fixed seed.
pub fn dense_fixture(inputs: usize, width: usize, hidden: usize) -> Network {
    let mut dims = vec![inputs];
    dims.extend(std::iter::repeat(width).take(hidden));
    dims.push(1);
    dense_network(42, &dims, 0.2, false)
}

pub fn unit_box(dim: usize) -> HyperBox {
    HyperBox::uniform(dim, -1.0, 1.0).expect("valid box")
}

/// Output sub-network encoding of depth `w` over interval ranges.
pub fn output_encoding(net: &Network, delta: f64, w: usize, cfg: &EncodingConfig) -> Result<TwinEncoding> {
    let ranges = propagate_intervals(net, &unit_box(net.input_dim()), delta)?;
    let sub = decompose(net, net.depth(), 0, Stage::Post, w)?;
    encode_twin_subnet(&sub, &ranges, cfg, None)
}
