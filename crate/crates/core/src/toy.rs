//! The two-layer illustration network and its `[-1, 1]^2` domain.

use crate::model::{HyperBox, Layer, Network};

/// Hidden rows `[1, 0.5]`, `[-0.5, 1]`, output row `[1, -1]`, zero biases, ReLU on both layers.
pub fn toy_network() -> Network {
    Network::new(
        "toy",
        vec![2],
        vec![
            Layer::Dense {
                weights: vec![vec![1.0, 0.5], vec![-0.5, 1.0]],
                bias: vec![0.0, 0.0],
                relu: true,
            },
            Layer::Dense {
                weights: vec![vec![1.0, -1.0]],
                bias: vec![0.0],
                relu: true,
            },
        ],
    )
    .expect("toy network is well formed")
}

pub fn toy_domain() -> HyperBox {
    HyperBox::uniform(2, -1.0, 1.0).expect("valid box")
}
