//! Seeded random networks for tests, benchmarks and smoke runs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ConvKernel, Layer, Network, Padding};

/// Dense ReLU network with widths `dims[0] -> dims[1] -> ... -> dims[last]`.
///
/// Weights are uniform in `±sqrt(3 / fan_in)`, biases uniform in `±bias_scale`. Hidden layers
/// use ReLU; the output layer uses ReLU iff `relu_output`.
pub fn dense_network(seed: u64, dims: &[usize], bias_scale: f64, relu_output: bool) -> Network {
    assert!(dims.len() >= 2, "need at least input and output widths");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for k in 1..dims.len() {
        let fan_in = dims[k - 1];
        let scale = (3.0 / fan_in as f64).sqrt();
        let weights = (0..dims[k])
            .map(|_| (0..fan_in).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        let bias = (0..dims[k])
            .map(|_| if bias_scale > 0.0 { rng.gen_range(-bias_scale..bias_scale) } else { 0.0 })
            .collect();
        let last = k + 1 == dims.len();
        layers.push(Layer::Dense {
            weights,
            bias,
            relu: !last || relu_output,
        });
    }
    Network::new(format!("dense-{seed}"), vec![dims[0]], layers).expect("generated network is valid")
}

/// Conv layers (3x3, valid padding, stride 1) followed by dense layers.
///
/// `channels[0]` is the input channel count; the image is `image x image`.
pub fn conv_network(seed: u64, image: usize, channels: &[usize], dense: &[usize]) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut side = image;
    for k in 1..channels.len() {
        let fan_in = channels[k - 1] * 9;
        let scale = (3.0 / fan_in as f64).sqrt();
        let data = (0..channels[k] * fan_in).map(|_| rng.gen_range(-scale..scale)).collect();
        layers.push(Layer::Conv2d {
            kernel: ConvKernel::new(channels[k], channels[k - 1], 3, 3, data).expect("sized kernel"),
            bias: (0..channels[k]).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            stride: (1, 1),
            padding: Padding::Valid,
            relu: true,
        });
        side -= 2;
    }
    layers.push(Layer::Flatten);
    let mut width = channels.last().unwrap() * side * side;
    for (k, &out) in dense.iter().enumerate() {
        let scale = (3.0 / width as f64).sqrt();
        layers.push(Layer::Dense {
            weights: (0..out).map(|_| (0..width).map(|_| rng.gen_range(-scale..scale)).collect()).collect(),
            bias: (0..out).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            relu: k + 1 < dense.len(),
        });
        width = out;
    }
    Network::new(format!("conv-{seed}"), vec![channels[0], image, image], layers).expect("generated network is valid")
}
