#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twincert::synth::dense_network;
use twincert::{HyperBox, Network};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small dense net whose shape is drawn from `seed`: 2-3 inputs, 1-2 hidden layers of
/// width 2-6, 1-2 outputs.
pub fn random_net(seed: u64) -> Network {
    let mut r = rng(seed ^ 0x5eed);
    let mut dims = vec![r.gen_range(2..=3)];
    for _ in 0..r.gen_range(1..=2) {
        dims.push(r.gen_range(2..=6));
    }
    dims.push(r.gen_range(1..=2));
    dense_network(seed, &dims, 0.3, r.gen_bool(0.3))
}

pub fn unit_box(dim: usize) -> HyperBox {
    HyperBox::uniform(dim, -1.0, 1.0).unwrap()
}

pub fn point_in(r: &mut ChaCha8Rng, b: &HyperBox) -> Vec<f64> {
    (0..b.dim())
        .map(|i| {
            if r.gen_bool(0.1) {
                if r.gen_bool(0.5) {
                    b.lower[i]
                } else {
                    b.upper[i]
                }
            } else {
                r.gen_range(b.lower[i]..=b.upper[i])
            }
        })
        .collect()
}

/// `x_hat` within `delta` of `x`, inside `domain`, often on the ball's boundary.
pub fn perturb(r: &mut ChaCha8Rng, x: &[f64], domain: &HyperBox, delta: f64) -> Vec<f64> {
    let mut xh: Vec<f64> = x
        .iter()
        .map(|v| {
            if r.gen_bool(0.3) {
                v + if r.gen_bool(0.5) { delta } else { -delta }
            } else {
                v + r.gen_range(-delta..=delta)
            }
        })
        .collect();
    domain.clamp(&mut xh);
    xh
}
