mod common;

use proptest::prelude::*;
use twincert::model::{decompose, evaluate, forward, gradient, propagate_intervals, propagate_twin_intervals, Layer, Stage};
use twincert::synth::{conv_network, dense_network};
use twincert::{HyperBox, Network};

use common::{perturb, point_in, random_net, rng, unit_box};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn subnetwork_matches_full_forward(seed in 0u64..10_000) {
        let net = random_net(seed);
        let mut r = rng(seed);
        let dom = unit_box(net.input_dim());
        for _ in 0..10 {
            let x = point_in(&mut r, &dom);
            let t = forward(&net, &x).unwrap();
            for layer in 1..=net.depth() {
                for w in 1..=layer {
                    for neuron in 0..net.width(layer) {
                        for stage in [Stage::Pre, Stage::Post] {
                            let sub = decompose(&net, layer, neuron, stage, w).unwrap();
                            let want = match stage {
                                Stage::Pre => t.pre[layer][neuron],
                                Stage::Post => t.post[layer][neuron],
                            };
                            prop_assert_eq!(sub.eval(&t.post[layer - w]), want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interval_propagation_contains_sampled_pairs(seed in 0u64..10_000, delta in 0.0f64..0.5) {
        let net = random_net(seed);
        let dom = unit_box(net.input_dim());
        let table = propagate_intervals(&net, &dom, delta).unwrap();
        let mut r = rng(seed + 1);
        for _ in 0..50 {
            let x = point_in(&mut r, &dom);
            let xh = perturb(&mut r, &x, &dom, delta);
            let (b, h) = (forward(&net, &x).unwrap(), forward(&net, &xh).unwrap());
            for layer in 1..=net.depth() {
                for (i, nr) in table.layers[layer].iter().enumerate() {
                    let tol = 1e-9;
                    prop_assert!(nr.y.contains(b.pre[layer][i], tol));
                    prop_assert!(nr.x.contains(b.post[layer][i], tol));
                    prop_assert!(nr.hat_y.contains(h.pre[layer][i], tol));
                    prop_assert!(nr.hat_x.contains(h.post[layer][i], tol));
                    prop_assert!(nr.dy.contains(h.pre[layer][i] - b.pre[layer][i], tol));
                    prop_assert!(nr.dx.contains(h.post[layer][i] - b.post[layer][i], tol));
                }
            }
        }
    }

    #[test]
    fn local_interval_propagation_is_sound(seed in 0u64..10_000, delta in 0.0f64..0.5) {
        let net = random_net(seed);
        let dom = unit_box(net.input_dim());
        let mut r = rng(seed + 2);
        let x0 = point_in(&mut r, &dom);
        let table = propagate_twin_intervals(&net, &HyperBox::point(&x0), &dom.ball_intersection(&x0, delta), delta).unwrap();
        let b = forward(&net, &x0).unwrap();
        for _ in 0..50 {
            let xh = perturb(&mut r, &x0, &dom, delta);
            let h = forward(&net, &xh).unwrap();
            for layer in 1..=net.depth() {
                for (i, nr) in table.layers[layer].iter().enumerate() {
                    prop_assert!(nr.y.contains(b.pre[layer][i], 1e-9));
                    prop_assert!(nr.dx.contains(h.post[layer][i] - b.post[layer][i], 1e-9));
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in 0u64..10_000) {
        let net = random_net(seed);
        let dom = unit_box(net.input_dim());
        let mut r = rng(seed + 3);
        let x = point_in(&mut r, &dom);
        let t = forward(&net, &x).unwrap();
        // skip points near a kink, where central differences straddle it
        let near_kink = t.pre[1..].iter().flatten().any(|y| y.abs() < 1e-3);
        prop_assume!(!near_kink);
        let h = 1e-6;
        for j in 0..net.output_dim() {
            let g = gradient(&net, &x, j).unwrap();
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (evaluate(&net, &xp).unwrap()[j] - evaluate(&net, &xm).unwrap()[j]) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-4, "output {} input {}: fd {} vs {}", j, i, fd, g[i]);
            }
        }
    }

    #[test]
    fn conv_lowering_matches_direct_evaluation(seed in 0u64..1_000) {
        let net = conv_network(seed, 6, &[2, 3, 2], &[5, 2]);
        let mut r = rng(seed + 4);
        let x = point_in(&mut r, &unit_box(net.input_dim()));
        let direct = forward(&net, &x).unwrap();
        let mut current = x.clone();
        for (k, layer) in net.affine().iter().enumerate() {
            let y = layer.eval(&current);
            for (a, b) in y.iter().zip(&direct.pre[k + 1]) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            current = if layer.relu { y.iter().map(|v| v.max(0.0)).collect() } else { y };
        }
    }

    #[test]
    fn zero_bias_zero_input_gives_zero(seed in 0u64..10_000) {
        let net = dense_network(seed, &[3, 5, 4, 2], 0.0, false);
        prop_assert_eq!(evaluate(&net, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
    }
}

#[test]
fn scaled_output_layer_scales_values() {
    let net = dense_network(1, &[2, 4, 2], 0.2, false);
    let scaled = net.with_scaled_output(2.5).unwrap();
    let x = [0.3, -0.7];
    let (a, b) = (evaluate(&net, &x).unwrap(), evaluate(&scaled, &x).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert!((2.5 * u - v).abs() < 1e-12);
    }
    assert!(matches!(scaled.layers().last(), Some(Layer::Dense { relu: false, .. })));
    let json = scaled.to_json();
    let back = Network::from_json(&json).unwrap();
    assert_eq!(back.to_json(), json);
}
