mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;
use twincert::baseline::exact_epsilon;
use twincert::certify::{certify_global, CertConfig};
use twincert::encode::{
    dist_lpr_bounds, encode_dist_lpr, encode_twin_subnet, EncodingConfig, Mode, Quantity, Relaxation, Scheme,
};
use twincert::lincore::{ConstraintSystem, LinExpr, MilpSolver, Sense, SolveStatus};
use twincert::model::{decompose, forward, propagate_intervals, propagate_twin_intervals, Phase, Stage};
use twincert::synth::dense_network;
use twincert::{HyperBox, Interval, Network, NeuronRef, RangeTable};

use common::{perturb, point_in, random_net, rng, unit_box};

fn random_config(r: &mut impl Rng, net: &Network, mode: Mode) -> EncodingConfig {
    let mut refine_set = BTreeSet::new();
    for layer in 1..=net.depth() {
        for i in 0..net.width(layer) {
            if r.gen_bool(0.3) {
                refine_set.insert(NeuronRef::new(layer, i));
            }
        }
    }
    EncodingConfig {
        scheme: if r.gen_bool(0.5) { Scheme::Itne } else { Scheme::Btne },
        relaxation: if r.gen_bool(0.2) { Relaxation::Exact } else { Relaxation::Lpr },
        refine_set,
        mode,
        include_hat_relaxation: r.gen_bool(0.7),
        refine_target: r.gen_bool(0.5),
    }
}

/// Every sub-network encoding admits the point assembled from true forward traces.
fn check_containment(seed: u64, local: bool, certified: bool) {
    let net = random_net(seed);
    let dom = unit_box(net.input_dim());
    let delta = 0.05 + 0.3 * ((seed % 7) as f64 / 7.0);
    let mut r = rng(seed);
    let x0 = point_in(&mut r, &dom);
    let (base, hat, mode) = if local {
        (HyperBox::point(&x0), dom.ball_intersection(&x0, delta), Mode::Local(x0.clone()))
    } else {
        (dom.clone(), dom.clone(), Mode::Global)
    };
    let ranges: RangeTable = if certified {
        let cfg = CertConfig {
            refine_count: 1,
            ..CertConfig::new(dom.clone(), delta)
        };
        certify_global(&net, &cfg).unwrap().ranges.unwrap()
    } else {
        propagate_twin_intervals(&net, &base, &hat, delta).unwrap()
    };
    let mut encodings = Vec::new();
    for _ in 0..8 {
        let layer = r.gen_range(1..=net.depth());
        let w = r.gen_range(1..=layer);
        let neuron = r.gen_range(0..net.width(layer));
        let stage = if r.gen_bool(0.5) { Stage::Pre } else { Stage::Post };
        let sub = decompose(&net, layer, neuron, stage, w).unwrap();
        let cfg = random_config(&mut r, &net, mode.clone());
        encodings.push(encode_twin_subnet(&sub, &ranges, &cfg, None).unwrap());
    }
    for _ in 0..100 {
        let x = if local { x0.clone() } else { point_in(&mut r, &dom) };
        let xh = perturb(&mut r, &x, &dom, delta);
        let (tb, th) = (forward(&net, &x).unwrap(), forward(&net, &xh).unwrap());
        for enc in &encodings {
            let p = enc.point_from_traces(&tb, &th);
            assert!(
                enc.cs.check_feasible(&p, 1e-6),
                "seed {seed} local {local} certified {certified}: trace pair infeasible for {:?}",
                enc.target
            );
        }
    }
}

#[test]
fn traces_are_feasible_in_every_encoding() {
    for seed in 0..50 {
        check_containment(seed, false, false);
        check_containment(seed, true, false);
    }
}

#[test]
fn traces_are_feasible_with_certified_ranges() {
    for seed in 100..120 {
        check_containment(seed, false, true);
    }
}

fn random_distance_range(r: &mut impl Rng) -> Interval {
    let a: f64 = r.gen_range(-1.5..1.5);
    let b: f64 = r.gen_range(-1.5..1.5);
    match r.gen_range(0..4) {
        0 => Interval::new(a.min(b), a.max(b)),
        1 => Interval::new(-a.abs(), b.abs()),
        2 => Interval::point(a),
        _ => Interval::new(0.0, b.abs()),
    }
}

#[test]
fn distance_relaxation_contains_samples() {
    let mut r = rng(7);
    for _ in 0..10_000 {
        let range = random_distance_range(&mut r);
        let y = r.gen_range(-3.0..3.0);
        let dy = if range.width() > 0.0 { r.gen_range(range.lo..=range.hi) } else { range.lo };
        let dx = (y + dy).max(0.0) - y.max(0.0);
        assert!(dist_lpr_bounds(range, dy).contains(dx, 1e-9), "range {range:?} y {y} dy {dy}");

        let mut cs = ConstraintSystem::new();
        let vdy = cs.add_var("dy", range.lo, range.hi);
        let vdx = cs.add_var("dx", -10.0, 10.0);
        encode_dist_lpr(&mut cs, &LinExpr::from(vdy), &LinExpr::from(vdx), range).unwrap();
        assert!(cs.check_feasible(&[dy, dx], 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn distance_region_shrinks_with_range(
        a in -1.5f64..1.5, b in -1.5f64..1.5, s in 0.0f64..1.0, t in 0.0f64..1.0, u in 0.0f64..1.0
    ) {
        let big = Interval::new(a.min(b), a.max(b));
        let lo = big.lo + s * big.width();
        let small = Interval::new(lo, lo + t * (big.hi - lo));
        let dy = small.lo + u * small.width();
        let inner = dist_lpr_bounds(small, dy);
        let outer = dist_lpr_bounds(big, dy);
        prop_assert!(outer.contains_interval(&inner, 1e-12), "{:?} vs {:?}", inner, outer);
    }
}

fn solve(enc: &twincert::encode::TwinEncoding, sense: Sense) -> f64 {
    let mut s = MilpSolver::new(&enc.cs).unwrap();
    let res = s.solve(&enc.objective(Quantity::DeltaX, sense), 1_000_000).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    res.objective_value
}

fn unstable_count(net: &Network, ranges: &RangeTable) -> usize {
    (1..=net.depth())
        .filter(|&l| net.affine_layer(l).relu)
        .flat_map(|l| ranges.layers[l].iter())
        .filter(|r| r.base_phase() == Phase::Unstable || r.hat_phase() == Phase::Unstable)
        .count()
}

#[test]
fn full_exact_itne_matches_btne_milp() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let net = random_net(seed);
        let dom = unit_box(net.input_dim());
        let ranges = propagate_intervals(&net, &dom, 0.1).unwrap();
        if unstable_count(&net, &ranges) > 12 {
            continue;
        }
        let depth = net.depth();
        for j in 0..net.output_dim() {
            let sub = decompose(&net, depth, j, Stage::Post, depth).unwrap();
            let cfg = EncodingConfig {
                relaxation: Relaxation::Exact,
                ..Default::default()
            };
            let enc = encode_twin_subnet(&sub, &ranges, &cfg, None).unwrap();
            let itne = solve(&enc, Sense::Maximize).max(-solve(&enc, Sense::Minimize));
            let exact = exact_epsilon(&net, &dom, 0.1, j).unwrap();
            assert!((itne - exact).abs() < 1e-6, "seed {seed} output {j}: {itne} vs {exact}");
        }
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn refinement_never_loosens_the_encoding() {
    for seed in 0..30u64 {
        let net = dense_network(seed, &[3, 6, 6, 1], 0.2, false);
        let dom = unit_box(3);
        let ranges = propagate_intervals(&net, &dom, 0.15).unwrap();
        let sub = decompose(&net, 3, 0, Stage::Post, 2).unwrap();
        let mut r = rng(seed);
        let mut set = BTreeSet::new();
        let mut prev: Option<(f64, f64)> = None;
        for step in 0..4 {
            if step > 0 {
                for _ in 0..3 {
                    set.insert(NeuronRef::new(r.gen_range(2..=2), r.gen_range(0..6)));
                }
            }
            let cfg = EncodingConfig {
                scheme: if seed % 2 == 0 { Scheme::Itne } else { Scheme::Btne },
                refine_set: set.clone(),
                refine_target: false,
                ..Default::default()
            };
            let enc = encode_twin_subnet(&sub, &ranges, &cfg, None).unwrap();
            let (hi, lo) = (solve(&enc, Sense::Maximize), solve(&enc, Sense::Minimize));
            if let Some((phi, plo)) = prev {
                assert!(hi <= phi + 1e-6 && lo >= plo - 1e-6, "seed {seed}: [{lo}, {hi}] vs [{plo}, {phi}]");
            }
            prev = Some((hi, lo));
        }
    }
}
