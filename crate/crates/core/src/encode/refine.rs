use std::collections::BTreeSet;
use std::ops::Range;

use super::Scheme;
use crate::model::{Interval, Network, NeuronRef, Phase, RangeTable};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronScore {
    pub neuron: NeuronRef,
    pub base_score: f64,
    pub dist_score: f64,
}

impl NeuronScore {
    pub fn rank(&self) -> f64 {
        self.base_score + self.dist_score
    }
}

/// Worst-case gap of the triangle relaxation, `-hi lo / (hi - lo)` (0 when stable).
pub fn triangle_score(range: &Interval) -> f64 {
    if Phase::of(range) == Phase::Unstable {
        -range.hi * range.lo / (range.hi - range.lo)
    } else {
        0.0
    }
}

/// `max(|lo|, |hi|)` of the distance range.
pub fn distance_score(range: &Interval) -> f64 {
    range.magnitude()
}

/// Scores every ReLU neuron in `layers` that is not stable on both copies, best first.
///
/// Under BTNE there are no distance variables; the second score is the perturbed copy's
/// triangle gap instead.
pub fn score_neurons(net: &Network, ranges: &RangeTable, layers: Range<usize>, scheme: Scheme) -> Vec<NeuronScore> {
    let mut out = Vec::new();
    for layer in layers {
        if layer == 0 || !net.affine_layer(layer).relu {
            continue;
        }
        for (index, r) in ranges.layers[layer].iter().enumerate() {
            if r.is_stable() {
                continue;
            }
            let dist_score = match scheme {
                Scheme::Itne => distance_score(&r.dy),
                Scheme::Btne => triangle_score(&r.hat_y),
            };
            out.push(NeuronScore {
                neuron: NeuronRef::new(layer, index),
                base_score: triangle_score(&r.y),
                dist_score,
            });
        }
    }
    sort_scores(&mut out);
    out
}

fn sort_scores(scores: &mut [NeuronScore]) {
    scores.sort_by(|a, b| b.rank().total_cmp(&a.rank()).then(a.neuron.cmp(&b.neuron)));
}

/// The first `r` neurons of a ranked list.
pub fn select_refinement(scores: &[NeuronScore], r: usize) -> BTreeSet<NeuronRef> {
    scores.iter().take(r).map(|s| s.neuron).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Layer, NeuronRanges};

    fn net(width: usize, relu: bool) -> Network {
        let layer = Layer::Dense {
            weights: vec![vec![1.0]; width],
            bias: vec![0.0; width],
            relu,
        };
        Network::new("n", vec![1], vec![layer]).unwrap()
    }

    fn table(ys: &[(f64, f64, f64)]) -> RangeTable {
        let input = NeuronRanges::input(Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0), Interval::ZERO);
        let layer = ys
            .iter()
            .map(|&(lo, hi, d)| {
                let y = Interval::new(lo, hi);
                let dy = Interval::symmetric(d);
                NeuronRanges::from_pre(y, dy, y, true)
            })
            .collect();
        RangeTable {
            layers: vec![vec![input], layer],
        }
    }

    #[test]
    fn score_formulas() {
        assert_eq!(triangle_score(&Interval::new(-1.0, 1.0)), 0.5);
        assert_eq!(triangle_score(&Interval::new(0.2, 1.0)), 0.0);
        assert_eq!(distance_score(&Interval::new(-0.15, 0.15)), 0.15);
    }

    #[test]
    fn ranking_and_selection() {
        let t = table(&[(-1.0, 1.0, 0.1), (-3.0, 1.0, 0.1), (0.5, 2.0, 0.1), (-1.0, 1.0, 0.1), (-0.1, 0.1, 0.1)]);
        let s = score_neurons(&net(5, true), &t, 1..2, Scheme::Itne);
        // the stable-active neuron is excluded
        assert_eq!(s.len(), 4);
        let order: Vec<usize> = s.iter().map(|s| s.neuron.index).collect();
        assert_eq!(order, vec![1, 0, 3, 4]);
        assert!(select_refinement(&s, 0).is_empty());
        let top2 = select_refinement(&s, 2);
        assert_eq!(top2.into_iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(select_refinement(&s, 99).len(), 4);
    }

    #[test]
    fn non_relu_layers_have_no_candidates() {
        let t = table(&[(-1.0, 1.0, 0.1)]);
        assert!(score_neurons(&net(1, false), &t, 1..2, Scheme::Itne).is_empty());
    }
}
