use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{evaluate, HyperBox, Network};

const MAX_GRID_DIM: usize = 3;
const MAX_GRID_POINTS: usize = 50_000_000;

/// Lower bound on the global bound by brute force on a lattice of pitch `step` over the domain.
///
/// Both `x` and `x_hat` range over lattice points; `x_hat` is restricted to offsets of at most
/// `delta` in every coordinate.
pub fn grid_oracle(net: &Network, domain: &HyperBox, delta: f64, output: usize, step: f64) -> Result<f64> {
    let m = net.input_dim();
    if m > MAX_GRID_DIM {
        return Err(Error::Guard(format!("grid oracle supports at most {MAX_GRID_DIM} inputs, network has {m}")));
    }
    if domain.dim() != m {
        return Err(Error::InvalidArgument("domain dimension mismatch".into()));
    }
    if !(step > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument("step must be > 0 and delta >= 0".into()));
    }
    if output >= net.output_dim() {
        return Err(Error::OutOfRange(format!("output {output} >= {}", net.output_dim())));
    }
    let counts: Vec<usize> = (0..m)
        .map(|i| ((domain.upper[i] - domain.lower[i]) / step + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    if total > MAX_GRID_POINTS {
        return Err(Error::Guard(format!("grid has {total} points, limit is {MAX_GRID_POINTS}")));
    }
    let radius = (delta / step + 1e-9).floor() as usize;

    let mut values = vec![0.0; total];
    let mut point = vec![0.0; m];
    for (flat, v) in values.iter_mut().enumerate() {
        let mut rest = flat;
        for i in (0..m).rev() {
            let k = rest % counts[i];
            rest /= counts[i];
            point[i] = (domain.lower[i] + k as f64 * step).min(domain.upper[i]);
        }
        *v = evaluate(net, &point)?[output];
    }

    let mut hi = values.clone();
    let mut lo = values.clone();
    let mut stride = 1;
    for i in (0..m).rev() {
        window_extreme(&mut hi, counts[i], stride, radius, |a, b| a >= b);
        window_extreme(&mut lo, counts[i], stride, radius, |a, b| a <= b);
        stride *= counts[i];
    }
    Ok(values
        .iter()
        .zip(hi.iter().zip(&lo))
        .map(|(v, (h, l))| (h - v).max(v - l))
        .fold(0.0, f64::max))
}

/// Replaces each entry by the extreme of its neighbours within `radius` along one axis.
/// `better(a, b)` is true when `a` should win over `b`.
fn window_extreme(data: &mut [f64], len: usize, stride: usize, radius: usize, better: impl Fn(f64, f64) -> bool) {
    if radius == 0 || len <= 1 {
        return;
    }
    let lines = data.len() / len;
    let mut line = vec![0.0; len];
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(len);
    for l in 0..lines {
        let base = (l / stride) * stride * len + l % stride;
        for (k, v) in line.iter_mut().enumerate() {
            *v = data[base + k * stride];
        }
        deque.clear();
        let mut next = 0;
        for k in 0..len {
            let reach = (k + radius).min(len - 1);
            while next <= reach {
                while deque.back().is_some_and(|&b| better(line[next], line[b])) {
                    deque.pop_back();
                }
                deque.push_back(next);
                next += 1;
            }
            while deque.front().is_some_and(|&f| f + radius < k) {
                deque.pop_front();
            }
            data[base + k * stride] = line[*deque.front().unwrap()];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_extreme_matches_naive() {
        let data = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        for (len, stride) in [(12, 1), (4, 3), (3, 1), (6, 2)] {
            for radius in 0..4 {
                let mut got = data.clone();
                window_extreme(&mut got, len, stride, radius, |a, b| a >= b);
                for (idx, g) in got.iter().enumerate() {
                    let k = (idx / stride) % len;
                    let base = idx - k * stride;
                    let want = (k.saturating_sub(radius)..=(k + radius).min(len - 1))
                        .map(|q| data[base + q * stride])
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(*g, want, "len {len} stride {stride} radius {radius} idx {idx}");
                }
            }
        }
    }

    #[test]
    fn dimension_guard() {
        let net = crate::synth::dense_network(1, &[4, 3, 1], 0.1, false);
        let dom = HyperBox::uniform(4, -1.0, 1.0).unwrap();
        assert!(matches!(grid_oracle(&net, &dom, 0.1, 0, 0.1), Err(Error::Guard(_))));
    }
}
