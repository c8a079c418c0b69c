use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lincore::Sense;
use crate::model::{evaluate, gradient, HyperBox, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub steps: usize,
    /// Signed-gradient step length; `delta / 8` when unset.
    pub step_size: Option<f64>,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            steps: 50,
            step_size: None,
            restarts: 3,
            rng_seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step_size {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidArgument(format!("step size must be > 0, got {s}")));
            }
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    /// Largest `|F_j(x_hat) - F_j(x)|` found over the dataset.
    pub epsilon_lower: f64,
    /// Per-sample best variation, in dataset order.
    pub per_sample: Vec<f64>,
    /// Sample that attained the maximum.
    pub best_sample: usize,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One signed-gradient step of length `delta` in the direction that moves `F_j` according to
/// `sense`, clipped to the domain.
pub fn fgsm_perturb(
    net: &Network,
    x: &[f64],
    delta: f64,
    output: usize,
    sense: Sense,
    domain: &HyperBox,
) -> Result<Vec<f64>> {
    let g = gradient(net, x, output)?;
    let mut out: Vec<f64> = x
        .iter()
        .zip(&g)
        .map(|(xi, gi)| xi + delta * sense.sign() * sign(*gi))
        .collect();
    domain.clamp(&mut out);
    Ok(out)
}

/// Best `sense`-signed variation around one sample found by projected signed-gradient ascent.
fn attack_sample(
    net: &Network,
    x: &[f64],
    bx: &HyperBox,
    output: usize,
    step: f64,
    cfg: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let f0 = evaluate(net, x)?[output];
    let mut best: f64 = 0.0;
    let mut point = vec![0.0; x.len()];
    for sense in [Sense::Maximize, Sense::Minimize] {
        let s = sense.sign();
        for _ in 0..cfg.restarts {
            for (i, p) in point.iter_mut().enumerate() {
                let (lo, hi) = (bx.lower[i], bx.upper[i]);
                *p = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            }
            best = best.max(s * (evaluate(net, &point)?[output] - f0));
            for _ in 0..cfg.steps {
                let g = gradient(net, &point, output)?;
                for (p, gi) in point.iter_mut().zip(&g) {
                    *p += step * s * sign(*gi);
                }
                bx.clamp(&mut point);
                best = best.max(s * (evaluate(net, &point)?[output] - f0));
            }
        }
    }
    Ok(best)
}

/// Empirical lower bound on the local variation of output `j` over the dataset.
///
/// Each sample draws its restarts from its own stream of a seeded generator, so the result is
/// independent of thread scheduling.
pub fn pgd_epsilon(
    net: &Network,
    data: &Dataset,
    domain: &HyperBox,
    delta: f64,
    output: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be finite and >= 0, got {delta}")));
    }
    if output >= net.output_dim() {
        return Err(Error::OutOfRange(format!("output {output} >= {}", net.output_dim())));
    }
    data.validate(net.input_dim(), domain)?;
    let step = cfg.step_size.unwrap_or(delta / 8.0);
    let per_sample = data
        .rows
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            if delta == 0.0 {
                return Ok(0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(k as u64);
            let bx = domain.ball_intersection(x, delta);
            attack_sample(net, x, &bx, output, step, cfg, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (best_sample, epsilon_lower) = per_sample
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    Ok(AttackResult {
        epsilon_lower,
        per_sample,
        best_sample,
    })
}
