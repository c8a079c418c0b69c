use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::polytope::Polytope;
use super::system::LinearSystem;
use crate::error::{Error, Result};

/// How disturbances are drawn each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Uniform within the bounds.
    Random,
    /// Independent random signs at the bounds.
    Extreme,
    Zero,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Policy> {
        match s {
            "random" => Ok(Policy::Random),
            "extreme" => Ok(Policy::Extreme),
            "zero" => Ok(Policy::Zero),
            _ => Err(Error::Parse(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: Vec<f64>,
    pub w1: f64,
    pub w2: Vec<f64>,
    pub dd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub steps: usize,
    pub safe: bool,
    /// First step whose resulting state left the set.
    pub first_exit: Option<usize>,
    pub final_state: Vec<f64>,
    /// Present when recording was requested. Entry `k` holds the state before step `k` and
    /// the disturbances applied during it.
    pub trajectory: Option<Vec<StepRecord>>,
}

fn draw(rng: &mut ChaCha8Rng, bound: f64, policy: Policy) -> f64 {
    match policy {
        Policy::Zero => 0.0,
        Policy::Random if bound > 0.0 => rng.gen_range(-bound..=bound),
        Policy::Random => 0.0,
        Policy::Extreme => {
            if rng.gen::<bool>() {
                bound
            } else {
                -bound
            }
        }
    }
}

/// Runs the closed loop from `x0` and checks every state against `set`.
///
/// Stops at the first exit unless `record` is set, in which case the full run is kept.
pub fn simulate(
    sys: &LinearSystem,
    x0: &[f64],
    steps: usize,
    policy: Policy,
    seed: u64,
    set: &Polytope,
    record: bool,
) -> Result<Simulation> {
    const TOL: f64 = 1e-9;
    sys.validate()?;
    if x0.len() != sys.dim() || set.dim != sys.dim() {
        return Err(Error::InvalidArgument("initial state and set must match the system dimension".into()));
    }
    if !set.contains(x0, TOL) {
        return Err(Error::InvalidArgument("initial state lies outside the checked set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut first_exit = None;
    let mut trajectory = record.then(|| Vec::with_capacity(steps));
    let mut done = 0;
    for k in 0..steps {
        let w1 = draw(&mut rng, sys.w1_bound, policy);
        let w2: Vec<f64> = sys.w2_bound.iter().map(|&b| draw(&mut rng, b, policy)).collect();
        let dd = draw(&mut rng, sys.dd_bound, policy);
        let next = sys.step(&x, w1, &w2, dd)?;
        if let Some(t) = trajectory.as_mut() {
            t.push(StepRecord {
                step: k,
                state: x.clone(),
                w1,
                w2,
                dd,
            });
        }
        x = next;
        done = k + 1;
        if first_exit.is_none() && !set.contains(&x, TOL) {
            first_exit = Some(k);
            if !record {
                break;
            }
        }
    }
    Ok(Simulation {
        steps: done,
        safe: first_exit.is_none(),
        first_exit,
        final_state: x,
        trajectory,
    })
}

/// CSV with columns `step, x0.., w1, w2_0.., dd`.
pub fn write_trajectory_csv(records: &[StepRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = records.first().map_or(0, |r| r.state.len());
    let mut header = vec!["step".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.push("w1".into());
    header.extend((0..n).map(|i| format!("w2_{i}")));
    header.push("dd".into());
    let err = |e: csv::Error| Error::Parse(format!("trajectory csv: {e}"));
    w.write_record(&header).map_err(err)?;
    for r in records {
        let mut row = vec![r.step.to_string()];
        row.extend(r.state.iter().map(f64::to_string));
        row.push(r.w1.to_string());
        row.extend(r.w2.iter().map(f64::to_string));
        row.push(r.dd.to_string());
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("trajectory csv: {e}")))?;
    Ok(())
}
