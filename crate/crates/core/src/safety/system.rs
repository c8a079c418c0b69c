use std::path::Path;

use serde::{Deserialize, Serialize};

use super::polytope::Polytope;
use crate::error::{Error, Result};

const BOUND_TOL: f64 = 1e-12;

/// `x' = A x + B K (x + dd e_1) + E w1 + w2` with bounded `w1`, `w2` and perception error `dd`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<f64>,
    pub k: Vec<f64>,
    pub w1_bound: f64,
    pub w2_bound: Vec<f64>,
    pub dd_bound: f64,
}

impl LinearSystem {
    /// Cruise-control plant with distance and speed error states and a 100 ms step.
    pub fn acc(dd_bound: f64) -> LinearSystem {
        LinearSystem {
            a: vec![vec![1.0, -0.1], vec![0.0, 1.0]],
            b: vec![-0.005, 0.1],
            e: vec![1.0, 0.0],
            k: vec![0.3617, -0.8582],
            w1_bound: 0.02,
            w2_bound: vec![5e-4, 3e-5],
            dd_bound,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.len();
        if n == 0 {
            return Err(Error::InvalidArgument("system has no states".into()));
        }
        if self.a.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("A must be square".into()));
        }
        for (name, v) in [("B", &self.b), ("E", &self.e), ("K", &self.k), ("w2_bound", &self.w2_bound)] {
            if v.len() != n {
                return Err(Error::InvalidArgument(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        let all = self
            .a
            .iter()
            .flatten()
            .chain(&self.b)
            .chain(&self.e)
            .chain(&self.k)
            .chain(&self.w2_bound)
            .chain([&self.w1_bound, &self.dd_bound]);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("system entries must be finite".into()));
        }
        if self.w1_bound < 0.0 || self.dd_bound < 0.0 || self.w2_bound.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("disturbance bounds must be >= 0".into()));
        }
        Ok(())
    }

    /// `A + B K`.
    pub fn closed_loop(&self) -> Vec<Vec<f64>> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| row.iter().zip(&self.k).map(|(aij, kj)| aij + bi * kj).collect())
            .collect()
    }

    /// One step of the closed loop. Disturbances outside their bounds are rejected.
    pub fn step(&self, x: &[f64], w1: f64, w2: &[f64], dd: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n || w2.len() != n {
            return Err(Error::InvalidArgument(format!("state and w2 must have length {n}")));
        }
        if w1.abs() > self.w1_bound + BOUND_TOL {
            return Err(Error::OutOfRange(format!("|w1| = {} exceeds {}", w1.abs(), self.w1_bound)));
        }
        if dd.abs() > self.dd_bound + BOUND_TOL {
            return Err(Error::OutOfRange(format!("|dd| = {} exceeds {}", dd.abs(), self.dd_bound)));
        }
        if let Some(i) = (0..n).find(|&i| w2[i].abs() > self.w2_bound[i] + BOUND_TOL) {
            return Err(Error::OutOfRange(format!("|w2[{i}]| exceeds {}", self.w2_bound[i])));
        }
        let u: f64 = self.k.iter().zip(x).map(|(k, v)| k * v).sum::<f64>() + self.k[0] * dd;
        Ok((0..n)
            .map(|i| {
                let ax: f64 = self.a[i].iter().zip(x).map(|(a, v)| a * v).sum();
                ax + self.b[i] * u + self.e[i] * w1 + w2[i]
            })
            .collect())
    }
}

/// On-disk description of a system and its safe box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "E")]
    pub e: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub w1_bound: f64,
    pub w2_bound: Vec<f64>,
    pub dd_bound: f64,
    pub safe_lower: Vec<f64>,
    pub safe_upper: Vec<f64>,
}

impl SafetyConfig {
    /// Cruise-control system with safe distance `[0.5, 1.9]` and speed error `[-0.3, 0.3]`.
    pub fn acc(dd_bound: f64) -> SafetyConfig {
        SafetyConfig::from_parts(&LinearSystem::acc(dd_bound), vec![-0.7, -0.3], vec![0.7, 0.3])
    }

    /// `x' = 0.5 x + w1 + 0.5 dd`, `|w1| <= 0.1`, safe set `[-1, 1]`.
    pub fn scalar_demo(dd_bound: f64) -> SafetyConfig {
        let sys = LinearSystem {
            a: vec![vec![1.0]],
            b: vec![1.0],
            e: vec![1.0],
            k: vec![-0.5],
            w1_bound: 0.1,
            w2_bound: vec![0.0],
            dd_bound,
        };
        SafetyConfig::from_parts(&sys, vec![-1.0], vec![1.0])
    }

    pub fn from_parts(sys: &LinearSystem, safe_lower: Vec<f64>, safe_upper: Vec<f64>) -> SafetyConfig {
        SafetyConfig {
            a: sys.a.clone(),
            b: sys.b.clone(),
            e: sys.e.clone(),
            k: sys.k.clone(),
            w1_bound: sys.w1_bound,
            w2_bound: sys.w2_bound.clone(),
            dd_bound: sys.dd_bound,
            safe_lower,
            safe_upper,
        }
    }

    pub fn system(&self) -> Result<LinearSystem> {
        let sys = LinearSystem {
            a: self.a.clone(),
            b: self.b.clone(),
            e: self.e.clone(),
            k: self.k.clone(),
            w1_bound: self.w1_bound,
            w2_bound: self.w2_bound.clone(),
            dd_bound: self.dd_bound,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn safe_set(&self) -> Result<Polytope> {
        if self.safe_lower.len() != self.a.len() {
            return Err(Error::InvalidArgument("safe box dimension must match the state".into()));
        }
        Polytope::from_box(&self.safe_lower, &self.safe_upper)
    }

    pub fn from_json(text: &str) -> Result<SafetyConfig> {
        let cfg: SafetyConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("system config: {e}")))?;
        cfg.system()?;
        cfg.safe_set()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SafetyConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SafetyConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
