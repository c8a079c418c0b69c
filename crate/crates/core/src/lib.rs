//! Sound over-approximation of the global robustness bound of feedforward ReLU networks.
//!
//! Two copies of a network are encoded side by side with per-neuron distance variables
//! (`dy = y_hat - y`, `dx = x_hat - x`) tying them together. The network is decomposed into
//! short sub-networks, ReLUs are relaxed to linear constraints, and a chosen few are kept
//! exact with binary variables. Ranges are certified layer by layer; the output distance
//! range yields the certified bound on `|F_j(x_hat) - F_j(x)|`.
//!
//! Modules:
//! - [`model`]: networks, I/O, evaluation, conv lowering, interval propagation.
//! - [`lincore`]: constraint systems, bounded revised simplex (primal and dual), branch and bound.
//! - [`encode`]: ReLU gadgets, relaxations and twin-network encodings.
//! - [`certify`]: the layer-by-layer certification driver.
//! - [`baseline`]: exact twin MILP, grid oracle, PGD/FGSM lower bounds.
//! - [`safety`]: closed-loop invariant-set demo.

pub mod baseline;
pub mod certify;
pub mod encode;
mod error;
pub mod lincore;
pub mod model;
pub mod safety;
pub mod synth;
pub mod toy;

pub use error::{Error, Result};
pub use model::{HyperBox, Interval, Network, NeuronRef, RangeTable};
