//! Layer-by-layer certification of the output distance bound.
//!
//! For every layer `i` and neuron `j`, the sub-network of depth `w = min(i, W)` ending at the
//! neuron is encoded twice: once to bound `y` and `dy`, once to bound `dx`. Ranges are written
//! to the table before the next layer starts, and neurons of one layer run in parallel.

mod config;
mod driver;

pub use config::{CertConfig, CertReport, CertStats, OutputBound, PreBounds};
pub use driver::{certify_global, certify_local};
