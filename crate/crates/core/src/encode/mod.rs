//! Constraint systems for twin networks: ReLU gadgets, relaxations, ITNE/BTNE assembly and
//! refinement selection.

mod refine;
mod relu;
mod twin;

pub use refine::{distance_score, score_neurons, select_refinement, triangle_score, NeuronScore};
pub use relu::{dist_lpr_bounds, encode_dist_lpr, encode_relu_exact, encode_relu_lpr};
pub use twin::{
    encode_twin_subnet, EncodingConfig, Mode, NeuronVars, Quantity, Relaxation, Scheme, TwinEncoding, VarRole,
};
