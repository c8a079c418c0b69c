//! Network representation, file I/O, evaluation, conv lowering, sub-network extraction
//! and interval propagation.

mod conv;
mod forward;
mod interval;
mod network;
mod subnet;

pub use conv::{conv_backward, conv_forward, conv_output_dims, lower_conv};
pub use forward::{evaluate, forward, gradient, Trace};
pub use interval::{
    load_box, propagate_intervals, propagate_layer, propagate_twin_intervals, relu_distance_range, HyperBox,
    Interval, NeuronRanges, Phase, RangeTable,
};
pub use network::{load_network, save_network, AffineLayer, ConvKernel, Layer, Network, Padding, SparseRow};
pub use subnet::{decompose, NeuronRef, Stage, SubNetwork};
