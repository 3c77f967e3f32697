//! Minimal dense neural-network core: MLPs with exact reverse-mode
//! gradients, Adam, target-network averaging, squashed-Gaussian sampling and
//! binary checkpoints.

mod adam;
pub mod checkpoint;
pub mod gaussian;
mod mlp;

pub use adam::{ema_update, Adam};
pub use checkpoint::{Checkpoint, Entry};
pub use gaussian::{
    box_log_det, box_to_unit, sample_squashed, scale_to_box, squashed_from_noise,
    squashed_log_prob, squashed_mean, SquashedSample,
};
pub use mlp::{squash_log_std, Gradients, Head, Mlp, Tape, LOG_STD_MAX, LOG_STD_MIN};

/// Default hidden width of every network.
pub const DEFAULT_HIDDEN: usize = 256;
/// Default number of weight layers.
pub const DEFAULT_LAYERS: usize = 4;

/// Hidden layer sizes for a network with `layers` weight matrices.
pub fn hidden_sizes(layers: usize, width: usize) -> Vec<usize> {
    vec![width; layers.saturating_sub(1)]
}
