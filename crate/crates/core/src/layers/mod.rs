//! Forward and backward passes for the network's building blocks.

mod activation;
mod batchnorm;
mod dense;
mod pooling;
mod time_delay;

pub use activation::{relu, relu_backward, softmax, softmax_ce};
pub(crate) use activation::relu_mask_in_place;
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads, Mode, BN_EPSILON, BN_MOMENTUM};
pub use dense::{Dense, DenseGrads};
pub use pooling::{stats_concat, stats_concat_backward, stats_pool, stats_pool_backward};
pub use time_delay::{ContextWindow, CrossedTimeDelayLayer, CtdInput, TimeDelayGrads, TimeDelayUnit};
