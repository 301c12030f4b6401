//! Time-delay (TDNN) and crossed time-delay (CTDNN) networks for speaker
//! recognition, implemented from scratch in 64-bit floats: layers and their
//! gradients, training with Adam, embedding extraction, LDA and cosine
//! scoring, EER and top-1 metrics, MFCC features and a synthetic corpus
//! generator.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod layers;
pub mod model;
pub mod numcore;
pub mod train;

pub use error::{Error, Result};
pub use layers::Mode;
pub use model::{Model, ModelConfig};
pub use numcore::{Matrix, Rng};
