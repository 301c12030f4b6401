//! Dense numeric primitives shared by every other module: the row-major
//! [`Matrix`], the seeded [`Rng`], per-column statistics, and the
//! central-difference gradient verifier.

mod gradcheck;
mod matrix;
mod rng;
mod stats;

pub use gradcheck::finite_diff_check;
pub use matrix::Matrix;
pub use rng::Rng;
pub use stats::{dot, rowwise_mean_std};
