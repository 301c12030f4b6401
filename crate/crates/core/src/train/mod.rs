//! Mini-batch training: Adam, cross-entropy objective, early stopping and
//! learning-curve logging.

mod adam;
mod curve;
mod dataset;
mod fit;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use curve::{converged_epoch, parse_curve_csv, CurveRow, EpochSummary, LearningCurve, CURVE_HEADER};
pub use dataset::{label_examples, speaker_labels};
pub use fit::{argmax, batch_loss_and_grads, evaluate, fit, make_batches, Example, FitReport, TrainConfig};
