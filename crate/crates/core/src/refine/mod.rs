//! Supervised refinement of a reconstruction against measurement data.
//!
//! The training data are the expectations of every logged Pauli string and
//! of every string obtained from one by resetting entries to identity, all
//! read off the same simulated measurements. The model is the train itself,
//! fitted by Adam on the squared-error loss.

mod adam;
mod closure;
mod grad;
mod train;

pub use adam::{Adam, AdamConfig};
pub use closure::{build_closure, TrainingSet};
pub use grad::{gradient_l, GradientBatch};
pub use train::{train, EpochStats, StopReason, TrainConfig, TrainOutcome};
