//! Uncertainty quantification for regression: three UQ producers on a small
//! feed-forward network, the accuracy/sharpness/dispersion/calibration/
//! tightness metric families, adversarial group calibration, scalar
//! recalibration and uncertainty-gated screening.
// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod commands;
pub mod data;
pub mod io;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod recalibration;
pub mod report;
pub mod scoring;
pub mod screening;
pub mod synthetic;
pub mod uq_methods;

pub use data::{split_k_folds, validate_prediction_set, DataError, LabeledDataset, PredictionSet, RngSeed};
