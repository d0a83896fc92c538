//! Special functions, scalar minimization and kernel density estimation.

mod brent;
mod kde;
pub(crate) mod special;

pub use brent::{brent_minimize, BrentResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use kde::{kde_scott, scott_bandwidth};
pub use special::{digamma, erf, erfc, log_gamma, std_normal_cdf, std_normal_pdf, std_normal_quantile};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{function} is undefined at {value}")]
    Domain { function: &'static str, value: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("sample has zero spread")]
    DegenerateSample,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
}

/// Sample mean and Bessel-corrected standard deviation; the std is 0 for a
/// single value. Deviations are taken from the first value so identical
/// inputs give exactly their value and exactly zero spread.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let Some(&first) = values.first() else {
        return (f64::NAN, f64::NAN);
    };
    let n = values.len() as f64;
    let mean = first + values.iter().map(|v| v - first).sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
