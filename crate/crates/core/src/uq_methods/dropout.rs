//! Monte Carlo dropout: repeated stochastic forward passes of one network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{LabeledDataset, PredictionSet, RngSeed};
use crate::neural::{MlpModel, NeuralError, MAX_DROPOUT_RATE};
use crate::numerics::mean_and_sample_std;

pub const DEFAULT_MC_SAMPLES: usize = 1000;
pub const DEFAULT_DROPOUT_RATE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DropoutError {
    #[error("need at least 2 dropout samples, got {0}")]
    TooFewSamples(usize),
    #[error("dropout rate {0} outside (0, 0.5]")]
    InvalidRate(f64),
    #[error("model output width is {0}; dropout prediction needs 1")]
    WrongOutputWidth(usize),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutSpec {
    pub samples: usize,
    pub rate: f64,
    pub seed: RngSeed,
}

impl DropoutSpec {
    pub fn validate(&self) -> Result<(), DropoutError> {
        if self.samples < 2 {
            return Err(DropoutError::TooFewSamples(self.samples));
        }
        if !(self.rate > 0.0 && self.rate <= MAX_DROPOUT_RATE) {
            return Err(DropoutError::InvalidRate(self.rate));
        }
        Ok(())
    }
}

/// `samples` dropout-active passes per row. The mask for row `i`, sample `s`
/// comes from `seed.derive(i).derive(s)`, so results do not depend on the
/// evaluation order.
pub fn mc_dropout_predict(
    m: &MlpModel,
    test: &LabeledDataset,
    spec: &DropoutSpec,
) -> Result<PredictionSet, DropoutError> {
    spec.validate()?;
    if m.output_width() != 1 {
        return Err(DropoutError::WrongOutputWidth(m.output_width()));
    }
    let n = test.ids.len();
    let mut mu = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut draws = vec![0.0; spec.samples];
    for (i, x) in test.features.iter().enumerate() {
        let row_seed = spec.seed.derive(i as u64);
        for (s, d) in draws.iter_mut().enumerate() {
            *d = m.forward_with_rate(x, Some(spec.rate), row_seed.derive(s as u64))?[0];
        }
        let (a, b) = mean_and_sample_std(&draws);
        mu.push(a);
        sigma.push(b);
    }
    Ok(PredictionSet {
        ids: test.ids.clone(),
        y_true: test.targets.clone(),
        mu,
        sigma,
        groups: test.groups.clone(),
    })
}
