//! Heteroscedastic synthetic regression benchmark with known noise levels.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, RngSeed};

pub const FEATURE_RANGE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub dim: usize,
    /// Number of group tags, assigned by equal-width bins of `x0`; 0 disables
    /// the group column.
    pub groups: usize,
    pub seed: RngSeed,
}

/// Noise-free target: a sine in `x0` plus gentle quadratics in every feature.
pub fn target_mean(x: &[f64]) -> f64 {
    let x0 = x[0];
    let mut f = (1.5 * x0).sin() + 0.1 * x0 * x0;
    for (j, &v) in x.iter().enumerate().skip(1) {
        f += (0.5 * v + 0.05 * v * v) / j as f64;
    }
    f
}

/// Noise standard deviation, growing with `|x0|`.
pub fn noise_std(x: &[f64]) -> f64 {
    0.05 + 0.2 * x[0].abs()
}

fn group_of(x0: f64, groups: usize) -> String {
    let t = (x0 + FEATURE_RANGE) / (2.0 * FEATURE_RANGE);
    let k = ((t * groups as f64) as usize).min(groups - 1);
    format!("g{k}")
}

/// Draws `n` records. Ids are `{prefix}{index}`. With `n = 0` the result is
/// an empty dataset with no rows.
pub fn generate(cfg: &GeneratorConfig, id_prefix: &str) -> LabeledDataset {
    let mut rng = cfg.seed.rng();
    let mut ids = Vec::with_capacity(cfg.n);
    let mut features = Vec::with_capacity(cfg.n);
    let mut targets = Vec::with_capacity(cfg.n);
    let mut sigmas = Vec::with_capacity(cfg.n);
    let mut groups = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.dim)
            .map(|_| rng.random_range(-FEATURE_RANGE..FEATURE_RANGE))
            .collect();
        let s = noise_std(&x);
        let eps: f64 = StandardNormal.sample(&mut rng);
        ids.push(format!("{id_prefix}{i}"));
        targets.push(target_mean(&x) + s * eps);
        sigmas.push(s);
        if cfg.groups > 0 {
            groups.push(group_of(x[0], cfg.groups));
        }
        features.push(x);
    }
    LabeledDataset {
        ids,
        features,
        targets,
        groups: (cfg.groups > 0).then_some(groups),
        true_sigma: Some(sigmas),
    }
}
