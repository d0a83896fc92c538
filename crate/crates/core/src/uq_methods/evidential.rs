//! Normal-inverse-gamma evidential head: loss, gradients and uncertainties.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{LabeledDataset, PredictionSet};
use crate::neural::{MlpModel, NeuralError};
use crate::numerics::special::{digamma_unchecked, log_gamma_unchecked};

// Offsets that keep the head strictly inside ν > 0, α > 1, β > 0.
const NU_FLOOR: f64 = 1e-6;
const ALPHA_FLOOR: f64 = 1e-6;
const BETA_FLOOR: f64 = 1e-6;

pub const DEFAULT_LAMBDA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvidentialError {
    #[error("invalid evidential parameters (gamma={gamma}, nu={nu}, alpha={alpha}, beta={beta})")]
    InvalidParams { gamma: f64, nu: f64, alpha: f64, beta: f64 },
    #[error("model output width is {0}; the evidential head needs 4")]
    WrongHeadWidth(usize),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidentialParams {
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl EvidentialParams {
    pub fn new(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self, EvidentialError> {
        let p = Self { gamma, nu, alpha, beta };
        let finite = [gamma, nu, alpha, beta].iter().all(|v| v.is_finite());
        if !finite || !(nu > 0.0) || !(alpha > 1.0) || !(beta > 0.0) {
            return Err(EvidentialError::InvalidParams { gamma, nu, alpha, beta });
        }
        Ok(p)
    }

    /// Maps the four raw head outputs onto the constrained domain:
    /// γ = o₀, ν = softplus(o₁), α = softplus(o₂) + 1, β = softplus(o₃),
    /// each positive part offset by 1e-6.
    pub fn from_raw(raw: &[f64]) -> Self {
        Self {
            gamma: raw[0],
            nu: softplus(raw[1]) + NU_FLOOR,
            alpha: softplus(raw[2]) + 1.0 + ALPHA_FLOOR,
            beta: softplus(raw[3]) + BETA_FLOOR,
        }
    }

    /// Inverse of [`EvidentialParams::from_raw`], for pinning a head.
    pub fn to_raw(&self) -> [f64; 4] {
        let inv_softplus = |v: f64| if v > 30.0 { v } else { v.exp_m1().ln() };
        [
            self.gamma,
            inv_softplus(self.nu - NU_FLOOR),
            inv_softplus(self.alpha - 1.0 - ALPHA_FLOOR),
            inv_softplus(self.beta - BETA_FLOOR),
        ]
    }

    /// Ω = 2β(1 + ν).
    pub fn omega(&self) -> f64 {
        2.0 * self.beta * (1.0 + self.nu)
    }
}

/// Negative log-likelihood of `y` under the evidential distribution.
pub fn evidential_nll(p: &EvidentialParams, y: f64) -> f64 {
    let omega = p.omega();
    let r = y - p.gamma;
    0.5 * (PI / p.nu).ln() - p.alpha * omega.ln()
        + (p.alpha + 0.5) * (r * r * p.nu + omega).ln()
        + log_gamma_unchecked(p.alpha)
        - log_gamma_unchecked(p.alpha + 0.5)
}

/// Evidence regularizer `|y − γ|·(2ν + α)`.
pub fn evidential_regularizer(p: &EvidentialParams, y: f64) -> f64 {
    (y - p.gamma).abs() * (2.0 * p.nu + p.alpha)
}

/// Per-sample evidential loss `NLL + λ·R`.
pub fn evidential_loss(p: &EvidentialParams, y: f64, lambda: f64) -> f64 {
    evidential_nll(p, y) + lambda * evidential_regularizer(p, y)
}

/// Loss and its gradient with respect to the raw head outputs.
pub fn evidential_loss_raw_gradient(raw: &[f64], y: f64, lambda: f64) -> (f64, [f64; 4]) {
    let p = EvidentialParams::from_raw(raw);
    let (g, nu, a, b) = (p.gamma, p.nu, p.alpha, p.beta);
    let omega = p.omega();
    let r = y - g;
    let s = r * r * nu + omega;

    // Subgradient 0 at r = 0 for the |r| terms.
    let sign_r = if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    };
    let d_gamma = -(a + 0.5) * 2.0 * r * nu / s - lambda * sign_r * (2.0 * nu + a);
    let d_nu = -0.5 / nu - a * 2.0 * b / omega + (a + 0.5) * (r * r + 2.0 * b) / s + lambda * 2.0 * r.abs();
    let d_alpha = -omega.ln() + s.ln() + digamma_unchecked(a) - digamma_unchecked(a + 0.5) + lambda * r.abs();
    let d_beta = -a / b + (a + 0.5) * 2.0 * (1.0 + nu) / s;

    let loss = evidential_loss(&p, y, lambda);
    (
        loss,
        [
            d_gamma,
            d_nu * sigmoid(raw[1]),
            d_alpha * sigmoid(raw[2]),
            d_beta * sigmoid(raw[3]),
        ],
    )
}

/// Aleatoric `β/(α − 1)` and epistemic `β/(ν(α − 1))` uncertainties.
pub fn evidential_uncertainties(p: &EvidentialParams) -> (f64, f64) {
    let aleatoric = p.beta / (p.alpha - 1.0);
    (aleatoric, aleatoric / p.nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyChannel {
    #[default]
    Epistemic,
    Aleatoric,
}

/// Which uncertainty to report and whether to take its square root.
///
/// The two expressions are variance-like; `sqrt = false` reports them as σ
/// directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyOutput {
    pub channel: UncertaintyChannel,
    pub sqrt: bool,
}

impl UncertaintyOutput {
    pub fn sigma(&self, p: &EvidentialParams) -> f64 {
        let (a, e) = evidential_uncertainties(p);
        let v = match self.channel {
            UncertaintyChannel::Epistemic => e,
            UncertaintyChannel::Aleatoric => a,
        };
        if self.sqrt {
            v.sqrt()
        } else {
            v
        }
    }
}

/// Evidential parameters for every row of `data`.
pub fn evidential_params(m: &MlpModel, data: &LabeledDataset) -> Result<Vec<EvidentialParams>, EvidentialError> {
    if m.output_width() != 4 {
        return Err(EvidentialError::WrongHeadWidth(m.output_width()));
    }
    data.features
        .iter()
        .map(|x| Ok(EvidentialParams::from_raw(&m.predict(x)?)))
        .collect()
}

/// One deterministic forward pass per row: μ = γ, σ from `output`.
pub fn evidential_predict(
    m: &MlpModel,
    test: &LabeledDataset,
    output: UncertaintyOutput,
) -> Result<PredictionSet, EvidentialError> {
    let params = evidential_params(m, test)?;
    Ok(prediction_set_from_params(test, &params, output))
}

pub fn prediction_set_from_params(
    test: &LabeledDataset,
    params: &[EvidentialParams],
    output: UncertaintyOutput,
) -> PredictionSet {
    PredictionSet {
        ids: test.ids.clone(),
        y_true: test.targets.clone(),
        mu: params.iter().map(|p| p.gamma).collect(),
        sigma: params.iter().map(|p| output.sigma(p)).collect(),
        groups: test.groups.clone(),
    }
}
