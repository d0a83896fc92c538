//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use uq_core::calibration::{adversarial_group_calibration, calibration_curve, DEFAULT_GRID_SIZE};
use uq_core::recalibration::{apply_scalar, fit_scalar, DEFAULT_BRACKET_HI, DEFAULT_BRACKET_LO};
use uq_core::screening::honesty_rate;
use uq_core::synthetic::{generate, target_mean, GeneratorConfig};
use uq_core::uq_methods::{
    evidential_loss, evidential_loss_raw_gradient, evidential_nll, evidential_regularizer, evidential_uncertainties,
    EvidentialParams,
};
use uq_core::{PredictionSet, RngSeed};

const MAX_POINTS: usize = 200_000;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Predictions on the synthetic benchmark with the true noise level
/// multiplied by `sigma_scale`.
fn synthetic_predictions(n: usize, sigma_scale: f64, seed: u64) -> Result<PredictionSet, String> {
    if !(2..=MAX_POINTS).contains(&n) {
        return Err(format!("n must be in 2..={MAX_POINTS}"));
    }
    if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
        return Err("sigma scale must be positive".into());
    }
    let d = generate(
        &GeneratorConfig {
            n,
            dim: 1,
            groups: 0,
            seed: RngSeed::new(seed),
        },
        "",
    );
    let mu = d.features.iter().map(|x| target_mean(x)).collect();
    let sigma = d.true_sigma.unwrap().iter().map(|s| s * sigma_scale).collect();
    PredictionSet::from_arrays(d.targets, mu, sigma).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CalibrationView {
    expected: Vec<f64>,
    observed: Vec<f64>,
    area: f64,
    honesty_rate: f64,
    scalar: f64,
    recalibrated_observed: Vec<f64>,
    recalibrated_area: f64,
}

/// Calibration curve for mis-scaled sigma, then the recalibrated curve.
#[wasm_bindgen]
pub fn calibration_explorer(n: usize, sigma_scale: f64, seed: u64) -> String {
    to_json((|| {
        let p = synthetic_predictions(n, sigma_scale, seed)?;
        let before = calibration_curve(&p, DEFAULT_GRID_SIZE).map_err(|e| e.to_string())?;
        let fit = fit_scalar(&p, DEFAULT_BRACKET_LO, DEFAULT_BRACKET_HI).map_err(|e| e.to_string())?;
        let scaled = apply_scalar(&p, fit.scalar).map_err(|e| e.to_string())?;
        let after = calibration_curve(&scaled, DEFAULT_GRID_SIZE).map_err(|e| e.to_string())?;
        Ok(CalibrationView {
            expected: before.expected,
            observed: before.observed,
            area: before.miscalibration_area,
            honesty_rate: honesty_rate(&p, 3.0),
            scalar: fit.scalar,
            recalibrated_observed: after.observed,
            recalibrated_area: after.miscalibration_area,
        })
    })())
}

#[derive(Serialize)]
struct EvidentialView {
    nll: f64,
    regularizer: f64,
    loss: f64,
    aleatoric: f64,
    epistemic: f64,
    /// Loss over a sweep of targets around γ, for plotting.
    targets: Vec<f64>,
    losses: Vec<f64>,
    /// d loss / d γ at `y`.
    grad_gamma: f64,
}

/// Evidential loss and uncertainties for one normal-inverse-gamma head.
#[wasm_bindgen]
pub fn evidential_explorer(gamma: f64, nu: f64, alpha: f64, beta: f64, y: f64, lambda: f64) -> String {
    to_json((|| {
        let p = EvidentialParams::new(gamma, nu, alpha, beta).map_err(|e| e.to_string())?;
        if lambda.is_nan() || lambda < 0.0 {
            return Err("lambda must be nonnegative".into());
        }
        let (aleatoric, epistemic) = evidential_uncertainties(&p);
        let span = 4.0 * aleatoric.sqrt().max(0.25);
        let targets: Vec<f64> = (0..=120)
            .map(|i| gamma - span + 2.0 * span * i as f64 / 120.0)
            .collect();
        let losses = targets.iter().map(|&t| evidential_loss(&p, t, lambda)).collect();
        // γ maps through the identity, so the raw gradient on o₀ is dL/dγ.
        let (_, grad) = evidential_loss_raw_gradient(&p.to_raw(), y, lambda);
        Ok(EvidentialView {
            nll: evidential_nll(&p, y),
            regularizer: evidential_regularizer(&p, y),
            loss: evidential_loss(&p, y, lambda),
            aleatoric,
            epistemic,
            targets,
            losses,
            grad_gamma: grad[0],
        })
    })())
}

/// Worst-group miscalibration area against group size.
#[wasm_bindgen]
pub fn adversarial_explorer(n: usize, sigma_scale: f64, seed: u64, trials: usize) -> String {
    to_json((|| {
        let p = synthetic_predictions(n, sigma_scale, seed)?;
        let fractions = [0.005, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0];
        let c = adversarial_group_calibration(&p, &fractions, trials, 10, RngSeed::new(seed ^ 0x5eed))
            .map_err(|e| e.to_string())?;
        Ok(json!({
            "fractions": c.group_fractions,
            "mean_worst_area": c.mean_worst_area,
            "std_error": c.std_error,
        }))
    })())
}
