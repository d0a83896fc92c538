//! Scalar recalibration: one positive multiplier on every σ, chosen to
//! minimize the miscalibration area.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{self, CalibrationError, CurveGrid, DEFAULT_GRID_SIZE};
use crate::data::PredictionSet;
use crate::numerics::{brent_minimize, BrentResult, NumericsError, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const DEFAULT_BRACKET_LO: f64 = 1e-3;
pub const DEFAULT_BRACKET_HI: f64 = 1e3;
pub const DEFAULT_PRESCAN_POINTS: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecalibrationError {
    #[error("scalar must be positive and finite, got {0}")]
    NonPositiveScalar(f64),
    #[error("invalid search bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecalibrationOptions {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub grid_size: usize,
    pub prescan_points: usize,
    /// Tolerance on ln(scalar).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RecalibrationOptions {
    fn default() -> Self {
        Self {
            bracket_lo: DEFAULT_BRACKET_LO,
            bracket_hi: DEFAULT_BRACKET_HI,
            grid_size: DEFAULT_GRID_SIZE,
            prescan_points: DEFAULT_PRESCAN_POINTS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecalibrationResult {
    pub scalar: f64,
    pub area_before: f64,
    pub area_after: f64,
    /// Raw optimizer output; its `argmin` is ln(scalar) on the search path.
    pub brent: BrentResult,
    pub options: RecalibrationOptions,
}

/// Multiplies every σ by `s`; μ and y are untouched.
pub fn apply_scalar(p: &PredictionSet, s: f64) -> Result<PredictionSet, RecalibrationError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(RecalibrationError::NonPositiveScalar(s));
    }
    Ok(p.with_sigma(p.sigma.iter().map(|v| v * s).collect()))
}

pub fn fit_scalar(
    p: &PredictionSet,
    bracket_lo: f64,
    bracket_hi: f64,
) -> Result<RecalibrationResult, RecalibrationError> {
    fit_scalar_with(
        p,
        RecalibrationOptions {
            bracket_lo,
            bracket_hi,
            ..Default::default()
        },
    )
}

/// Minimizes miscalibration area over `s ∈ [lo, hi]`.
///
/// The search runs on `t = ln s`. A coarse scan picks the best cell, Brent
/// refines inside its two neighbouring cells, and the result is never worse
/// than the scan's best point or than `s = 1` when 1 lies in the bracket.
pub fn fit_scalar_with(
    p: &PredictionSet,
    opts: RecalibrationOptions,
) -> Result<RecalibrationResult, RecalibrationError> {
    let (lo, hi) = (opts.bracket_lo, opts.bracket_hi);
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(RecalibrationError::InvalidBracket { lo, hi });
    }
    let grid = CurveGrid::new(opts.grid_size)?;
    let (z, _) = calibration::sorted_finite_residuals(p);
    if z.is_empty() {
        return Err(CalibrationError::AllSigmaZero.into());
    }
    if z.len() < 2 {
        return Err(CalibrationError::TooFewPoints { found: z.len() }.into());
    }
    let area = |t: f64| grid.area(&z, t.exp());

    let (t_lo, t_hi) = (lo.ln(), hi.ln());
    let scan_n = opts.prescan_points.max(3);
    let ts: Vec<f64> = (0..scan_n)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (scan_n - 1) as f64)
        .collect();
    let scan: Vec<f64> = ts.iter().map(|&t| area(t)).collect();
    let best_k = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let cell_lo = ts[best_k.saturating_sub(1)];
    let cell_hi = ts[(best_k + 1).min(scan_n - 1)];

    let brent = brent_minimize(area, cell_lo, cell_hi, opts.tol, opts.max_iter)?;
    if !brent.converged {
        log::warn!(
            "recalibration search hit {} iterations without converging",
            opts.max_iter
        );
    }

    let mut best_t = brent.argmin;
    let mut best_area = brent.value;
    if scan[best_k] < best_area {
        best_t = ts[best_k];
        best_area = scan[best_k];
    }
    if lo <= 1.0 && 1.0 <= hi {
        let at_one = area(0.0);
        if at_one < best_area {
            best_t = 0.0;
        }
    }
    let scalar = best_t.exp();

    let area_before = calibration::calibration_curve(p, opts.grid_size)?.miscalibration_area;
    let area_after = calibration::calibration_curve(&apply_scalar(p, scalar)?, opts.grid_size)?.miscalibration_area;
    Ok(RecalibrationResult {
        scalar,
        area_before,
        area_after,
        brent,
        options: opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngSeed;
    use crate::metrics;
    use rand_distr::{Distribution, StandardNormal};

    fn sample_normal(rng: &mut impl rand::Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn gaussian_set(n: usize, seed: u64) -> PredictionSet {
        let mut rng = RngSeed::new(seed).rng();
        let mu: Vec<f64> = (0..n).map(|i| (i as f64 * 0.013).cos()).collect();
        let sigma: Vec<f64> = (0..n).map(|i| 0.05 + 0.03 * (i % 11) as f64).collect();
        let y = mu
            .iter()
            .zip(&sigma)
            .map(|(m, s)| m + s * sample_normal(&mut rng))
            .collect();
        PredictionSet::from_arrays(y, mu, sigma).unwrap()
    }

    #[test]
    fn apply_scalar_cases() {
        let p = PredictionSet::from_arrays(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.1, 0.2]).unwrap();
        assert_eq!(apply_scalar(&p, 1.0).unwrap(), p);
        assert_eq!(apply_scalar(&p, 2.0).unwrap().sigma, vec![0.2, 0.4]);
        assert!((metrics::sharpness(&apply_scalar(&p, 3.0).unwrap()) - 3.0 * metrics::sharpness(&p)).abs() < 1e-15);
        assert!(matches!(
            apply_scalar(&p, 0.0),
            Err(RecalibrationError::NonPositiveScalar(_))
        ));
        assert!(matches!(
            apply_scalar(&p, -1.0),
            Err(RecalibrationError::NonPositiveScalar(_))
        ));
    }

    #[test]
    fn calibrated_data_keeps_scalar_near_one() {
        let p = gaussian_set(100_000, 21);
        let r = fit_scalar(&p, DEFAULT_BRACKET_LO, DEFAULT_BRACKET_HI).unwrap();
        assert!((0.95..=1.05).contains(&r.scalar), "{}", r.scalar);
        assert!(r.area_after <= r.area_before + 1e-12);
    }

    #[test]
    fn halved_sigma_recovers_two() {
        let p = gaussian_set(100_000, 22);
        let halved = apply_scalar(&p, 0.5).unwrap();
        let r = fit_scalar(&halved, DEFAULT_BRACKET_LO, DEFAULT_BRACKET_HI).unwrap();
        assert!((1.9..=2.1).contains(&r.scalar), "{}", r.scalar);
        assert!(r.area_after < r.area_before);
        assert!(r.area_after < 0.015);
        let manual = calibration::calibration_curve(&apply_scalar(&halved, r.scalar).unwrap(), DEFAULT_GRID_SIZE)
            .unwrap()
            .miscalibration_area;
        assert!((manual - r.area_after).abs() < 1e-9);
    }

    #[test]
    fn inflated_sigma_recovers_fraction() {
        let p = gaussian_set(50_000, 23);
        let r = fit_scalar(&apply_scalar(&p, 4.0).unwrap(), DEFAULT_BRACKET_LO, DEFAULT_BRACKET_HI).unwrap();
        assert!((r.scalar - 0.25).abs() < 0.0125, "{}", r.scalar);
    }

    #[test]
    fn scalar_stays_in_bracket() {
        let p = apply_scalar(&gaussian_set(5_000, 24), 0.01).unwrap();
        let r = fit_scalar(&p, 0.5, 20.0).unwrap();
        assert!(r.scalar >= 0.5 && r.scalar <= 20.0 + 1e-9);
    }

    #[test]
    fn errors() {
        let zero = PredictionSet::from_arrays(vec![1.0, 2.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(matches!(
            fit_scalar(&zero, 1e-3, 1e3),
            Err(RecalibrationError::Calibration(CalibrationError::AllSigmaZero))
        ));
        let p = gaussian_set(100, 1);
        assert!(matches!(
            fit_scalar(&p, 2.0, 1.0),
            Err(RecalibrationError::InvalidBracket { .. })
        ));
        assert!(matches!(
            fit_scalar(&p, 0.0, 1.0),
            Err(RecalibrationError::InvalidBracket { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn scaling_invariants(seed in 0u64..1000, s in 0.05f64..20.0) {
                let p = gaussian_set(200, seed);
                let q = apply_scalar(&p, s).unwrap();
                let (d0, d1) = (metrics::dispersion(&p).unwrap(), metrics::dispersion(&q).unwrap());
                prop_assert!((d0.cv.unwrap() - d1.cv.unwrap()).abs() <= 1e-12 * d0.cv.unwrap());
                prop_assert!((d1.iqr - s * d0.iqr).abs() <= 1e-12 * d1.iqr.max(1e-300));
                prop_assert_eq!(metrics::accuracy(&p).unwrap(), metrics::accuracy(&q).unwrap());
            }

            #[test]
            fn never_worse_than_identity(seed in 0u64..1000, s in 0.1f64..10.0) {
                let p = apply_scalar(&gaussian_set(300, seed), s).unwrap();
                let r = fit_scalar(&p, DEFAULT_BRACKET_LO, DEFAULT_BRACKET_HI).unwrap();
                prop_assert!(r.area_after <= r.area_before + 1e-12);
            }
        }
    }
}
