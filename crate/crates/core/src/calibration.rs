//! Quantile calibration curves, miscalibration area and adversarial group
//! calibration.
//!
//! A curve is built from normalized residuals `z = (y − μ)/σ`. For each
//! expected proportion `p` on a uniform interior grid the observed proportion
//! is the fraction of points with `Φ(z) ≤ p`. Since Φ is strictly increasing
//! this is counted as `z ≤ Φ⁻¹(p)` against sorted residuals, which also makes
//! re-evaluating the curve under a rescaled σ cheap.

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{PredictionSet, RngSeed};
use crate::numerics::{mean_and_sample_std, std_normal_quantile};

pub const DEFAULT_GRID_SIZE: usize = 99;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SUBGROUPS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("every sigma is zero; no calibration curve can be built")]
    AllSigmaZero,
    #[error("need at least 2 points with positive sigma, got {found}")]
    TooFewPoints { found: usize },
    #[error("grid size must be at least 1")]
    EmptyGrid,
    #[error("group fraction {fraction} must lie in (0, 1]")]
    InvalidFraction { fraction: f64 },
    #[error("group fraction {fraction} gives subgroups of {size} points; at least 2 are needed")]
    FractionTooSmall { fraction: f64, size: usize },
    #[error("trials and subgroups must both be positive")]
    NoTrials,
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    /// Interior grid `j/(grid_size + 1)`, strictly increasing.
    pub expected: Vec<f64>,
    /// Observed cumulative proportions, nondecreasing.
    pub observed: Vec<f64>,
    pub miscalibration_area: f64,
    pub n_used: usize,
    pub n_excluded_zero_sigma: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialCurve {
    pub group_fractions: Vec<f64>,
    pub mean_worst_area: Vec<f64>,
    pub std_error: Vec<f64>,
    pub trials: usize,
    pub subgroups_per_trial: usize,
}

/// `(y − μ)/σ`; entries with `σ = 0` are `+inf` and are skipped by every
/// curve built from them.
pub fn normalized_residuals(p: &PredictionSet) -> Vec<f64> {
    p.y_true
        .iter()
        .zip(&p.mu)
        .zip(&p.sigma)
        .map(|((y, m), s)| if *s > 0.0 { (y - m) / s } else { f64::INFINITY })
        .collect()
}

pub fn expected_grid(grid_size: usize) -> Vec<f64> {
    (1..=grid_size).map(|j| j as f64 / (grid_size + 1) as f64).collect()
}

/// Trapezoidal integral of `|observed − expected|` over `[0, 1]`, with the
/// implicit endpoints `(0, 0)` and `(1, 1)`.
pub fn area_from_points(expected: &[f64], observed: &[f64]) -> f64 {
    debug_assert_eq!(expected.len(), observed.len());
    let mut prev_x = 0.0;
    let mut prev_gap = 0.0;
    let mut area = 0.0;
    for (&x, &o) in expected.iter().zip(observed).chain(std::iter::once((&1.0, &1.0))) {
        let gap = (o - x).abs();
        area += 0.5 * (x - prev_x) * (gap + prev_gap);
        prev_x = x;
        prev_gap = gap;
    }
    area
}

pub fn miscalibration_area(c: &CalibrationCurve) -> f64 {
    area_from_points(&c.expected, &c.observed)
}

/// Precomputed grid quantiles for evaluating many curves on one grid.
#[derive(Debug, Clone)]
pub struct CurveGrid {
    expected: Vec<f64>,
    thresholds: Vec<f64>,
}

impl CurveGrid {
    pub fn new(grid_size: usize) -> Result<Self, CalibrationError> {
        if grid_size == 0 {
            return Err(CalibrationError::EmptyGrid);
        }
        let expected = expected_grid(grid_size);
        let thresholds = expected
            .iter()
            .map(|&p| std_normal_quantile(p).expect("interior grid point"))
            .collect();
        Ok(Self { expected, thresholds })
    }

    pub fn expected(&self) -> &[f64] {
        &self.expected
    }

    /// Observed proportions for ascending finite residuals `sorted_z`, after
    /// every σ has been multiplied by `scale`.
    pub fn observed(&self, sorted_z: &[f64], scale: f64) -> Vec<f64> {
        let n = sorted_z.len() as f64;
        self.thresholds
            .iter()
            .map(|&q| {
                let cut = q * scale;
                sorted_z.partition_point(|&z| z <= cut) as f64 / n
            })
            .collect()
    }

    pub fn area(&self, sorted_z: &[f64], scale: f64) -> f64 {
        area_from_points(&self.expected, &self.observed(sorted_z, scale))
    }
}

/// Finite residuals sorted ascending, plus the number of σ = 0 exclusions.
pub fn sorted_finite_residuals(p: &PredictionSet) -> (Vec<f64>, usize) {
    let z = normalized_residuals(p);
    let total = z.len();
    let mut finite: Vec<f64> = z.into_iter().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let excluded = total - finite.len();
    (finite, excluded)
}

fn check_usable(n_used: usize) -> Result<(), CalibrationError> {
    match n_used {
        0 => Err(CalibrationError::AllSigmaZero),
        1 => Err(CalibrationError::TooFewPoints { found: 1 }),
        _ => Ok(()),
    }
}

pub fn calibration_curve(p: &PredictionSet, grid_size: usize) -> Result<CalibrationCurve, CalibrationError> {
    let grid = CurveGrid::new(grid_size)?;
    let (z, excluded) = sorted_finite_residuals(p);
    check_usable(z.len())?;
    if excluded > 0 {
        log::warn!("{excluded} predictions with sigma = 0 excluded from the calibration curve");
    }
    let observed = grid.observed(&z, 1.0);
    let miscalibration_area = area_from_points(grid.expected(), &observed);
    Ok(CalibrationCurve {
        expected: grid.expected,
        observed,
        miscalibration_area,
        n_used: z.len(),
        n_excluded_zero_sigma: excluded,
    })
}

/// Worst-subgroup miscalibration area as a function of subgroup size.
///
/// For every fraction, `trials` rounds each draw `subgroups` random subsets
/// of `round(fraction · n)` points (without replacement inside a subset;
/// subsets may overlap each other) and keep the largest area. The curve
/// reports the mean of those maxima and its standard error. Each trial uses
/// its own stream derived from `(seed, fraction index, trial index)`.
pub fn adversarial_group_calibration(
    p: &PredictionSet,
    fractions: &[f64],
    trials: usize,
    subgroups: usize,
    seed: RngSeed,
) -> Result<AdversarialCurve, CalibrationError> {
    adversarial_with_grid(p, fractions, trials, subgroups, seed, DEFAULT_GRID_SIZE)
}

pub fn adversarial_with_grid(
    p: &PredictionSet,
    fractions: &[f64],
    trials: usize,
    subgroups: usize,
    seed: RngSeed,
    grid_size: usize,
) -> Result<AdversarialCurve, CalibrationError> {
    if trials == 0 || subgroups == 0 {
        return Err(CalibrationError::NoTrials);
    }
    let grid = CurveGrid::new(grid_size)?;
    let (z, _) = sorted_finite_residuals(p);
    check_usable(z.len())?;
    let n = z.len();

    let mut sizes = Vec::with_capacity(fractions.len());
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(CalibrationError::InvalidFraction { fraction: f });
        }
        let size = (f * n as f64).round() as usize;
        if size < 2 {
            return Err(CalibrationError::FractionTooSmall { fraction: f, size });
        }
        sizes.push(size.min(n));
    }

    let mut mean_worst_area = Vec::with_capacity(fractions.len());
    let mut std_error = Vec::with_capacity(fractions.len());
    let mut sub = Vec::new();
    for (fi, &size) in sizes.iter().enumerate() {
        let fraction_seed = seed.derive(fi as u64);
        let worst: Vec<f64> = (0..trials)
            .map(|t| {
                let mut rng = fraction_seed.derive(t as u64).rng();
                (0..subgroups)
                    .map(|_| {
                        if size == n {
                            return grid.area(&z, 1.0);
                        }
                        sub.clear();
                        sub.extend(index::sample(&mut rng, n, size).into_iter().map(|i| z[i]));
                        sub.sort_by(f64::total_cmp);
                        grid.area(&sub, 1.0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let (mean, std) = mean_and_sample_std(&worst);
        let se = std / (trials as f64).sqrt();
        mean_worst_area.push(mean);
        std_error.push(se);
    }

    Ok(AdversarialCurve {
        group_fractions: fractions.to_vec(),
        mean_worst_area,
        std_error,
        trials,
        subgroups_per_trial: subgroups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    /// y ~ Normal(μ, σ²) with the reported σ: a perfectly calibrated set.
    pub(crate) fn gaussian_set(n: usize, seed: u64) -> PredictionSet {
        let mut rng = RngSeed::new(seed).rng();
        let mut y = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        for i in 0..n {
            let m = (i as f64 * 0.37).sin();
            let s = 0.1 + 0.05 * (i % 7) as f64;
            let e: f64 = StandardNormal.sample(&mut rng);
            mu.push(m);
            sigma.push(s);
            y.push(m + s * e);
        }
        PredictionSet::from_arrays(y, mu, sigma).unwrap()
    }

    #[test]
    fn residual_cases() {
        let p = PredictionSet::from_arrays(vec![1.0, 2.0], vec![1.0, 2.0], vec![0.3, 0.4]).unwrap();
        assert_eq!(normalized_residuals(&p), vec![0.0, 0.0]);
        let p = PredictionSet::from_arrays(vec![1.3, -0.6], vec![1.0, -1.0], vec![0.3, 0.4]).unwrap();
        for z in normalized_residuals(&p) {
            assert!((z - 1.0).abs() < 1e-12);
        }
        let p = PredictionSet::from_arrays(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.5, 0.0]).unwrap();
        assert_eq!(normalized_residuals(&p), vec![2.0, f64::INFINITY]);
    }

    #[test]
    fn closed_form_trapezoid() {
        assert!((area_from_points(&[0.5], &[0.25]) - 0.125).abs() < 1e-15);
        let g = expected_grid(99);
        assert_eq!(area_from_points(&g, &g), 0.0);
    }

    #[test]
    fn all_zero_observed_tends_to_half() {
        let mut last = 0.0;
        for size in [9, 99, 999, 9999] {
            let g = expected_grid(size);
            let a = area_from_points(&g, &vec![0.0; size]);
            assert!(a > last && a <= 0.5);
            last = a;
        }
        assert!((last - 0.5).abs() < 1e-3);
    }

    #[test]
    fn calibrated_gaussian_null() {
        let p = gaussian_set(100_000, 1);
        let c = calibration_curve(&p, DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(c.n_used, 100_000);
        for (e, o) in c.expected.iter().zip(&c.observed) {
            assert!((e - o).abs() < 0.01);
        }
        assert!(c.miscalibration_area < 0.01);
        assert!((miscalibration_area(&c) - c.miscalibration_area).abs() < 1e-15);
    }

    #[test]
    fn overconfident_curve_lies_below_diagonal() {
        let p = gaussian_set(100_000, 2);
        let tight = p.with_sigma(p.sigma.iter().map(|s| s / 10.0).collect());
        let c = calibration_curve(&tight, DEFAULT_GRID_SIZE).unwrap();
        for (e, o) in c.expected.iter().zip(&c.observed).filter(|(e, _)| **e > 0.55) {
            assert!(o < e, "{o} !< {e}");
        }
        assert!(c.miscalibration_area >= 0.2, "{}", c.miscalibration_area);
    }

    #[test]
    fn zero_sigma_points_excluded() {
        let p = PredictionSet::from_arrays(vec![0.1, -0.2, 0.5, 3.0], vec![0.0; 4], vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        let c = calibration_curve(&p, 9).unwrap();
        assert_eq!(c.n_used, 3);
        assert_eq!(c.n_excluded_zero_sigma, 1);
        let all_zero = PredictionSet::from_arrays(vec![1.0, 2.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert_eq!(calibration_curve(&all_zero, 9), Err(CalibrationError::AllSigmaZero));
    }

    #[test]
    fn curve_matches_direct_cdf_counting() {
        use crate::numerics::std_normal_cdf;
        let p = gaussian_set(2_000, 3);
        let c = calibration_curve(&p, 19).unwrap();
        let z = normalized_residuals(&p);
        for (e, o) in c.expected.iter().zip(&c.observed) {
            let direct = z.iter().filter(|&&v| std_normal_cdf(v) <= *e).count() as f64 / z.len() as f64;
            assert!((direct - o).abs() < 1e-12);
        }
    }

    #[test]
    fn full_fraction_reproduces_global_area() {
        let p = gaussian_set(3_000, 4);
        let full = calibration_curve(&p, DEFAULT_GRID_SIZE).unwrap().miscalibration_area;
        let adv = adversarial_group_calibration(&p, &[1.0], 20, 10, RngSeed::new(0)).unwrap();
        assert!((adv.mean_worst_area[0] - full).abs() < 1e-12);
        assert_eq!(adv.std_error[0], 0.0);
    }

    #[test]
    fn small_groups_look_worse() {
        let p = gaussian_set(20_000, 5);
        let fr = [0.01, 0.0125, 0.015, 0.0175, 0.02];
        let adv = adversarial_group_calibration(&p, &fr, 100, 10, RngSeed::new(6)).unwrap();
        for w in adv.mean_worst_area.windows(2) {
            assert!(w[1] < w[0], "{:?}", adv.mean_worst_area);
        }
        for a in &adv.mean_worst_area {
            assert!((0.0..=0.5).contains(a));
        }
    }

    #[test]
    fn adversarial_is_deterministic_and_validates() {
        let p = gaussian_set(1_000, 7);
        let a = adversarial_group_calibration(&p, &[0.05, 0.2], 10, 5, RngSeed::new(1)).unwrap();
        let b = adversarial_group_calibration(&p, &[0.05, 0.2], 10, 5, RngSeed::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            adversarial_group_calibration(&p, &[0.001], 10, 5, RngSeed::new(1)),
            Err(CalibrationError::FractionTooSmall { size: 1, .. })
        ));
        assert!(matches!(
            adversarial_group_calibration(&p, &[1.5], 10, 5, RngSeed::new(1)),
            Err(CalibrationError::InvalidFraction { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn area_bounded_and_observed_monotone(
                z in prop::collection::vec(-50.0f64..50.0, 2..200),
                grid in 1usize..120,
            ) {
                let n = z.len();
                let p = PredictionSet::from_arrays(z.clone(), vec![0.0; n], vec![1.0; n]).unwrap();
                let c = calibration_curve(&p, grid).unwrap();
                prop_assert!(c.miscalibration_area >= 0.0 && c.miscalibration_area <= 0.5);
                prop_assert!(c.observed.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(c.expected.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
