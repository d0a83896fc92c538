//! Tightness: the negatively oriented interval score averaged over central
//! Gaussian intervals at coverages 1 %, 2 %, …, 99 %.

use serde::{Deserialize, Serialize};

use crate::data::PredictionSet;
use crate::numerics::std_normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScoreReport {
    pub mean_score: f64,
    pub per_point_scores: Vec<f64>,
    pub coverage_grid: Vec<f64>,
}

/// Coverage levels 0.01, 0.02, …, 0.99.
pub fn coverage_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Width and penalty parts of the interval score for one central interval
/// `[l, u]` with miss rate `alpha`.
pub fn interval_score_parts(y: f64, lower: f64, upper: f64, alpha: f64) -> (f64, f64) {
    let width = upper - lower;
    let mut penalty = 0.0;
    if y < lower {
        penalty += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        penalty += 2.0 / alpha * (y - upper);
    }
    (width, penalty)
}

/// Interval score of `μ ± z·σ` for a set of coverage levels, averaged over
/// the levels. `half_widths[k]` is `Φ⁻¹(1 − α_k/2)` for level `k`.
fn point_score(y: f64, mu: f64, sigma: f64, alphas: &[f64], half_widths: &[f64]) -> f64 {
    let total: f64 = alphas
        .iter()
        .zip(half_widths)
        .map(|(&a, &z)| {
            let (w, pen) = interval_score_parts(y, mu - z * sigma, mu + z * sigma, a);
            w + pen
        })
        .sum();
    total / alphas.len() as f64
}

/// Mean interval score over the given coverage levels.
///
/// σ = 0 points score the degenerate interval `[μ, μ]`: zero width plus the
/// miss penalty when `y ≠ μ`.
pub fn interval_score_at(p: &PredictionSet, coverages: &[f64]) -> IntervalScoreReport {
    let alphas: Vec<f64> = coverages.iter().map(|c| 1.0 - c).collect();
    let half_widths: Vec<f64> = alphas
        .iter()
        .map(|a| std_normal_quantile(1.0 - a / 2.0).expect("coverage in (0, 1)"))
        .collect();
    let per_point_scores: Vec<f64> = p
        .y_true
        .iter()
        .zip(&p.mu)
        .zip(&p.sigma)
        .map(|((&y, &m), &s)| point_score(y, m, s, &alphas, &half_widths))
        .collect();
    let mean_score = if per_point_scores.is_empty() {
        0.0
    } else {
        per_point_scores.iter().sum::<f64>() / per_point_scores.len() as f64
    };
    IntervalScoreReport {
        mean_score,
        per_point_scores,
        coverage_grid: coverages.to_vec(),
    }
}

pub fn interval_score(p: &PredictionSet) -> IntervalScoreReport {
    interval_score_at(p, &coverage_grid())
}
