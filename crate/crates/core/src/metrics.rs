//! Accuracy, sharpness and dispersion of a prediction set, plus box/violin
//! summaries and per-group breakdowns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PredictionSet;
use crate::numerics::{kde_scott, mean_and_sample_std, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("targets are constant; R² and Pearson R are undefined")]
    ConstantTarget,
    #[error("mean sigma is zero; coefficient of variation is undefined")]
    ZeroMeanSigma,
    #[error("prediction set carries no group tags")]
    MissingGroups,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyReport {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mdae: f64,
    /// Mean absolute relative percent distance, in `[0, 200]`.
    pub marpd: f64,
    /// `None` when the targets are constant.
    pub r2: Option<f64>,
    /// `None` when targets or predictions are constant.
    pub pearson_r: Option<f64>,
    /// MARPD terms with `|ŷ| + |y| = 0`; each contributes zero.
    pub marpd_zero_denominators: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxStats {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Lower fence `q1 − 1.5·iqr`.
    pub whisker_lo: f64,
    /// Upper fence `q3 + 1.5·iqr`.
    pub whisker_hi: f64,
    /// Smallest value inside the fences (where a drawn whisker would end).
    pub lowest_inlier: f64,
    /// Largest value inside the fences.
    pub highest_inlier: f64,
    pub outlier_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionReport {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iqr: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub lowest_inlier: f64,
    pub highest_inlier: f64,
    pub outlier_count: usize,
    /// Bessel-corrected std of σ over mean σ; `None` when mean σ is zero.
    pub cv: Option<f64>,
    pub sharpness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupMetrics {
    pub n: usize,
    pub mae: f64,
    pub sharpness: f64,
    /// Full accuracy portfolio; absent for groups with fewer than two points.
    pub accuracy: Option<AccuracyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub box_stats: BoxStats,
    pub eval_grid: Vec<f64>,
    pub density: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolation quantile of already sorted data: position
/// `h = (n − 1)·p`, interpolated between the neighbouring order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn accuracy(p: &PredictionSet) -> Result<AccuracyReport, MetricsError> {
    let n = p.len();
    if n < 2 {
        return Err(MetricsError::TooFewPoints { needed: 2, found: n });
    }
    let abs_err: Vec<f64> = p.mu.iter().zip(&p.y_true).map(|(m, y)| (m - y).abs()).collect();
    let mae = mean(&abs_err);
    let rmse = (abs_err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let mdae = median(&abs_err);

    let mut zero_den = 0;
    let marpd_sum: f64 =
        p.mu.iter()
            .zip(&p.y_true)
            .zip(&abs_err)
            .map(|((m, y), e)| {
                let den = m.abs() + y.abs();
                if den == 0.0 {
                    zero_den += 1;
                    0.0
                } else {
                    100.0 * e / den
                }
            })
            .sum();
    let marpd = marpd_sum / n as f64;

    let y_mean = mean(&p.y_true);
    let ss_tot: f64 = p.y_true.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = abs_err.iter().map(|e| e * e).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    let pearson_r = if ss_tot > 0.0 { pearson(&p.mu, &p.y_true) } else { None };

    Ok(AccuracyReport {
        n,
        mae,
        rmse,
        mdae,
        marpd,
        r2,
        pearson_r,
        marpd_zero_denominators: zero_den,
    })
}

/// Root-mean-square of σ.
pub fn sharpness(p: &PredictionSet) -> f64 {
    (p.sigma.iter().map(|s| s * s).sum::<f64>() / p.len() as f64).sqrt()
}

/// Quartiles, 1.5·IQR fences and outlier count of `values`.
pub fn box_stats(values: &[f64]) -> Result<BoxStats, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFewPoints {
            needed: 2,
            found: values.len(),
        });
    }
    let s = sorted(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q2 = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let whisker_lo = q1 - 1.5 * iqr;
    let whisker_hi = q3 + 1.5 * iqr;
    let inside = |v: &&f64| **v >= whisker_lo && **v <= whisker_hi;
    let lowest_inlier = *s.iter().find(inside).unwrap_or(&q1);
    let highest_inlier = *s.iter().rev().find(inside).unwrap_or(&q3);
    let outlier_count = s.iter().filter(|v| !inside(v)).count();
    Ok(BoxStats {
        q1,
        q2,
        q3,
        iqr,
        whisker_lo,
        whisker_hi,
        lowest_inlier,
        highest_inlier,
        outlier_count,
    })
}

/// Bessel-corrected coefficient of variation.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewPoints { needed: 2, found: n });
    }
    let (m, std) = mean_and_sample_std(values);
    if m == 0.0 {
        return Err(MetricsError::ZeroMeanSigma);
    }
    Ok(std / m)
}

/// Spread of the predicted σ distribution.
pub fn dispersion(p: &PredictionSet) -> Result<DispersionReport, MetricsError> {
    let b = box_stats(&p.sigma)?;
    let cv = match coefficient_of_variation(&p.sigma) {
        Ok(cv) => Some(cv),
        Err(MetricsError::ZeroMeanSigma) => None,
        Err(e) => return Err(e),
    };
    Ok(DispersionReport {
        q1: b.q1,
        q2: b.q2,
        q3: b.q3,
        iqr: b.iqr,
        whisker_lo: b.whisker_lo,
        whisker_hi: b.whisker_hi,
        lowest_inlier: b.lowest_inlier,
        highest_inlier: b.highest_inlier,
        outlier_count: b.outlier_count,
        cv,
        sharpness: sharpness(p),
    })
}

/// Row indices per group tag, tags in sorted order.
pub fn group_indices(p: &PredictionSet) -> Result<BTreeMap<String, Vec<usize>>, MetricsError> {
    let groups = p.groups.as_ref().ok_or(MetricsError::MissingGroups)?;
    let mut by_tag: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_tag.entry(g.clone()).or_default().push(i);
    }
    Ok(by_tag)
}

/// Accuracy and sharpness computed independently for every group tag.
pub fn grouped_metrics(p: &PredictionSet) -> Result<BTreeMap<String, GroupMetrics>, MetricsError> {
    group_indices(p)?
        .into_iter()
        .map(|(tag, idx)| {
            let sub = p.subset(&idx);
            let mae = mean(
                &sub.mu
                    .iter()
                    .zip(&sub.y_true)
                    .map(|(m, y)| (m - y).abs())
                    .collect::<Vec<_>>(),
            );
            let acc = if sub.len() >= 2 { Some(accuracy(&sub)?) } else { None };
            Ok((
                tag,
                GroupMetrics {
                    n: sub.len(),
                    mae: acc.as_ref().map_or(mae, |a| a.mae),
                    sharpness: sharpness(&sub),
                    accuracy: acc,
                },
            ))
        })
        .collect()
}

/// Box statistics plus Scott's-rule KDE on `eval_grid`: the data behind a
/// violin plot.
pub fn distribution_summary(values: &[f64], eval_grid: &[f64]) -> Result<DistributionSummary, MetricsError> {
    let box_stats = box_stats(values)?;
    let density = kde_scott(values, eval_grid)?;
    Ok(DistributionSummary {
        box_stats,
        eval_grid: eval_grid.to_vec(),
        density,
    })
}

/// Evenly spaced grid spanning the data padded by three Scott bandwidths.
pub fn violin_grid(values: &[f64], points: usize) -> Result<Vec<f64>, MetricsError> {
    let h = crate::numerics::scott_bandwidth(values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let points = points.max(2);
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}
