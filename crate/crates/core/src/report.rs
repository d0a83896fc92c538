//! The full metric portfolio for one prediction set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibration_curve, CalibrationCurve, DEFAULT_GRID_SIZE};
use crate::data::PredictionSet;
use crate::metrics::{self, AccuracyReport, DispersionReport, DistributionSummary, GroupMetrics};
use crate::scoring::interval_score;
use crate::screening::{honesty_rate, DEFAULT_HONESTY_MULTIPLIER};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_VIOLIN_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    pub grid_size: usize,
    pub violin_points: usize,
    pub honesty_multiplier: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            violin_points: DEFAULT_VIOLIN_POINTS,
            honesty_multiplier: DEFAULT_HONESTY_MULTIPLIER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSummary {
    pub miscalibration_area: f64,
    pub n_used: usize,
    pub n_excluded_zero_sigma: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub n: usize,
    pub accuracy: Option<AccuracyReport>,
    pub sharpness: Option<f64>,
    pub dispersion: Option<DispersionReport>,
    pub calibration: Option<CalibrationSummary>,
    pub mean_interval_score: Option<f64>,
    pub honesty_multiplier: f64,
    pub honesty_rate: Option<f64>,
    pub groups: Option<BTreeMap<String, GroupMetrics>>,
    /// One message per metric family that could not be computed.
    pub errors: Vec<String>,
}

/// Report plus the tables behind the calibration and violin plots.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub curve: Option<CalibrationCurve>,
    pub violin: Option<DistributionSummary>,
}

fn keep<T>(errors: &mut Vec<String>, family: &str, r: Result<T, String>) -> Option<T> {
    r.map_err(|e| errors.push(format!("{family}: {e}"))).ok()
}

/// Computes every metric family. A family that fails is recorded in
/// `errors` and left empty; the others are still filled in.
pub fn evaluate(p: &PredictionSet, opts: &ReportOptions) -> Evaluation {
    let mut errors = Vec::new();
    let nonempty = |family: &str| {
        if p.is_empty() {
            Err(format!("no predictions for {family}"))
        } else {
            Ok(())
        }
    };

    let accuracy = keep(&mut errors, "accuracy", metrics::accuracy(p).map_err(|e| e.to_string()));
    if let Some(a) = &accuracy {
        if a.r2.is_none() {
            errors.push("accuracy: targets are constant; r2 and pearson_r undefined".into());
        }
        if a.marpd_zero_denominators > 0 {
            errors.push(format!(
                "accuracy: {} MARPD terms had |y_pred| + |y_true| = 0 and count as 0",
                a.marpd_zero_denominators
            ));
        }
    }
    let sharpness = keep(
        &mut errors,
        "sharpness",
        nonempty("sharpness").map(|_| metrics::sharpness(p)),
    );
    let dispersion = keep(
        &mut errors,
        "dispersion",
        metrics::dispersion(p).map_err(|e| e.to_string()),
    );
    if let Some(d) = &dispersion {
        if d.cv.is_none() {
            errors.push("dispersion: mean sigma is 0; cv undefined".into());
        }
    }
    let curve = keep(
        &mut errors,
        "calibration",
        calibration_curve(p, opts.grid_size).map_err(|e| e.to_string()),
    );
    let calibration = curve.as_ref().map(|c| CalibrationSummary {
        miscalibration_area: c.miscalibration_area,
        n_used: c.n_used,
        n_excluded_zero_sigma: c.n_excluded_zero_sigma,
    });
    let mean_interval_score = keep(
        &mut errors,
        "interval_score",
        nonempty("interval_score").map(|_| interval_score(p).mean_score),
    );
    let honesty = keep(
        &mut errors,
        "honesty_rate",
        nonempty("honesty_rate").map(|_| honesty_rate(p, opts.honesty_multiplier)),
    );
    let groups = match &p.groups {
        Some(_) => keep(
            &mut errors,
            "groups",
            metrics::grouped_metrics(p).map_err(|e| e.to_string()),
        ),
        None => None,
    };
    let violin = keep(
        &mut errors,
        "violin",
        metrics::violin_grid(&p.sigma, opts.violin_points)
            .and_then(|grid| metrics::distribution_summary(&p.sigma, &grid))
            .map_err(|e| e.to_string()),
    );

    Evaluation {
        report: MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            n: p.len(),
            accuracy,
            sharpness,
            dispersion,
            calibration,
            mean_interval_score,
            honesty_multiplier: opts.honesty_multiplier,
            honesty_rate: honesty,
            groups,
            errors,
        },
        curve,
        violin,
    }
}
