use std::f64::consts::PI;

use super::NumericsError;

/// Scott's rule bandwidth for a univariate Gaussian kernel:
/// `h = s · n^(-1/5)` with `s` the Bessel-corrected sample standard deviation.
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64, NumericsError> {
    let n = samples.len();
    if n < 2 {
        return Err(NumericsError::TooFewSamples { needed: 2, found: n });
    }
    let (_, std) = super::mean_and_sample_std(samples);
    if !(std > 0.0) {
        return Err(NumericsError::DegenerateSample);
    }
    Ok(std * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate evaluated at `eval_points`.
pub fn kde_scott(samples: &[f64], eval_points: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let h = scott_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(eval_points
        .iter()
        .map(|&x| {
            let s: f64 = samples
                .iter()
                .map(|&xi| {
                    let u = (x - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * norm
        })
        .collect())
}
