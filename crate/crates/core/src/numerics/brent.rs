use serde::{Deserialize, Serialize};

use super::NumericsError;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrentResult {
    pub argmin: f64,
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out; `argmin` is then the best point seen.
    pub converged: bool,
}

/// Brent's derivative-free minimizer on `[lo, hi]`.
///
/// Combines golden-section steps with parabolic interpolation. On return
/// with `converged == true` the final bracket is no wider than `tol`.
/// Non-finite objective values are treated as `+inf`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<BrentResult, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::InvalidBracket { lo, hi });
    }
    let tol = tol.abs().max(4.0 * f64::EPSILON);
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x);
    let (mut fw, mut fv) = (fx, fx);
    // d: last step, e: step before that.
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = 0.25 * tol + f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(BrentResult {
                argmin: x,
                value: fx,
                iterations: iter,
                converged: true,
            });
        }

        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = eval(u);

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Ok(BrentResult {
        argmin: x,
        value: fx,
        iterations: max_iter,
        converged: false,
    })
}
