use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Default golden-section tolerance on the argument.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Grid size of the bracketing pre-scan.
pub const SCAN_POINTS: usize = 64;

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::domain(format!("objective is not finite at {x}")))
    }
}

/// Golden-section search for the maximum of a unimodal `f` on
/// `[bracket_lo, bracket_hi]`. Returns `(argmax, max_value)`.
///
/// Ties between the two interior probes keep the left sub-bracket, so flat
/// maxima resolve toward the smaller argument.
pub fn maximize_1d<F: Fn(f64) -> f64>(
    f: F,
    bracket_lo: f64,
    bracket_hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(bracket_lo < bracket_hi) || !bracket_lo.is_finite() || !bracket_hi.is_finite() {
        return Err(Error::domain(format!(
            "bracket must satisfy lo < hi, got ({bracket_lo}, {bracket_hi})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("maximizer tolerance must be positive"));
    }
    let (mut a, mut b) = (bracket_lo, bracket_hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = checked(&f, x1)?;
    let mut f2 = checked(&f, x2)?;

    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = checked(&f, x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = checked(&f, x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// `maximize_1d` preceded by a coarse grid scan that picks the sub-bracket
/// around the best grid point.
pub fn maximize_scanned<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::domain(format!("scan range must satisfy lo < hi, got ({lo}, {hi})")));
    }
    let n = grid_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, checked(&f, lo)?);
    let mut best_i = 0;
    for i in 1..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let y = checked(&f, x)?;
        if y > best.1 {
            best = (x, y);
            best_i = i;
        }
    }
    let left = if best_i == 0 { lo } else { lo + step * (best_i - 1) as f64 };
    let right = if best_i == n - 1 { hi } else { lo + step * (best_i + 1) as f64 };
    let refined = maximize_1d(&f, left, right, tol)?;
    Ok(if refined.1 >= best.1 { refined } else { best })
}
