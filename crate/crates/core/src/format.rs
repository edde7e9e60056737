//! Significant-digit rounding shared by the CSV, JSON and text emitters.

/// Rounds `x` to `digits` significant digits. Non-finite values pass
/// through unchanged.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let digits = digits.max(1);
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r.is_nan() {
        "nan".into()
    } else if r.is_infinite() {
        if r > 0.0 { "inf".into() } else { "-inf".into() }
    } else if r != 0.0 && (r.abs() >= 1e16 || r.abs() < 1e-6) {
        // keep huge and tiny magnitudes compact
        let s = format!("{:.*e}", digits.max(1) - 1, r);
        trim_mantissa(&s)
    } else {
        format!("{r}")
    }
}

/// Six significant digits, the default for detailed output.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}

/// Fixed number of significant digits, keeping trailing zeros
/// (`2.45602…` at 4 digits is `2.456`, `16` at 3 digits is `16.0`).
pub fn sig_fixed(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { format!("{:.*}", digits.saturating_sub(1), 0.0) } else { sig(x, digits) };
    }
    let r = round_sig(x, digits);
    let exp = r.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{r:.decimals$}")
}

fn trim_mantissa(s: &str) -> String {
    match s.split_once('e') {
        Some((m, e)) if m.contains('.') => {
            let m = m.trim_end_matches('0').trim_end_matches('.');
            format!("{m}e{e}")
        }
        _ => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(sig6(2.456_023_486_6), "2.45602");
        assert_eq!(sig6(437_658.8), "437659");
        assert_eq!(sig6(0.125_181_1), "0.125181");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(3.2e-9), "3.2e-9");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn fixed_digits() {
        assert_eq!(sig_fixed(2.456_023_486_6, 4), "2.456");
        assert_eq!(sig_fixed(15.99, 3), "16.0");
        assert_eq!(sig_fixed(5.627_795, 3), "5.63");
        assert_eq!(sig_fixed(53.256, 4), "53.26");
        assert_eq!(sig_fixed(0.0, 3), "0.00");
        assert_eq!(sig_fixed(3195.36, 4), "3195");
    }
}
