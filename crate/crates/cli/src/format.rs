//! Fixed-precision number formatting for reports and CSV.

/// Significant digits used for every number the CLI writes.
pub const SIG_DIGITS: usize = 12;

/// `%g`-style formatting with `digits` significant digits and trailing
/// zeros removed. Scientific notation outside `[1e-5, 10^digits)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    }
}

pub fn sig(x: f64) -> String {
    format_sig(x, SIG_DIGITS)
}

pub fn sig_opt(x: Option<f64>) -> String {
    x.map(sig).unwrap_or_default()
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig(35.0 / 6.0), "5.83333333333");
        assert_eq!(sig(5.0), "5");
        assert_eq!(sig(0.1), "0.1");
        assert_eq!(sig(-2.5e-7), "-2.5e-7");
        assert_eq!(sig(1.0e15), "1e15");
        assert_eq!(sig(123456789012.4), "123456789012");
        assert_eq!(sig(9.999999999999951), "10");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(f64::INFINITY), "inf");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 7.037037037037037, 1.23456789e-4] {
            let back: f64 = sig(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-12 * x.abs());
        }
    }
}
