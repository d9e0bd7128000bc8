//! Fixed float formatting for CSV and key-value output.

/// Significant digits of every printed float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g` as in C: shortest of fixed/scientific, trailing zeros trimmed.
///
/// ```
/// use ggcoord_cli::format::fmt_g;
/// assert_eq!(fmt_g(0.45), "0.45");
/// assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
/// assert_eq!(fmt_g(1e-7), "1e-07");
/// assert_eq!(fmt_g(-2.5e15), "-2.5e+15");
/// ```
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_printf() {
        // reference strings from printf("%.12g")
        let cases = [
            (1.0, "1"),
            (-0.0, "0"),
            (100.0, "100"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (1.251547603388009, "1.25154760339"),
            (0.9999999999999, "1"),
            (std::f64::consts::PI * 1e100, "3.14159265359e+100"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
        assert_eq!(fmt_g(f64::NAN), "nan");
        assert_eq!(fmt_g(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for k in 1..2000 {
            let x = (k as f64 * 0.7371).sin() * 10f64.powi(k % 30 - 15);
            let back: f64 = fmt_g(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {}", fmt_g(x));
        }
    }
}
