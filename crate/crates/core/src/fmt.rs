//! Number formatting for text outputs.

/// Formats like C's `%.9e`: `1.234567890e+00`, `-5.000000000e-03`.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.9e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[cfg(test)]
mod tests {
    use super::sci;

    #[test]
    fn matches_printf() {
        assert_eq!(sci(0.0), "0.000000000e+00");
        assert_eq!(sci(1.0), "1.000000000e+00");
        assert_eq!(sci(-0.005), "-5.000000000e-03");
        assert_eq!(sci(123456.0), "1.234560000e+05");
        assert_eq!(sci(1e-300), "1.000000000e-300");
        assert_eq!(sci(f64::NAN), "nan");
    }
}
