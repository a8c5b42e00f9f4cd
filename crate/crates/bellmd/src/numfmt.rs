//! Significant-digit float formatting for data files.
//!
//! Output uses fixed notation in a readable exponent window and scientific
//! notation outside it, always trimming trailing zeros. Re-parsing a
//! formatted string and formatting it again reproduces the same bytes, so
//! emitted CSV round-trips exactly.

/// Format with 12 significant digits, the crate-wide output precision.
pub fn fmt12(x: f64) -> String {
    fmt_sig(x, 12)
}

/// Format `x` with `sig` significant digits, `%g`-style.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }

    // Let the standard library do the correctly-rounded digit extraction.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format always contains an exponent");
    let exp: i32 = exp.parse().expect("valid exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), sig);

    let sign = if negative { "-" } else { "" };
    let body = if (-4..sig as i32).contains(&exp) {
        if exp >= 0 {
            let split = exp as usize + 1;
            let int_part = &digits[..split];
            let frac = digits[split..].trim_end_matches('0');
            if frac.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac}")
            }
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            let frac = digits.trim_end_matches('0');
            format!("0.{zeros}{frac}")
        }
    } else {
        let head = &digits[..1];
        let tail = digits[1..].trim_end_matches('0');
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    };
    format!("{sign}{body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn readable_fixed_forms() {
        assert_eq!(fmt12(0.25), "0.25");
        assert_eq!(fmt12(2.4), "2.4");
        assert_eq!(fmt12(2.0), "2");
        assert_eq!(fmt12(-1.5), "-1.5");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
    }

    #[test]
    fn scientific_forms() {
        assert_eq!(fmt12(2e-13), "2e-13");
        assert_eq!(fmt12(1e12), "1e12");
        assert_eq!(fmt12(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt12(-3.5e-9), "-3.5e-9");
        assert_eq!(fmt12(-0.00035), "-0.00035");
        assert_eq!(fmt12(3.5e-10), "3.5e-10");
    }

    #[test]
    fn twelve_digits_at_most() {
        let s = fmt12(0.2581988897471611);
        assert_eq!(s, "0.258198889747");
    }

    #[test]
    fn round_trip_is_stable() {
        let mut rng = CounterRng::new(99);
        for _ in 0..5000 {
            let x = (rng.next_f64() - 0.5) * 10.0f64.powi(rng.below(41) as i32 - 20);
            let once = fmt12(x);
            let back: f64 = once.parse().unwrap();
            assert_eq!(fmt12(back), once, "value {x}");
        }
    }
}
