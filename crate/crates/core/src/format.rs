//! Number formatting shared by every CSV artifact.

/// Rounds to 12 significant digits and prints the shortest representation
/// that reads back to the rounded value.
pub fn fmt12(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("valid float literal");
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt12((-1.0f64).exp()), "0.367879441171");
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(1e12), "1000000000000");
        assert_eq!(fmt12(1.5e-7), "1.5e-7");
        assert_eq!(fmt12(2.5e20), "2.5e20");
    }

    #[test]
    fn output_reads_back_within_rounding() {
        for &v in &[1.0 / 3.0, -2.0 / 7.0, 123456.789012345, 9.87654321e-9] {
            let back: f64 = fmt12(v).parse().unwrap();
            assert!((back - v).abs() <= 5e-12 * v.abs(), "{v} -> {back}");
        }
    }
}
