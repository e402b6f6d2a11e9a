//! Number formatting shared by the JSON and CSV report writers.

/// Rounds to 6 significant digits, ties to even on the exact binary value.
pub fn round6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Shortest decimal text of the 6-significant-digit value.
pub fn fmt6(x: f64) -> String {
    format!("{}", round6(x))
}

pub fn fmt6_opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(0.922), "0.922");
        assert_eq!(fmt6(2.0 / 3.0), "0.666667");
        assert_eq!(fmt6(1234565.0), "1234560");
        assert_eq!(fmt6(1234575.0), "1234580");
        assert_eq!(fmt6(-0.05), "-0.05");
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6_opt(None), "");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [0.1, 1.0 / 3.0, 123.456789, 9.999995e-7, std::f64::consts::FRAC_1_PI] {
            assert_eq!(round6(round6(x)), round6(x));
        }
    }
}
