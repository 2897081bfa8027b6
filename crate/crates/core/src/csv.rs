//! Number formatting shared by every CSV writer.

/// 17 significant digits in scientific notation. Locale independent and
/// round-trips through `str::parse::<f64>` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_examples() {
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(-1.5), "-1.5000000000000000e0");
    }

    proptest! {
        #[test]
        fn lossless_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
