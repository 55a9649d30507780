//! Six-significant-figure number rendering for terminal output.

/// Rounds to six significant figures, dropping trailing zeros. Magnitudes
/// below `1e-4` or at least `1e6` use exponent notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim(&format!("{x:.decimals$}")).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sig6_list(values: &[f64]) -> String {
    values.iter().map(|&v| sig6(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_figures() {
        assert_eq!(sig6(0.0562297), "0.0562297");
        assert_eq!(sig6(0.056229734), "0.0562297");
        assert_eq!(sig6(0.03125), "0.03125");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(-2.0), "-2");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(7.149661e-5), "7.14966e-5");
        assert_eq!(sig6(1e-6), "1e-6");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }
}
