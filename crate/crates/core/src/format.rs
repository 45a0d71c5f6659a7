//! Text output helpers shared by the CSV writers.

/// Formats `x` exactly like C's `printf("%.17g", x)`.
///
/// Seventeen significant digits are enough for any `f64` to round-trip
/// through `str::parse`.
pub fn g17(x: f64) -> String {
    const PRECISION: i32 = 17;

    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_owned();
    }

    // The exponent is the one the value has after rounding to 17 digits.
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");

    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_owned()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Joins a row of numbers with commas using [`g17`].
pub fn csv_row<I: IntoIterator<Item = f64>>(values: I) -> String {
    values.into_iter().map(g17).collect::<Vec<_>>().join(",")
}
