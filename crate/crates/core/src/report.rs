//! Locale-independent number formatting shared by every emitted report.

/// Significant digits kept in emitted reports.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Shortest `.`-separated decimal that reads back as `round_sig(x)`; exponent
/// form outside `[1e-4, 1e15)`.
pub fn format_num(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        let mag = r.abs();
        let s = if r != 0.0 && !(1e-4..1e15).contains(&mag) {
            format!("{r:e}")
        } else {
            format!("{r}")
        };
        if s.contains('.') || s.contains('e') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        format!("{r}").to_lowercase()
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_num).unwrap_or_default()
}

/// `serde(serialize_with)` adapter that rounds before serializing.
pub fn ser_rounded<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

pub fn ser_rounded_opt<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig(*v)),
        None => s.serialize_none(),
    }
}
