//! Shared CSV formatting.

/// Round-trip representation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}
