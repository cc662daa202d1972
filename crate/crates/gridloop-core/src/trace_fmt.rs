//! Fixed-format number serialization for trace and CSV output.
//!
//! Every float written to an output file goes through [`sig12`] so that a
//! given bit pattern always serializes to the same bytes, independent of
//! platform or locale. That is what makes "same config + same seed =>
//! byte-identical files" checkable.

/// Formats a float with 12 significant digits in scientific notation.
///
/// `-0.0` is normalized to `0.0` first; infinities and NaN are rejected
/// upstream by validation, but render unambiguously if they ever leak.
pub fn sig12(value: f64) -> String {
    let v = if value == 0.0 { 0.0 } else { value };
    format!("{:.11e}", v)
}

/// Joins already-formatted fields into one CSV line with a trailing `\n`.
pub fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}
