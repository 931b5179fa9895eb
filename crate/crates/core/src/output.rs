//! Text formatting shared by the CSV and report writers.

use std::io::{self, Write};

/// Scientific notation with 17 significant digits, enough to round-trip
/// any `f64`. Negative zero prints as zero.
pub fn real(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// Optional value; absent values become an empty field.
pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// Writes `# key=value` comment lines.
pub fn write_header(w: &mut dyn Write, header: &[(String, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(opt_real(None), "");
        assert_eq!(real(-0.0), real(0.0));
    }
}
