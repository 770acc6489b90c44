//! Plain-text output helpers shared by every CSV writer.
//!
//! CSV files use `,` separators, `.` decimals and `\n` line endings. Lines
//! starting with `#` are header comments.

/// Deterministic float rendering: plain decimals for moderate magnitudes,
/// scientific notation otherwise. Both forms round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `# key=value` header lines.
pub fn comment_header(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str("# ");
        out.push_str(k);
        out.push('=');
        out.push_str(&v.replace('\n', " "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-7, 2.5e20, -3.75, 123456.789] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn header_is_single_line_per_key() {
        let h = comment_header(&[("config", "{\n\"a\": 1\n}".into())]);
        assert_eq!(h.lines().count(), 1);
    }
}
