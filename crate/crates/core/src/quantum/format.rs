//! Plain-text density matrix format: four lines of four `re±imi` entries,
//! each component printed with 17 significant digits so `f64` values survive
//! a write/read cycle bit for bit.

use std::fmt::Write as _;

use num_complex::Complex;

use crate::linalg::Mat4;
use crate::quantum::QuantumError;
use crate::scalar::Real;

pub fn format_entry(re: f64, im: f64) -> String {
    format!("{re:.16e}{im:+.16e}i")
}

pub fn write_density<T: Real>(m: &Mat4<T>) -> String {
    let mut out = String::new();
    for r in 0..4 {
        let line: Vec<String> = (0..4)
            .map(|col| {
                let z = m[(r, col)];
                format_entry(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_entry(s: &str) -> Option<(f64, f64)> {
    let body = s.strip_suffix('i')?;
    let bytes = body.as_bytes();
    // the imaginary part starts at the last sign that is not an exponent sign
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some((re, im))
}

pub fn parse_density<T: Real>(text: &str) -> Result<Mat4<T>, QuantumError> {
    let mut m = Mat4::zeros();
    let mut row = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if row == 4 {
            return Err(QuantumError::Parse {
                line: lineno + 1,
                message: "more than four matrix rows".into(),
            });
        }
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != 4 {
            return Err(QuantumError::Parse {
                line: lineno + 1,
                message: format!("expected 4 entries, found {}", entries.len()),
            });
        }
        for (col, e) in entries.iter().enumerate() {
            let (re, im) = parse_entry(e).ok_or_else(|| QuantumError::Parse {
                line: lineno + 1,
                message: format!("malformed entry `{e}`"),
            })?;
            m[(row, col)] = Complex::new(T::lit(re), T::lit(im));
        }
        row += 1;
    }
    if row != 4 {
        return Err(QuantumError::Parse {
            line: text.lines().count(),
            message: format!("expected 4 matrix rows, found {row}"),
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;

    #[test]
    fn entry_layout() {
        assert_eq!(format_entry(0.5, -0.25), "5.0000000000000000e-1-2.5000000000000000e-1i");
        assert_eq!(parse_entry("1e-3+2e-5i"), Some((1e-3, 2e-5)));
        assert_eq!(parse_entry("-1.5E+2-0.0i"), Some((-150.0, -0.0)));
        assert_eq!(parse_entry("1.0"), None);
    }

    #[test]
    fn rejects_short_rows() {
        let err = parse_density::<f64>("1+0i 0+0i 0+0i\n").unwrap_err();
        assert!(matches!(err, QuantumError::Parse { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn density_text_round_trips_bitwise(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 32)) {
            let m = Mat4::<f64>::from_fn(|r, col| c(vals[2 * (4 * r + col)], vals[2 * (4 * r + col) + 1]));
            let back: Mat4<f64> = parse_density(&write_density(&m)).unwrap();
            for r in 0..4 {
                for col in 0..4 {
                    prop_assert_eq!(back[(r, col)].re.to_bits(), m[(r, col)].re.to_bits());
                    prop_assert_eq!(back[(r, col)].im.to_bits(), m[(r, col)].im.to_bits());
                }
            }
        }
    }
}
