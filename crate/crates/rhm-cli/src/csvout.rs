//! CSV emission with a frozen field order and float format.
//!
//! Floats are printed with 17 significant digits in scientific notation so
//! repeated runs are byte-identical and round-trip exactly.

/// 17 significant digits, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Incremental CSV writer over an in-memory buffer.
pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv {
            buf,
            cols: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.cols);
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Shorthand for building one row of mixed values.
#[macro_export]
macro_rules! csv_row {
    ($csv:expr, $($field:expr),+ $(,)?) => {
        $csv.row(&[$($field.to_string()),+])
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_stable_and_precise() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let x = 0.1 + 0.2;
        let text = fmt_f64(x);
        let back: f64 = text.parse().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn rows_join_with_commas() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.row(&["1".into(), fmt_f64(2.0)]);
        assert_eq!(csv.into_string(), "a,b\n1,2.0000000000000000e0\n");
    }
}
