//! Result emission: JSON records and CSV tables.
//!
//! CSV numbers use `{:.16e}` (17 significant digits, enough to round-trip a
//! double). A table with no rows is still a valid file holding its header.

use std::io::{self, Write};

use num_complex::Complex64;
use serde_json::{json, Value};

use randlocal::linalg::CMatrix;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number, or the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn json_complex(z: Complex64) -> Value {
    json!([json_f64(z.re), json_f64(z.im)])
}

pub fn json_point(z: &[Complex64]) -> Value {
    Value::Array(z.iter().map(|&x| json_complex(x)).collect())
}

/// Row-major `[[re, im], ...]` rows.
pub fn json_matrix(m: &CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|r| Value::Array((0..m.ncols()).map(|k| json_complex(m[(r, k)])).collect())).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Table {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("CSV is ASCII")
    }
}

/// `prefix_1, ..., prefix_m` re/im column pairs.
pub fn complex_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).flat_map(|k| [format!("re_{prefix}{k}"), format!("im_{prefix}{k}")]).collect()
}

pub fn complex_cells(z: &[Complex64]) -> Vec<String> {
    z.iter().flat_map(|x| [fmt_f64(x.re), fmt_f64(x.im)]).collect()
}
