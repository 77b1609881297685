//! Serialization helpers for reports and plot tables.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

/// Extended real that serializes infinities as the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ext_real(&self.0, s)
    }
}

/// `serialize_with` adapter for `f64` fields that may be infinite.
pub fn ext_real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// `serialize_with` adapter for sequences of possibly infinite reals.
pub fn ext_reals<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| ExtReal(x)))
}

/// CSV table with a header row; floats use shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Formats a float for a CSV cell.
pub fn cell(x: f64) -> String {
    let mut s = String::new();
    if x.is_finite() {
        write!(s, "{x:e}").unwrap();
    } else {
        write!(s, "{x}").unwrap();
    }
    s
}
