//! Report and plot-table files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use potlib::report::{cell, Table};
use potlib::ScalarField;
use serde::Serialize;

use crate::Failure;

/// CSV table with `#` comment lines documenting its columns.
#[derive(Debug, Clone)]
pub struct PlotData {
    pub file: String,
    pub comments: Vec<String>,
    pub table: Table,
}

impl PlotData {
    pub fn new(file: &str, columns: &[(&str, &str)]) -> Self {
        PlotData {
            file: file.into(),
            comments: columns.iter().map(|(c, d)| format!("{c}: {d}")).collect(),
            table: Table::new(&columns.iter().map(|(c, _)| *c).collect::<Vec<_>>()),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        self.table.push(values.iter().map(|&x| cell(x)).collect());
    }

    /// Integer columns are written without an exponent.
    pub fn row_cells(&mut self, cells: Vec<String>) {
        self.table.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.table.to_csv());
        out
    }
}

/// Everything a command produces.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub report: serde_json::Value,
    pub tables: Vec<PlotData>,
    /// Extra text files, such as graphs.
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(report: impl Serialize) -> Result<Self, Failure> {
        Ok(Artifacts {
            report: serde_json::to_value(report).map_err(|e| Failure::Validation(format!("report: {e}")))?,
            tables: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
        let io = |e: std::io::Error| Failure::Validation(format!("cannot write to {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&self.report).expect("json value");
        text.push('\n');
        fs::write(&path, text).map_err(io)?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(&t.file);
            fs::write(&path, t.render()).map_err(io)?;
            written.push(path);
        }
        for (name, body) in &self.files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Mean of `u` over vertices sharing a Euclidean radius, by increasing radius.
///
/// Radii closer than `1e-9` relative are treated as one ring.
pub fn ring_average(coords: &[Vec<f64>], u: &ScalarField) -> Vec<(f64, f64)> {
    let mut rings: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for (v, x) in coords.iter().enumerate() {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let key = (r * 1e9).round() as i64;
        let e = rings.entry(key).or_insert((r, 0.0, 0));
        e.1 += u.get(v);
        e.2 += 1;
    }
    rings.into_values().map(|(r, s, k)| (r, s / k as f64)).collect()
}

pub fn radial_table(coords: &[Vec<f64>], u: &ScalarField) -> PlotData {
    let mut t = PlotData::new(
        "radial.csv",
        &[("radius", "Euclidean distance from the origin"), ("value", "mean of the solution over the ring")],
    );
    for (r, m) in ring_average(coords, u) {
        t.row(&[r, m]);
    }
    t
}
