//! Column-ordered tables written as CSV or JSON lines.
//!
//! Floats use the shortest decimal that parses back to the same `f64`, so
//! reruns diff cleanly and files reload exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::Format;
use crate::error::{io_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F64(f64),
    U64(u64),
    Str(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F64(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U64(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::U64(x as u64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U64(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Str(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Str(x)
    }
}

pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F64(x) => format_f64(*x),
            Cell::U64(x) => x.to_string(),
            Cell::Str(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            // JSON has no non-finite numbers
            Cell::F64(x) if !x.is_finite() => "null".to_string(),
            Cell::F64(x) => format_f64(*x),
            Cell::U64(x) => x.to_string(),
            Cell::Str(s) => serde_json::Value::String(s.clone()).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header; rows are built by
    /// code, never from input.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Write `table` to `path`. CSV always carries the header, even with no rows.
pub fn emit_table(table: &Table, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::text))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        Format::Jsonl => {
            let mut w = BufWriter::new(file);
            for row in &table.rows {
                let mut line = String::from("{");
                for (i, (name, cell)) in table.columns.iter().zip(row).enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    line.push_str(&serde_json::Value::String(name.clone()).to_string());
                    line.push(':');
                    line.push_str(&cell.json());
                }
                line.push('}');
                writeln!(w, "{line}").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
    }
    Ok(())
}

/// Trajectory schema shared by the classical and Langevin scenarios.
pub const TRAJECTORY_COLUMNS: [&str; 10] =
    ["t", "x1", "x2", "x3", "v1", "v2", "v3", "E", "E_schott", "P_rad"];

pub fn trajectory_table(states: &[gravdamp_core::langevin::TrajectoryState]) -> Table {
    let mut t = Table::new(TRAJECTORY_COLUMNS);
    for s in states {
        t.push(vec![
            s.t.into(),
            s.x[0].into(),
            s.x[1].into(),
            s.x[2].into(),
            s.v[0].into(),
            s.v[1].into(),
            s.v[2].into(),
            s.energy.into(),
            s.e_schott.into(),
            s.p_rad.into(),
        ]);
    }
    t
}
