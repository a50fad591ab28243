//! CSV and JSON writers. Every file carries the tool version, config hash, seed and generator.
//! CSV floats use 17 significant digits; metadata sits in leading `#` comment lines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::Result;

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(_) | Cell::Empty => Value::Null,
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// 17 significant digits in scientific notation; `nan`, `inf`, `-inf` otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub generator: &'static str,
    pub config: Value,
}

impl Meta {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            tool: "qsl",
            version: crate::VERSION,
            command: cfg.command.name().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            generator: qsl_core::ensembles::GENERATOR,
            config: cfg.canonical_json(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json` depending on `format`.
pub fn write_table(dir: &Path, stem: &str, format: Format, meta: &Meta, table: &Table) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = create(&path)?;
            writeln!(w, "# tool={}", meta.tool)?;
            writeln!(w, "# version={}", meta.version)?;
            writeln!(w, "# command={}", meta.command)?;
            writeln!(w, "# config_hash={}", meta.config_hash)?;
            writeln!(w, "# seed={}", meta.seed)?;
            writeln!(w, "# generator={}", meta.generator)?;
            writeln!(w, "# config={}", serde_json::to_string(&meta.config)?)?;
            let mut c = csv::Writer::from_writer(w);
            c.write_record(&table.columns)?;
            for row in &table.rows {
                c.write_record(row.iter().map(Cell::csv))?;
            }
            c.flush()?;
            Ok(path)
        }
        Format::Json => {
            let rows: Vec<Value> = table.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            write_json(dir, stem, meta, json!({ "columns": table.columns, "rows": rows }))
        }
    }
}

/// Writes `<dir>/<stem>.json` as `{"meta": ..., "data": ...}`.
pub fn write_json(dir: &Path, stem: &str, meta: &Meta, data: Value) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &json!({ "meta": meta, "data": data }))?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}
