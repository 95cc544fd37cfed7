//! Result tables and their CSV/JSON encodings.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::config::{FlatConfig, Format, RunConfig};
use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    /// Value not available for this row (e.g. a fit that could not be made).
    Empty,
}

impl Cell {
    /// CSV text. Floats carry 17 significant digits so they round-trip.
    pub fn to_csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Float(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) => Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// Wide table: one row per grid point, one column per statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Cell of `row` under column `name`.
    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name)
            .and_then(|c| self.rows.get(row).map(|r| &r[c]))
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    version: &'static str,
    config: &'a FlatConfig,
    rows: Vec<Map<String, Value>>,
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| LabError::io("writing csv", e.into());
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::to_csv)).map_err(io)?;
    }
    w.flush().map_err(|e| LabError::io("writing csv", e))
}

/// Rows as objects plus the envelope: artifact version and config echo.
pub fn write_json<W: Write>(table: &Table, cfg: &RunConfig, mut out: W) -> LabResult<()> {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            table
                .columns
                .iter()
                .zip(r)
                .map(|(c, v)| ((*c).to_owned(), v.to_json()))
                .collect()
        })
        .collect();
    let echo = cfg.echo();
    let env = Envelope {
        version: env!("CARGO_PKG_VERSION"),
        config: &echo,
        rows,
    };
    serde_json::to_writer_pretty(&mut out, &env)
        .map_err(|e| LabError::io("writing json", e.into()))?;
    writeln!(out).map_err(|e| LabError::io("writing json", e))
}

pub fn write_table<W: Write>(table: &Table, cfg: &RunConfig, out: W) -> LabResult<()> {
    match cfg.format {
        Format::Csv => write_csv(table, out),
        Format::Json => write_json(table, cfg, out),
    }
}
