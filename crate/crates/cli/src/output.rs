use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }

    fn to_field(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// Shortest text that parses back to the same value; exponent form for very
/// small or large magnitudes.
fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// Rows with fixed columns: CSV with a header, or a JSON array of objects.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.to_json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns).map_err(csv_io)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::to_field)).map_err(csv_io)?;
        }
        out.flush()
    }
}

/// Keeps the io kind, so a closed pipe stays recognisable.
fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// What a subcommand produces.
pub enum Report {
    Table(Table),
    /// A JSON document; CSV output flattens it to `field,value` rows.
    Doc(Value),
}

impl Report {
    pub fn doc<S: Serialize>(v: &S) -> Self {
        Report::Doc(serde_json::to_value(v).expect("report serializes"))
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Table) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Null => out.push(vec![Cell::Text(prefix.to_string()), Cell::Empty]),
        Value::String(s) => out.push(vec![Cell::Text(prefix.to_string()), Cell::Text(s.clone())]),
        other => out.push(vec![Cell::Text(prefix.to_string()), Cell::Text(other.to_string())]),
    }
}

pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> io::Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    match (report, format) {
        (Report::Table(t), Format::Csv) => t.write_csv(&mut w)?,
        (Report::Table(t), Format::Json) => {
            serde_json::to_writer_pretty(&mut w, &t.to_json())?;
            writeln!(w)?;
        }
        (Report::Doc(v), Format::Json) => {
            serde_json::to_writer_pretty(&mut w, v)?;
            writeln!(w)?;
        }
        (Report::Doc(v), Format::Csv) => {
            let mut t = Table::new(vec!["field", "value"]);
            flatten("", v, &mut t);
            t.write_csv(&mut w)?;
        }
    }
    w.flush()
}
