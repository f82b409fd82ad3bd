//! Tabular reports rendered as CSV or JSON, written atomically.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Missing => Value::Null,
        }
    }
}

/// A table of rows with the configuration that produced it and an optional
/// summary object.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Option<Value>,
}

impl Report {
    pub fn new(config: Value, columns: &[&str]) -> Self {
        Report { config, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), summary: None }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_json_value(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = Map::new();
        out.insert("config".into(), self.config.clone());
        if let Some(s) = &self.summary {
            out.insert("summary".into(), s.clone());
        }
        out.insert("rows".into(), Value::Array(rows));
        Value::Object(out)
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => {
                let mut buf = to_json(&self.to_json_value());
                buf.push(b'\n');
                buf
            }
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"# config: ");
        buf.extend(to_json(&self.config));
        buf.push(b'\n');
        if let Some(s) = &self.summary {
            buf.extend_from_slice(b"# summary: ");
            buf.extend(to_json(s));
            buf.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Compact JSON with every float printed to 17 significant digits.
struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser).expect("serializable value");
    buf
}

/// Write through a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Send `bytes` to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()
        }
    }
}
