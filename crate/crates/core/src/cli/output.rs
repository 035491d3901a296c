//! Tabular output as CSV (12 significant digits) or JSON lines.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{CliError, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    List(Vec<f64>),
}

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => u8::from(*b).to_string(),
            Cell::Text(s) => s.clone(),
            Cell::List(v) => v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";"),
        }
    }

    fn json(&self) -> Value {
        let num = |x: f64| {
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        };
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::List(v) => Value::Array(v.iter().map(|x| num(*x)).collect()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                out.push_str(&self.header.join(","));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
            }
            Format::JsonLines => {
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::json))
                        .collect();
                    out.push_str(&Value::Object(obj).to_string());
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Key/value report, one key per line (`key = value`) or one JSON object.
pub fn render_report(entries: &[(String, Cell)], format: Format) -> String {
    match format {
        Format::Csv => entries
            .iter()
            .map(|(k, v)| format!("{k} = {}\n", v.csv()))
            .collect(),
        Format::JsonLines => {
            let obj: Map<String, Value> =
                entries.iter().map(|(k, v)| (k.clone(), v.json())).collect();
            format!("{}\n", Value::Object(obj))
        }
    }
}

pub fn extension(format: Format, report: bool) -> &'static str {
    match (format, report) {
        (Format::Csv, false) => "csv",
        (Format::Csv, true) => "txt",
        (Format::JsonLines, _) => "jsonl",
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |path: &Path, source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io(&path, e))?;
    Ok(path)
}
