use std::io::Write;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

use super::scenario::Format;

pub const SCHEMA: &str = "histcon-report/1";

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Empty,
    Str(String),
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Real(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }

    fn text(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format!("{x:e}"),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// A flat result: named columns, rows of cells. Complex values occupy a
/// `re`/`im` column pair; matrices are listed row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub op: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(op: &str, columns: &[&str]) -> Self {
        Self {
            op: op.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs; other columns stay
    /// empty.
    pub fn push(&mut self, cells: Vec<(&str, Cell)>) {
        let mut row = vec![Cell::Empty; self.columns.len()];
        for (name, value) in cells {
            let k = self
                .columns
                .iter()
                .position(|c| c == name)
                .unwrap_or_else(|| panic!("column `{name}` missing from `{}`", self.op));
            row[k] = value;
        }
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Context written into every report header.
#[derive(Clone, Debug)]
pub struct ReportMeta<'a> {
    pub scenario: &'a str,
    pub index: usize,
    pub tolerances: &'a Tolerances,
}

pub fn emit_report(table: &Table, meta: &ReportMeta, format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::JsonLines => {
            let mut header = Map::new();
            header.insert("schema".into(), SCHEMA.into());
            header.insert("scenario".into(), meta.scenario.into());
            header.insert("analysis".into(), meta.index.into());
            header.insert("op".into(), table.op.clone().into());
            header.insert("tolerances".into(), serde_json::to_value(meta.tolerances).map_err(json_err)?);
            header.insert("columns".into(), table.columns.clone().into());
            writeln!(out, "{}", Value::Object(header))?;
            for row in &table.rows {
                let obj: Map<String, Value> = table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.json()))
                    .collect();
                writeln!(out, "{}", Value::Object(obj))?;
            }
        }
        Format::Csv => {
            writeln!(out, "# schema={SCHEMA}")?;
            writeln!(out, "# scenario={}", meta.scenario)?;
            writeln!(out, "# analysis={}", meta.index)?;
            writeln!(out, "# op={}", table.op)?;
            for (k, v) in meta.tolerances.entries() {
                writeln!(out, "# tol.{k}={v:e}")?;
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::text)).map_err(csv_err)?;
            }
            out.extend(w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
        }
    }
    Ok(out)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("decoherence_matrix", &["alpha", "beta", "re", "im"]);
        for a in ["0", "1"] {
            for b in ["0", "1"] {
                let re = if a == b { 0.5 } else { 0.0 };
                t.push(vec![("alpha", a.into()), ("beta", b.into()), ("re", re.into()), ("im", 0.0.into())]);
            }
        }
        t
    }

    #[test]
    fn json_lines_has_header_and_rows() {
        let tol = Tolerances::default();
        let meta = ReportMeta { scenario: "s", index: 0, tolerances: &tol };
        let bytes = emit_report(&sample(), &meta, Format::JsonLines).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        let header: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["schema"], SCHEMA);
        assert_eq!(header["tolerances"]["ortho"], 1e-9);
        let row: Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(row["re"], 0.5);
    }

    #[test]
    fn csv_has_metadata_and_four_rows() {
        let tol = Tolerances::default();
        let meta = ReportMeta { scenario: "s", index: 2, tolerances: &tol };
        let text = String::from_utf8(emit_report(&sample(), &meta, Format::Csv).unwrap()).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "alpha,beta,re,im");
        assert_eq!(data.len(), 5);
        assert!(text.contains("# tol.ortho=1e-9"));
    }
}
