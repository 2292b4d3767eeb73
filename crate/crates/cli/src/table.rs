//! Tabular results and their CSV form.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every finite `f64` exactly; integers and text are written verbatim and
//! missing values as empty cells.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    /// A float cell, or empty when absent or not finite.
    pub fn num(v: Option<f64>) -> Self {
        match v {
            Some(x) if x.is_finite() => Cell::Num(x),
            _ => Cell::Empty,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn parse(s: &str) -> Self {
        if s.is_empty() {
            Cell::Empty
        } else if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Some(v) = s.parse::<f64>().ok().filter(|v| v.is_finite()) {
            Cell::Num(v)
        } else {
            Cell::Text(s.to_string())
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::num(Some(v))
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
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

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All cells of a named column.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| CliError::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Table(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Self::new(columns);
        for record in r.records() {
            let record = record?;
            if record.len() != table.columns.len() {
                return Err(CliError::Table(format!(
                    "row has {} cells, header has {}",
                    record.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(record.iter().map(Cell::parse).collect());
        }
        Ok(table)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(["p", "name", "value", "n", "note"]);
        t.push(vec![
            0.05.into(),
            "selection_region(opt)".into(),
            0.1f64.into(),
            3i64.into(),
            Cell::Empty,
        ]);
        t.push(vec![
            1e-300.into(),
            "a,b \"quoted\"".into(),
            (-2.5e17).into(),
            (-1i64).into(),
            "ok".into(),
        ]);
        t.push(vec![
            std::f64::consts::PI.into(),
            "true".into(),
            Cell::num(None),
            0i64.into(),
            "1e5x".into(),
        ]);
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let text = t.to_csv_string().unwrap();
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string().unwrap(), text);
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let t = sample();
        let text = t.to_csv_string().unwrap();
        assert!(
            text.starts_with("p,name,value,n,note\n5.0000000000000003e-2,"),
            "{text}"
        );
    }

    #[test]
    fn non_finite_values_become_empty() {
        assert_eq!(Cell::from(f64::NAN), Cell::Empty);
        assert_eq!(Cell::from(f64::INFINITY), Cell::Empty);
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(ResultTable::read_csv("a,b\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn push_checks_width() {
        ResultTable::new(["a"]).push(vec![]);
    }
}
