use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::config::Tolerances;

/// Table cell: numbers print with 17 significant digits.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header row, `.` decimals, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(v) => write!(out, "{v:.16e}").expect("writing to a String cannot fail"),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub scenario: String,
    pub pass: bool,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub summary: Value,
    pub table: Table,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// `serde_json::to_value` for report summaries; NaN and infinities become null.
pub fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("summaries serialize")
}
