//! Tabular reports and their CSV serialisation.
//!
//! Layout: `#key=value` metadata lines, one header line, then data rows.
//! Floats use `%.9g` formatting with a `.` decimal separator.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Schedule,
    Theorem1,
    Fig1,
    Fig2,
    Qq,
}

impl ReportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReportKind::Schedule => "schedule",
            ReportKind::Theorem1 => "theorem1",
            ReportKind::Fig1 => "fig1",
            ReportKind::Fig2 => "fig2",
            ReportKind::Qq => "qq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
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

/// C-style `%.9g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 9;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ReportKind,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    meta: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(kind: ReportKind, columns: &[&str]) -> Self {
        Self {
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: vec![("kind".into(), kind.as_str().into())],
        }
    }

    pub fn with_columns(kind: ReportKind, columns: Vec<String>) -> Self {
        let mut report = Self::new(kind, &[]);
        report.columns = columns;
        report
    }

    pub fn add_meta(&mut self, key: &str, value: impl Into<Cell>) {
        self.meta.push((key.to_string(), value.into().render()));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return domain(format!(
                "row has {} cells but the report has {} columns",
                row.len(),
                self.columns.len()
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// All cells of a named column.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    /// Numeric column values; non-numeric cells are skipped.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.column(name)?.into_iter().filter_map(Cell::as_f64).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "#{k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_formatting() {
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.6487212707001282), "1.64872127");
        assert_eq!(format_float(37.96280549342872), "37.9628055");
        assert_eq!(format_float(-4.605170185988091), "-4.60517019");
        assert_eq!(format_float(123456789.0), "123456789");
        assert_eq!(format_float(1234567891.0), "1.23456789e+09");
        assert_eq!(format_float(0.0001), "0.0001");
        assert_eq!(format_float(0.00001234), "1.234e-05");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(f64::NAN), "nan");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(999999999.6), "1e+09");
    }

    #[test]
    fn csv_layout() {
        let mut r = ExperimentReport::new(ReportKind::Schedule, &["t", "a"]);
        r.add_meta("tau", 10.0);
        r.push_row(vec![Cell::from(0u64), Cell::from(1.0)]).unwrap();
        r.push_row(vec![Cell::from(1u64), Cell::from(true)]).unwrap();
        assert!(r.push_row(vec![Cell::from(1u64)]).is_err());
        assert_eq!(r.to_csv(), "#kind=schedule\n#tau=10\nt,a\n0,1\n1,true\n");
        assert_eq!(r.numeric_column("t").unwrap(), vec![0.0, 1.0]);
        assert_eq!(r.meta_value("tau"), Some("10"));
    }
}
