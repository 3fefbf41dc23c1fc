//! Scenario reports and their deterministic serialization.
//!
//! Reports are reproducible byte for byte at a fixed (config, seed): field
//! order is fixed, floating-point values are printed with 17 significant
//! digits, and the writers are hand-rolled so no library formatting choice
//! can drift underneath the determinism contract.

use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Where a check's expected value comes from: `exact` for arithmetic
/// identities, `model` for values forced by the model construction,
/// `measured` for quantities fitted or maximized numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    Exact,
    Model,
    Measured,
}

impl ValueSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueSource::Exact => "exact",
            ValueSource::Model => "model",
            ValueSource::Measured => "measured",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub source: ValueSource,
}

impl CheckRecord {
    /// Pass iff `|measured - expected| <= tolerance`.
    pub fn near(name: &str, measured: f64, expected: f64, tolerance: f64, source: ValueSource) -> Self {
        CheckRecord {
            name: name.to_string(),
            measured,
            expected,
            tolerance,
            pass: (measured - expected).abs() <= tolerance,
            source,
        }
    }

    /// Pass iff `measured <= bound`.
    pub fn at_most(name: &str, measured: f64, bound: f64, source: ValueSource) -> Self {
        CheckRecord {
            name: name.to_string(),
            measured,
            expected: bound,
            tolerance: 0.0,
            pass: measured <= bound,
            source,
        }
    }

    /// Pass iff `measured >= bound`.
    pub fn at_least(name: &str, measured: f64, bound: f64, source: ValueSource) -> Self {
        CheckRecord {
            name: name.to_string(),
            measured,
            expected: bound,
            tolerance: 0.0,
            pass: measured >= bound,
            source,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_float(*v),
        }
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

/// One named table of scenario data (a time series or a result table).
#[derive(Debug, Clone)]
pub struct SeriesTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SeriesTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        SeriesTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: String,
    pub config_echo: Vec<(String, String)>,
    pub checks: Vec<CheckRecord>,
    pub series: Vec<SeriesTable>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, config_echo: Vec<(String, String)>) -> Self {
        ScenarioReport {
            scenario: scenario.to_string(),
            config_echo,
            checks: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Report body in JSON with fixed field order.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"scenario\": {},", json_str(&self.scenario));
        out.push_str("  \"config\": {\n");
        for (i, (k, v)) in self.config_echo.iter().enumerate() {
            let comma = if i + 1 == self.config_echo.len() { "" } else { "," };
            let _ = writeln!(out, "    {}: {}{}", json_str(k), json_str(v), comma);
        }
        out.push_str("  },\n");
        out.push_str("  \"checks\": [\n");
        for (i, c) in self.checks.iter().enumerate() {
            let comma = if i + 1 == self.checks.len() { "" } else { "," };
            let _ = writeln!(
                out,
                "    {{\"name\": {}, \"measured\": {}, \"expected\": {}, \"tolerance\": {}, \
                 \"pass\": {}, \"source\": {}}}{}",
                json_str(&c.name),
                json_num(c.measured),
                json_num(c.expected),
                json_num(c.tolerance),
                c.pass,
                json_str(c.source.as_str()),
                comma
            );
        }
        out.push_str("  ],\n");
        let _ = writeln!(out, "  \"verdict\": {}", json_str(if self.all_pass() { "pass" } else { "fail" }));
        out.push_str("}\n");
        out
    }

    /// Report body in CSV: one row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,measured,expected,tolerance,pass,source\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_str(&c.name),
                fmt_float(c.measured),
                fmt_float(c.expected),
                fmt_float(c.tolerance),
                c.pass,
                c.source.as_str()
            );
        }
        out
    }

    /// All tables concatenated: a `table,<name>` line, the header, the rows,
    /// then a blank separator.
    pub fn series_csv(&self) -> String {
        let mut out = String::new();
        for table in &self.series {
            let _ = writeln!(out, "table,{}", csv_str(&table.name));
            let _ = writeln!(out, "{}", table.columns.join(","));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<scenario>.report.<ext>` and `<scenario>.series.csv` into
    /// `dir`; returns the written paths.
    pub fn write(&self, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let (ext, body) = match format {
            ReportFormat::Json => ("json", self.to_json()),
            ReportFormat::Csv => ("csv", self.to_csv()),
        };
        let report_path = dir.join(format!("{}.report.{}", self.scenario, ext));
        std::fs::write(&report_path, body)
            .with_context(|| format!("writing {}", report_path.display()))?;
        let series_path = dir.join(format!("{}.series.csv", self.scenario));
        std::fs::write(&series_path, self.series_csv())
            .with_context(|| format!("writing {}", series_path.display()))?;
        Ok(vec![report_path, series_path])
    }

    /// One human line per check.
    pub fn print_summary(&self) {
        for c in &self.checks {
            println!(
                "{} {}: measured {} expected {} (tol {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                fmt_float(c.measured),
                fmt_float(c.expected),
                fmt_float(c.tolerance),
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => anyhow::bail!("unknown report format `{other}` (expected csv or json)"),
        }
    }
}

/// 17 significant digits; round-trips any f64 bit pattern.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        fmt_float(v)
    } else {
        format!("\"{}\"", fmt_float(v))
    }
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn csv_str(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits_and_round_trips() {
        for v in [1.0, -0.25, std::f64::consts::PI, 1.23456789e-300, 6.02e23] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
            let digits: usize =
                s.trim_start_matches('-').split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "{s}");
        }
    }

    #[test]
    fn empty_check_list_gives_header_only_table() {
        let report = ScenarioReport::new("demo", vec![]);
        assert_eq!(report.to_csv(), "name,measured,expected,tolerance,pass,source\n");
        assert!(report.all_pass());
    }

    #[test]
    fn emission_is_deterministic() {
        let mut a = ScenarioReport::new("demo", vec![("k".into(), "v".into())]);
        a.checks.push(CheckRecord::near("x", 1.0, 1.0, 0.1, ValueSource::Exact));
        let mut t = SeriesTable::new("tbl", &["i", "v"]);
        t.push(vec![0usize.into(), 0.5.into()]);
        a.series.push(t);
        let b = a.clone();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.series_csv(), b.series_csv());
        assert!(a.to_json().contains("\"verdict\": \"pass\""));
    }

    #[test]
    fn bound_checks() {
        assert!(CheckRecord::at_most("m", 1.9, 2.0, ValueSource::Measured).pass);
        assert!(!CheckRecord::at_most("m", 2.1, 2.0, ValueSource::Measured).pass);
        assert!(CheckRecord::at_least("m", 0.2, 0.1, ValueSource::Measured).pass);
    }
}
