//! CSV tables with a commented configuration header.

use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const CONFIG_BEGIN: &str = "# [config]";
const CONFIG_END: &str = "# [end config]";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn real(v: Option<f64>) -> Cell {
        match v {
            Some(x) if x.is_finite() => Cell::Real(x),
            _ => Cell::Empty,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.10e}"),
            // cells never contain separators or line breaks
            Cell::Text(s) => s.replace([',', '\n', '\r'], ";"),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn real(&self, row: usize, name: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(name)?)? {
            Cell::Real(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    /// Rows whose `status` cell is not `ok`.
    pub fn failures(&self) -> usize {
        let Some(c) = self.column("status") else {
            return 0;
        };
        self.rows
            .iter()
            .filter(|r| r[c] != Cell::Text("ok".into()))
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tracestokes {} report", self.kind);
        let _ = writeln!(out, "# format_version = {FORMAT_VERSION}");
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        let _ = writeln!(out, "{CONFIG_BEGIN}");
        for line in self.config.to_toml().lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{CONFIG_END}");
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Recovers the echoed configuration from a report.
pub fn config_from_csv(text: &str) -> Result<ExperimentConfig> {
    let mut inside = false;
    let mut toml = String::new();
    for line in text.lines() {
        match line {
            CONFIG_BEGIN => inside = true,
            CONFIG_END => return ExperimentConfig::from_toml(&toml),
            _ if inside => {
                toml.push_str(
                    line.strip_prefix("# ")
                        .unwrap_or(line.trim_start_matches('#')),
                );
                toml.push('\n');
            }
            _ => {}
        }
    }
    Err(Error::Config("report has no configuration block".into()))
}
