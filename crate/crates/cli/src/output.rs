//! CSV output: a `#` comment header echoing the resolved scenario, then a column line and rows.

use crate::scenario::{parse_raw, Scenario, ScenarioError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const BEGIN: &str = "# scenario-begin";
const END: &str = "# scenario-end";

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn header(s: &Scenario, extra: &[(&str, String)]) -> String {
    let mut out = format!("# trafficflow {VERSION}\n");
    out += &format!("# command: {}\n", s.command());
    out += &format!("# units: {}\n", s.units.as_deref().unwrap_or(""));
    out += &format!("# seed: {}\n", s.seed());
    for (k, v) in extra {
        out += &format!("# {k}: {v}\n");
    }
    out += BEGIN;
    out.push('\n');
    for line in s.to_toml().lines() {
        if line.is_empty() {
            out += "#\n";
        } else {
            out += &format!("# {line}\n");
        }
    }
    out += END;
    out.push('\n');
    out
}

/// Extracts the scenario echoed in an output header.
pub fn scenario_from_header(text: &str) -> Result<Scenario, ScenarioError> {
    let mut inside = false;
    let mut toml = String::new();
    for line in text.lines() {
        if line == BEGIN {
            inside = true;
        } else if line == END {
            return parse_raw(&toml);
        } else if inside {
            let body = line.strip_prefix('#').unwrap_or(line);
            toml += body.strip_prefix(' ').unwrap_or(body);
            toml.push('\n');
        }
    }
    Err(ScenarioError::Parse {
        line: 0,
        message: "no scenario block in header".into(),
    })
}

/// Header plus rows of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: String, columns: &[&str]) -> Self {
        Self {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.clone();
        out += &self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out += &row.join(",");
            out.push('\n');
        }
        out
    }
}
