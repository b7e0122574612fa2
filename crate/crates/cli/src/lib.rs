//! Scenario-driven command-line front end: parses TOML scenarios, runs the
//! requested study and writes CSV with a `#` header that echoes the resolved scenario.

pub mod build;
pub mod commands;
pub mod output;
pub mod scenario;

use std::fmt;
use std::path::Path;

pub use commands::execute;
pub use output::{header, scenario_from_header, Table};
pub use scenario::{parse_raw, parse_scenario, Scenario, ScenarioError};

/// Failure reported as `error: class=<class> message=<message>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: &'static str, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "error: class={} message={}",
            self.class,
            self.message.replace(['\n', '\r'], " ")
        )
    }

    pub fn exit_code(&self) -> i32 {
        match self.class {
            "usage" => 2,
            "parse" => 3,
            "validation" => 4,
            "io" => 5,
            _ => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::new(e.class(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

/// Command-line overrides applied before resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<Vec<usize>>,
    pub scheme: Option<String>,
}

/// Parses scenario text, applies the subcommand and overrides, and resolves.
pub fn prepare(text: &str, command: &str, o: &Overrides) -> Result<Scenario, CliError> {
    let mut s = parse_raw(text)?;
    s.command = Some(command.to_string());
    if let Some(seed) = o.seed {
        s.seed = Some(seed);
    }
    if let Some(grid) = &o.grid {
        match command {
            "simulate" => {
                if grid.len() != 1 {
                    return Err(CliError::new("usage", "simulate takes a single --grid size"));
                }
                if let Some(g) = s.grid.as_mut() {
                    g.cells = Some(grid[0]);
                }
            }
            "converge" | "stability" => {
                scenario::check_grids("--grid", grid, command)?;
                s.study
                    .get_or_insert(scenario::StudySpec {
                        grids: None,
                        fields: None,
                    })
                    .grids = Some(grid.clone());
            }
            _ => return Err(CliError::new("usage", format!("--grid does not apply to {command}"))),
        }
    }
    if let Some(scheme) = &o.scheme {
        if matches!(command, "riemann" | "network") {
            return Err(CliError::new("usage", format!("--scheme does not apply to {command}")));
        }
        if let Some(run) = s.run.as_mut() {
            run.scheme = Some(scheme.clone());
        }
    }
    Ok(s.resolve()?)
}

/// Reads, runs and writes one scenario; `out = None` writes to stdout.
pub fn run_file(command: &str, scenario: &Path, out: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| CliError::new("io", format!("{}: {e}", scenario.display())))?;
    let s = prepare(&text, command, o)?;
    let csv = execute(&s)?.render();
    match out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CliError::new("io", format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}
