//! Scenario files: TOML text, validated and resolved so that every default is explicit.
//!
//! Resolution is idempotent: resolving an already resolved scenario returns it unchanged,
//! which is what makes the header echo round-trip.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use trafficflow::diagrams::{DiagramError, Family, FundamentalDiagram};
use trafficflow::godunov::Scheme;

pub const COMMANDS: [&str; 5] = ["riemann", "simulate", "converge", "stability", "network"];
pub const UNITS: [&str; 2] = ["normalized", "mph-vpm"];
pub const MODELS: [&str; 4] = ["lwr", "resonant", "zhang", "pw"];
pub const FAMILIES: [&str; 8] = [
    "greenshields",
    "polynomial",
    "greenberg",
    "underwood",
    "newell",
    "newell-normalized",
    "kerner",
    "kerner-sigmoid",
];
pub const BOUNDARIES: [&str; 3] = ["neumann", "periodic", "dirichlet"];
pub const INITIAL_KINDS: [&str; 6] = [
    "constant",
    "jump",
    "sine",
    "global-perturbation",
    "local-perturbation",
    "piecewise",
];
pub const DT_POLICIES: [&str; 3] = ["cfl", "fixed", "speed-bound"];
pub const TIMINGS: [&str; 2] = ["implicit", "midpoint"];
pub const CURVES: [&str; 2] = ["as-printed", "isothermal"];
pub const ZONE_ROLES: [&str; 3] = ["interior", "origin", "destination"];
pub const SINKS: [&str; 3] = ["infinite", "mirror-zone", "mirror-destination"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
}

impl ScenarioError {
    pub fn class(&self) -> &'static str {
        match self {
            ScenarioError::Parse { .. } => "parse",
            ScenarioError::Validation { .. } => "validation",
        }
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn one_of(field: &str, value: &str, allowed: &[&str]) -> Result<(), ScenarioError> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("unknown value '{value}', expected one of {}", allowed.join(", ")),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagram: Option<DiagramSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub riemann: Option<RiemannSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

/// A state given per lane; `v` defaults to the equilibrium speed and `lanes` to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<StateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub x_end: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSegment {
    pub x_end: f64,
    pub lanes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hump: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dip: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceSpec>>,
    /// Lane counts by position for the resonant model; one lane when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<Vec<LaneSegment>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiff_guard: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannSpec {
    pub left: StateSpec,
    pub right: StateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonSpec {
    pub dest: usize,
    pub vehicles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneEntry {
    pub lanes: f64,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platoons: Option<Vec<PlatoonSpec>>,
    /// Origin arrivals: `jammed` when absent, otherwise a rate in vehicles per unit time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_zone: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_dest: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectorEntry {
    pub upstream: Vec<usize>,
    pub downstream: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metering: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_blocked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zones: Option<Vec<ZoneEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectors: Option<Vec<ConnectorEntry>>,
}

/// Parses and resolves scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_raw(text)?.resolve()
}

/// Parses without validation or defaults.
pub fn parse_raw(text: &str) -> Result<Scenario, ScenarioError> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ScenarioError::Parse {
            line,
            message: e.message().replace('\n', " "),
        }
    })
}

impl Scenario {
    pub fn command(&self) -> &str {
        self.command.as_deref().unwrap_or("")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn model_kind(&self) -> &str {
        self.model.as_ref().map(|m| m.kind.as_str()).unwrap_or("")
    }

    /// Validates every field and fills all defaults.
    pub fn resolve(mut self) -> Result<Scenario, ScenarioError> {
        let command = self
            .command
            .clone()
            .ok_or_else(|| invalid("command", "missing"))?;
        one_of("command", &command, &COMMANDS)?;
        let units = self.units.get_or_insert_with(|| "normalized".into());
        one_of("units", units, &UNITS)?;
        self.seed.get_or_insert(0);

        if command == "network" {
            return self.resolve_network();
        }
        if self.network.is_some() {
            return Err(invalid("network", format!("not used by command {command}")));
        }
        let model = self.model.as_mut().ok_or_else(|| invalid("model", "missing"))?;
        resolve_model(model)?;
        let diagram = self
            .diagram
            .as_mut()
            .ok_or_else(|| invalid("diagram", "missing"))?;
        let fd = resolve_diagram(diagram)?;
        let model = self.model.clone().unwrap();

        if command == "riemann" {
            for name in ["grid", "initial", "run", "study"] {
                if self.has_table(name) {
                    return Err(invalid(name, "not used by command riemann"));
                }
            }
            let r = self
                .riemann
                .as_mut()
                .ok_or_else(|| invalid("riemann", "missing"))?;
            resolve_state("riemann.left", &mut r.left, &model, &fd)?;
            resolve_state("riemann.right", &mut r.right, &model, &fd)?;
            return Ok(self);
        }

        if self.riemann.is_some() {
            return Err(invalid("riemann", format!("not used by command {command}")));
        }
        let grid = self.grid.as_mut().ok_or_else(|| invalid("grid", "missing"))?;
        resolve_grid(grid, &command, &model, &fd)?;
        let (x_min, x_max) = (grid.x_min.unwrap(), grid.x_max);
        let initial = self
            .initial
            .as_mut()
            .ok_or_else(|| invalid("initial", "missing"))?;
        resolve_initial(initial, &model, &fd, x_min, x_max)?;
        let run = self.run.as_mut().ok_or_else(|| invalid("run", "missing"))?;
        resolve_run(run, &model)?;
        if command == "simulate" {
            if self.study.is_some() {
                return Err(invalid("study", "not used by command simulate"));
            }
        } else {
            let study = self.study.get_or_insert(StudySpec {
                grids: None,
                fields: None,
            });
            resolve_study(study, &command, &model)?;
        }
        Ok(self)
    }

    fn has_table(&self, name: &str) -> bool {
        match name {
            "model" => self.model.is_some(),
            "diagram" => self.diagram.is_some(),
            "grid" => self.grid.is_some(),
            "initial" => self.initial.is_some(),
            "run" => self.run.is_some(),
            "study" => self.study.is_some(),
            "riemann" => self.riemann.is_some(),
            "network" => self.network.is_some(),
            _ => false,
        }
    }

    fn resolve_network(mut self) -> Result<Scenario, ScenarioError> {
        for name in ["model", "grid", "initial", "run", "study", "riemann"] {
            if self.has_table(name) {
                return Err(invalid(name, "not used by command network"));
            }
        }
        let net = self
            .network
            .as_mut()
            .ok_or_else(|| invalid("network", "missing"))?;
        net.steps.get_or_insert(2000);
        net.skip_blocked.get_or_insert(false);
        match net.preset.as_deref() {
            Some("corridor") => {
                if net.zones.is_some() {
                    return Err(invalid("network.zones", "not allowed with a preset"));
                }
                if net.connectors.is_some() {
                    return Err(invalid("network.connectors", "not allowed with a preset"));
                }
                if self.diagram.is_some() {
                    return Err(invalid("diagram", "the corridor preset fixes its diagram"));
                }
                let dt = *net.dt.get_or_insert(30.0 / 3600.0);
                positive("network.dt", dt)?;
                Ok(self)
            }
            Some(other) => Err(invalid(
                "network.preset",
                format!("unknown value '{other}', expected corridor"),
            )),
            None => {
                let dt = net.dt.ok_or_else(|| invalid("network.dt", "missing"))?;
                positive("network.dt", dt)?;
                let zones = net
                    .zones
                    .as_mut()
                    .ok_or_else(|| invalid("network.zones", "missing"))?;
                if zones.is_empty() {
                    return Err(invalid("network.zones", "empty"));
                }
                let n = zones.len();
                for (i, z) in zones.iter_mut().enumerate() {
                    resolve_zone(i, z, n)?;
                }
                let connectors = net
                    .connectors
                    .as_ref()
                    .ok_or_else(|| invalid("network.connectors", "missing"))?;
                for (i, c) in connectors.iter().enumerate() {
                    let field = format!("network.connectors[{i}]");
                    if c.upstream.is_empty() || c.downstream.is_empty() {
                        return Err(invalid(field, "needs upstream and downstream zones"));
                    }
                    if let Some(&z) = c.upstream.iter().chain(&c.downstream).find(|&&z| z >= n) {
                        return Err(invalid(field, format!("zone {z} does not exist")));
                    }
                    if let Some(f) = &c.fractions {
                        if f.len() != c.upstream.len() {
                            return Err(invalid(
                                format!("{field}.fractions"),
                                "needs one entry per upstream zone",
                            ));
                        }
                    }
                    if let Some(m) = c.metering {
                        non_negative(&format!("{field}.metering"), m)?;
                    }
                }
                let diagram = self
                    .diagram
                    .as_mut()
                    .ok_or_else(|| invalid("diagram", "missing"))?;
                resolve_diagram(diagram)?;
                Ok(self)
            }
        }
    }
}

fn positive(field: &str, x: f64) -> Result<(), ScenarioError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<(), ScenarioError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative and finite, got {x}")))
    }
}

fn reject(field: &str, present: bool, why: &str) -> Result<(), ScenarioError> {
    if present {
        Err(invalid(field, why))
    } else {
        Ok(())
    }
}

fn resolve_model(m: &mut ModelSpec) -> Result<(), ScenarioError> {
    one_of("model.kind", &m.kind, &MODELS)?;
    match m.kind.as_str() {
        "lwr" | "resonant" => {
            reject("model.tau", m.tau.is_some(), "only second-order models relax")?;
            reject("model.c0", m.c0.is_some(), "only used by pw")?;
            reject("model.curves", m.curves.is_some(), "only used by pw")?;
        }
        "zhang" => {
            positive("model.tau", *m.tau.get_or_insert(1.0))?;
            reject("model.c0", m.c0.is_some(), "only used by pw")?;
            reject("model.curves", m.curves.is_some(), "only used by pw")?;
        }
        _ => {
            positive("model.tau", *m.tau.get_or_insert(1.0))?;
            let c0 = m.c0.ok_or_else(|| invalid("model.c0", "missing"))?;
            positive("model.c0", c0)?;
            let default = match trafficflow::waves2nd::PwCurves::default() {
                trafficflow::waves2nd::PwCurves::AsPrinted => "as-printed",
                trafficflow::waves2nd::PwCurves::Isothermal => "isothermal",
            };
            let curves = m.curves.get_or_insert_with(|| default.into());
            one_of("model.curves", curves, &CURVES)?;
        }
    }
    Ok(())
}

/// `(parameter, preset value)` pairs each family accepts.
fn family_params(family: &str) -> Vec<(&'static str, Option<f64>)> {
    match family {
        "greenshields" => vec![("v_f", None), ("rho_j", None)],
        "polynomial" => vec![("v_f", None), ("rho_j", None), ("n", None)],
        "greenberg" => vec![("v_0", None), ("rho_j", None)],
        "underwood" => vec![("v_f", None), ("rho_0", None)],
        "newell" => vec![("v_f", None), ("c_j", None), ("rho_j", None)],
        "newell-normalized" => vec![("v_f", Some(1.0)), ("c_j", Some(-1.0)), ("rho_j", Some(1.0))],
        "kerner" => vec![
            ("amplitude", Some(5.0461)),
            ("rho_0", Some(0.25)),
            ("width", Some(0.06)),
            ("offset", Some(3.72e-6)),
        ],
        _ => vec![("amplitude", None), ("rho_0", None), ("width", None), ("offset", None)],
    }
}

impl DiagramSpec {
    fn slot(&mut self, name: &str) -> &mut Option<f64> {
        match name {
            "v_f" => &mut self.v_f,
            "rho_j" => &mut self.rho_j,
            "c_j" => &mut self.c_j,
            "n" => &mut self.n,
            "v_0" => &mut self.v_0,
            "rho_0" => &mut self.rho_0,
            "amplitude" => &mut self.amplitude,
            "width" => &mut self.width,
            _ => &mut self.offset,
        }
    }

    /// The diagram of a resolved spec.
    pub fn build(&self) -> Result<FundamentalDiagram<f64>, ScenarioError> {
        let p = |x: Option<f64>| x.unwrap_or(f64::NAN);
        let family = match self.family.as_str() {
            "greenshields" => Family::Greenshields {
                v_f: p(self.v_f),
                rho_j: p(self.rho_j),
            },
            "polynomial" => Family::Polynomial {
                v_f: p(self.v_f),
                rho_j: p(self.rho_j),
                n: p(self.n),
            },
            "greenberg" => Family::Greenberg {
                v_0: p(self.v_0),
                rho_j: p(self.rho_j),
            },
            "underwood" => Family::Underwood {
                v_f: p(self.v_f),
                rho_0: p(self.rho_0),
            },
            "newell" | "newell-normalized" => Family::Newell {
                v_f: p(self.v_f),
                c_j: p(self.c_j),
                rho_j: p(self.rho_j),
            },
            _ => Family::KernerSigmoid {
                amplitude: p(self.amplitude),
                rho_0: p(self.rho_0),
                width: p(self.width),
                offset: p(self.offset),
            },
        };
        FundamentalDiagram::new(family).map_err(|e| match e {
            DiagramError::InvalidParameter { name, value } => {
                invalid(format!("diagram.{name}"), format!("invalid value {value}"))
            }
            other => invalid("diagram", other.to_string()),
        })
    }
}

fn resolve_diagram(d: &mut DiagramSpec) -> Result<FundamentalDiagram<f64>, ScenarioError> {
    one_of("diagram.family", &d.family, &FAMILIES)?;
    let params = family_params(&d.family);
    for name in ["v_f", "rho_j", "c_j", "n", "v_0", "rho_0", "amplitude", "width", "offset"] {
        let wanted = params.iter().find(|p| p.0 == name);
        let slot = d.slot(name);
        match wanted {
            None if slot.is_some() => {
                return Err(invalid(
                    format!("diagram.{name}"),
                    "not a parameter of this family",
                ))
            }
            None => {}
            Some((_, preset)) => {
                if slot.is_none() {
                    *slot = *preset;
                }
                if slot.is_none() {
                    return Err(invalid(format!("diagram.{name}"), "missing"));
                }
            }
        }
    }
    d.build()
}

fn check_density(field: &str, rho: f64, fd: &FundamentalDiagram<f64>) -> Result<(), ScenarioError> {
    if rho > 0.0 && fd.check(rho).is_ok() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("density {rho} outside (0, {}]", fd.rho_max()),
        ))
    }
}

fn resolve_state(
    field: &str,
    s: &mut StateSpec,
    model: &ModelSpec,
    fd: &FundamentalDiagram<f64>,
) -> Result<(), ScenarioError> {
    check_density(&format!("{field}.rho"), s.rho, fd)?;
    match model.kind.as_str() {
        "zhang" | "pw" => {
            let v = *s.v.get_or_insert_with(|| fd.v(s.rho));
            if !v.is_finite() {
                return Err(invalid(format!("{field}.v"), "must be finite"));
            }
        }
        _ => reject(&format!("{field}.v"), s.v.is_some(), "scalar models have no speed field")?,
    }
    if model.kind == "resonant" {
        positive(&format!("{field}.lanes"), *s.lanes.get_or_insert(1.0))?;
    } else {
        reject(&format!("{field}.lanes"), s.lanes.is_some(), "only used by the resonant model")?;
    }
    Ok(())
}

fn resolve_grid(
    g: &mut GridSpec,
    command: &str,
    model: &ModelSpec,
    fd: &FundamentalDiagram<f64>,
) -> Result<(), ScenarioError> {
    let x_min = *g.x_min.get_or_insert(0.0);
    if !(g.x_max > x_min && x_min.is_finite() && g.x_max.is_finite()) {
        return Err(invalid("grid.x_max", "must exceed grid.x_min"));
    }
    if command == "simulate" {
        let cells = *g.cells.get_or_insert(200);
        if cells < 2 {
            return Err(invalid("grid.cells", "at least two cells are required"));
        }
    } else {
        reject("grid.cells", g.cells.is_some(), "studies take sizes from study.grids")?;
    }
    let bc = g.bc.get_or_insert_with(|| "neumann".into());
    one_of("grid.bc", bc, &BOUNDARIES)?;
    if bc == "dirichlet" {
        let mut left = g.left.ok_or_else(|| invalid("grid.left", "missing for dirichlet"))?;
        let mut right = g.right.ok_or_else(|| invalid("grid.right", "missing for dirichlet"))?;
        resolve_state("grid.left", &mut left, model, fd)?;
        resolve_state("grid.right", &mut right, model, fd)?;
        g.left = Some(left);
        g.right = Some(right);
    } else {
        reject("grid.left", g.left.is_some(), "only used by dirichlet boundaries")?;
        reject("grid.right", g.right.is_some(), "only used by dirichlet boundaries")?;
    }
    Ok(())
}

fn resolve_initial(
    init: &mut InitialSpec,
    model: &ModelSpec,
    fd: &FundamentalDiagram<f64>,
    x_min: f64,
    x_max: f64,
) -> Result<(), ScenarioError> {
    one_of("initial.kind", &init.kind, &INITIAL_KINDS)?;
    let second_order = matches!(model.kind.as_str(), "zhang" | "pw");
    let allowed: &[&str] = match init.kind.as_str() {
        "constant" => &["rho", "v"],
        "jump" => &["x0", "left", "right"],
        "sine" => &["base", "amplitude", "period", "speed_offset"],
        "global-perturbation" => &["rho_h", "amplitude", "period"],
        "local-perturbation" => &["rho_h", "delta", "hump", "dip"],
        _ => &["pieces"],
    };
    let present = [
        ("rho", init.rho.is_some()),
        ("v", init.v.is_some()),
        ("x0", init.x0.is_some()),
        ("base", init.base.is_some()),
        ("amplitude", init.amplitude.is_some()),
        ("period", init.period.is_some()),
        ("speed_offset", init.speed_offset.is_some()),
        ("rho_h", init.rho_h.is_some()),
        ("delta", init.delta.is_some()),
        ("hump", init.hump.is_some()),
        ("dip", init.dip.is_some()),
        ("left", init.left.is_some()),
        ("right", init.right.is_some()),
        ("pieces", init.pieces.is_some()),
    ];
    for (name, here) in present {
        if here && !allowed.contains(&name) {
            return Err(invalid(
                format!("initial.{name}"),
                format!("not used by kind {}", init.kind),
            ));
        }
    }
    let speed_ok = |field: &str, v: Option<f64>| {
        reject(field, v.is_some() && !second_order, "scalar models have no speed field")
    };
    match init.kind.as_str() {
        "constant" => {
            let rho = init.rho.ok_or_else(|| invalid("initial.rho", "missing"))?;
            check_density("initial.rho", rho, fd)?;
            speed_ok("initial.v", init.v)?;
        }
        "jump" => {
            let x0 = *init.x0.get_or_insert((x_min + x_max) / 2.0);
            if !x0.is_finite() {
                return Err(invalid("initial.x0", "must be finite"));
            }
            for (field, s) in [("initial.left", &init.left), ("initial.right", &init.right)] {
                let s = s.ok_or_else(|| invalid(field, "missing"))?;
                check_density(&format!("{field}.rho"), s.rho, fd)?;
                speed_ok(&format!("{field}.v"), s.v)?;
                if let Some(a) = s.lanes {
                    if model.kind != "resonant" {
                        return Err(invalid(
                            format!("{field}.lanes"),
                            "only used by the resonant model",
                        ));
                    }
                    positive(&format!("{field}.lanes"), a)?;
                }
            }
        }
        "sine" => {
            reject("initial.kind", !second_order, "sine data needs a second-order model")?;
            let base = *init.base.get_or_insert(0.65);
            let amp = *init.amplitude.get_or_insert(0.25);
            positive("initial.period", *init.period.get_or_insert(800.0))?;
            init.speed_offset.get_or_insert(0.1);
            check_density("initial.base", base - amp.abs(), fd)?;
            check_density("initial.base", base + amp.abs(), fd)?;
        }
        "global-perturbation" => {
            reject("initial.kind", !second_order, "perturbations need a second-order model")?;
            let rho_h = init.rho_h.ok_or_else(|| invalid("initial.rho_h", "missing"))?;
            let amp = *init.amplitude.get_or_insert(0.02);
            positive("initial.period", *init.period.get_or_insert(800.0))?;
            check_density("initial.rho_h", rho_h - amp.abs(), fd)?;
            check_density("initial.rho_h", rho_h + amp.abs(), fd)?;
        }
        "local-perturbation" => {
            reject("initial.kind", !second_order, "perturbations need a second-order model")?;
            let rho_h = init.rho_h.ok_or_else(|| invalid("initial.rho_h", "missing"))?;
            let delta = *init.delta.get_or_insert(0.02);
            let hump = *init.hump.get_or_insert([37.5, 48.4]);
            let dip = *init.dip.get_or_insert([50.0, 82.8]);
            check_density("initial.rho_h", rho_h + delta.abs(), fd)?;
            check_density("initial.rho_h", rho_h - delta.abs() / 3.0, fd)?;
            for (field, r) in [("initial.hump", hump), ("initial.dip", dip)] {
                if !(r[1] > r[0]) {
                    return Err(invalid(field, "interval end must exceed its start"));
                }
            }
        }
        _ => {
            let pieces = init
                .pieces
                .as_ref()
                .ok_or_else(|| invalid("initial.pieces", "missing"))?;
            if pieces.is_empty() {
                return Err(invalid("initial.pieces", "empty"));
            }
            for (i, p) in pieces.iter().enumerate() {
                check_density(&format!("initial.pieces[{i}].rho"), p.rho, fd)?;
                speed_ok(&format!("initial.pieces[{i}].v"), p.v)?;
            }
            if pieces.windows(2).any(|w| !(w[1].x_end > w[0].x_end)) {
                return Err(invalid("initial.pieces", "x_end must increase"));
            }
        }
    }
    if let Some(lanes) = &init.lanes {
        if model.kind != "resonant" {
            return Err(invalid("initial.lanes", "only used by the resonant model"));
        }
        if init.kind == "jump" && (init.left.unwrap().lanes.is_some() || init.right.unwrap().lanes.is_some()) {
            return Err(invalid("initial.lanes", "conflicts with lanes on the jump states"));
        }
        if lanes.is_empty() {
            return Err(invalid("initial.lanes", "empty"));
        }
        for (i, s) in lanes.iter().enumerate() {
            positive(&format!("initial.lanes[{i}].lanes"), s.lanes)?;
        }
        if lanes.windows(2).any(|w| !(w[1].x_end > w[0].x_end)) {
            return Err(invalid("initial.lanes", "x_end must increase"));
        }
    }
    Ok(())
}

fn resolve_run(run: &mut RunSpec, model: &ModelSpec) -> Result<(), ScenarioError> {
    let scheme_name = run.scheme.get_or_insert_with(|| "first-order".into()).clone();
    let scheme = Scheme::from_name(&scheme_name).ok_or_else(|| {
        invalid(
            "run.scheme",
            format!(
                "unknown value '{scheme_name}', expected one of first-order, first-order-cauchy, second-order, pember, fractional, leveque"
            ),
        )
    })?;
    let ok = match model.kind.as_str() {
        "lwr" | "resonant" => scheme == Scheme::FirstOrder,
        "zhang" => matches!(scheme, Scheme::FirstOrder | Scheme::SecondOrder),
        _ => true,
    };
    if !ok {
        return Err(invalid(
            "run.scheme",
            format!("{scheme_name} does not apply to model {}", model.kind),
        ));
    }
    let t_end = run.t_end.ok_or_else(|| invalid("run.t_end", "missing"))?;
    positive("run.t_end", t_end)?;
    let policy = run.dt_policy.get_or_insert_with(|| "cfl".into()).clone();
    one_of("run.dt_policy", &policy, &DT_POLICIES)?;
    match policy.as_str() {
        "cfl" => {
            let cfl = *run.cfl.get_or_insert(0.9);
            if !(cfl > 0.0 && cfl <= 1.0) {
                return Err(invalid("run.cfl", format!("must lie in (0, 1], got {cfl}")));
            }
            if let Some(m) = run.dt_max {
                positive("run.dt_max", m)?;
            }
            reject("run.dt", run.dt.is_some(), "only used by the fixed policy")?;
        }
        "fixed" => {
            positive("run.dt", run.dt.ok_or_else(|| invalid("run.dt", "missing"))?)?;
            reject("run.cfl", run.cfl.is_some(), "only used by the cfl policy")?;
            reject("run.dt_max", run.dt_max.is_some(), "only used by the cfl policy")?;
        }
        _ => {
            reject("run.dt", run.dt.is_some(), "only used by the fixed policy")?;
            reject("run.cfl", run.cfl.is_some(), "only used by the cfl policy")?;
            reject("run.dt_max", run.dt_max.is_some(), "only used by the cfl policy")?;
        }
    }
    if matches!(model.kind.as_str(), "zhang" | "pw") {
        let timing = run.timing.get_or_insert_with(|| "implicit".into());
        one_of("run.timing", timing, &TIMINGS)?;
        run.stiff_guard.get_or_insert(true);
    } else {
        reject("run.timing", run.timing.is_some(), "scalar models have no source term")?;
        reject("run.stiff_guard", run.stiff_guard.is_some(), "scalar models have no source term")?;
    }
    let times = run.output_times.get_or_insert_with(Vec::new);
    if times.iter().any(|&t| !(t > 0.0 && t < t_end)) {
        return Err(invalid("run.output_times", "times must lie strictly inside (0, t_end)"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("run.output_times", "times must increase"));
    }
    Ok(())
}

fn resolve_study(study: &mut StudySpec, command: &str, model: &ModelSpec) -> Result<(), ScenarioError> {
    let default: &[usize] = if command == "stability" {
        &[512, 1024, 2048]
    } else {
        &[64, 128, 256, 512, 1024]
    };
    let grids = study.grids.get_or_insert_with(|| default.to_vec());
    check_grids("study.grids", grids, command)?;
    let second_order = matches!(model.kind.as_str(), "zhang" | "pw");
    if command == "stability" {
        reject("study.fields", study.fields.is_some(), "stability always uses density")?;
        return Ok(());
    }
    let fields = study.fields.get_or_insert_with(|| {
        if second_order {
            vec!["rho".into(), "v".into()]
        } else {
            vec!["rho".into()]
        }
    });
    if fields.is_empty() {
        return Err(invalid("study.fields", "empty"));
    }
    for f in fields.iter() {
        one_of("study.fields", f, if second_order { &["rho", "v"] } else { &["rho"] })?;
    }
    Ok(())
}

/// Grid-size list rules shared by the scenario and the `--grid` flag.
pub fn check_grids(field: &str, grids: &[usize], command: &str) -> Result<(), ScenarioError> {
    let min = if command == "stability" { 3 } else { 2 };
    if grids.len() < min {
        return Err(invalid(field, format!("need at least {min} sizes")));
    }
    if grids[0] < 2 {
        return Err(invalid(field, "at least two cells are required"));
    }
    if grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(invalid(field, "each size must double the previous one"));
    }
    Ok(())
}

fn resolve_zone(i: usize, z: &mut ZoneEntry, n: usize) -> Result<(), ScenarioError> {
    let field = format!("network.zones[{i}]");
    positive(&format!("{field}.lanes"), z.lanes)?;
    positive(&format!("{field}.length"), z.length)?;
    let role = z.role.get_or_insert_with(|| "interior".into()).clone();
    one_of(&format!("{field}.role"), &role, &ZONE_ROLES)?;
    let origin = role == "origin";
    let destination = role == "destination";
    reject(&format!("{field}.platoons"), z.platoons.is_some() && !origin, "only used by origins")?;
    reject(&format!("{field}.rate"), z.rate.is_some() && !origin, "only used by origins")?;
    reject(&format!("{field}.dest"), z.dest.is_some() && !destination, "only used by destinations")?;
    reject(&format!("{field}.sink"), z.sink.is_some() && !destination, "only used by destinations")?;
    if origin {
        let platoons = z
            .platoons
            .as_ref()
            .ok_or_else(|| invalid(format!("{field}.platoons"), "missing"))?;
        if platoons.is_empty() {
            return Err(invalid(format!("{field}.platoons"), "empty"));
        }
        for (k, p) in platoons.iter().enumerate() {
            positive(&format!("{field}.platoons[{k}].vehicles"), p.vehicles)?;
        }
        if let Some(r) = z.rate {
            non_negative(&format!("{field}.rate"), r)?;
        }
    }
    let sink = if destination {
        z.dest.ok_or_else(|| invalid(format!("{field}.dest"), "missing"))?;
        let sink = z.sink.get_or_insert_with(|| "infinite".into()).clone();
        one_of(&format!("{field}.sink"), &sink, &SINKS)?;
        sink
    } else {
        String::new()
    };
    let wants_zone = sink == "mirror-zone" || sink == "mirror-destination";
    reject(
        &format!("{field}.mirror_zone"),
        z.mirror_zone.is_some() && !wants_zone,
        "only used by mirror sinks",
    )?;
    reject(
        &format!("{field}.mirror_dest"),
        z.mirror_dest.is_some() && sink != "mirror-destination",
        "only used by the mirror-destination sink",
    )?;
    if wants_zone {
        let m = z
            .mirror_zone
            .ok_or_else(|| invalid(format!("{field}.mirror_zone"), "missing"))?;
        if m >= n {
            return Err(invalid(format!("{field}.mirror_zone"), format!("zone {m} does not exist")));
        }
    }
    if sink == "mirror-destination" {
        z.mirror_dest
            .ok_or_else(|| invalid(format!("{field}.mirror_dest"), "missing"))?;
    }
    Ok(())
}
