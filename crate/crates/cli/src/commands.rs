use trafficflow::analysis::{self, Field, NormKind};
use trafficflow::godunov::{run_simulation, Model, SimulationConfig, SimulationState};
use trafficflow::lwr::{self, ScalarRiemann, ScalarWave};
use trafficflow::network::{Network, RNG_NAME};
use trafficflow::resonant::{self, ResonantState};
use trafficflow::waves2nd::State2;

use crate::build;
use crate::output::{header, num, opt_num, Table};
use crate::scenario::Scenario;
use crate::CliError;

/// Runs a resolved scenario and returns its output table.
pub fn execute(s: &Scenario) -> Result<Table, CliError> {
    match s.command() {
        "riemann" => riemann(s),
        "simulate" => simulate(s),
        "converge" => converge(s),
        "stability" => stability(s),
        _ => network(s),
    }
}

fn run_error(e: impl std::fmt::Display) -> CliError {
    CliError::new("run", e.to_string())
}

fn riemann(s: &Scenario) -> Result<Table, CliError> {
    let r = s.riemann.as_ref().expect("resolved scenario has a riemann table");
    let model = build::model(s);
    let fd = *model.diagram();
    let mut t = Table::new(
        header(s, &[]),
        &["pattern", "role", "index", "rho", "v", "lanes", "flux"],
    );
    let row = |pattern: &str, role: &str, i: usize, rho: Option<f64>, v: Option<f64>, a: Option<f64>, f: Option<f64>| {
        vec![
            pattern.to_string(),
            role.to_string(),
            i.to_string(),
            opt_num(rho),
            opt_num(v),
            opt_num(a),
            opt_num(f),
        ]
    };
    match &model {
        Model::Lwr(_) => {
            let sol = lwr::solve_riemann(
                ScalarRiemann {
                    rho_l: r.left.rho,
                    rho_r: r.right.rho,
                },
                &fd,
            )
            .map_err(run_error)?;
            let pattern = match sol.kind {
                ScalarWave::Shock { .. } => "shock",
                ScalarWave::Rarefaction { .. } => "rarefaction",
                ScalarWave::Constant => "constant",
            };
            for (role, rho) in [("left", sol.rho_l), ("right", sol.rho_r)] {
                t.push(row(pattern, role, 0, Some(rho), Some(fd.v(rho)), None, Some(fd.flux(rho))));
            }
            let b = sol.boundary_state;
            t.push(row(pattern, "boundary", 0, Some(b), Some(fd.v(b)), None, Some(sol.boundary_flux)));
        }
        Model::Resonant(_) => {
            let (al, ar) = (r.left.lanes.unwrap(), r.right.lanes.unwrap());
            let ul = ResonantState::new(al, r.left.rho * al);
            let ur = ResonantState::new(ar, r.right.rho * ar);
            let sol = resonant::classify(ul, ur, &fd).map_err(run_error)?;
            let pattern = format!("type-{}", sol.case_id);
            let state_row = |role: &str, i: usize, u: ResonantState<f64>| {
                let rho = u.ratio();
                row(&pattern, role, i, Some(rho), Some(fd.v(rho)), Some(u.a), Some(resonant::flow(u, &fd)))
            };
            t.push(state_row("left", 0, ul));
            for (i, u) in sol.intermediates.iter().enumerate() {
                t.push(state_row("intermediate", i, *u));
            }
            t.push(state_row("right", 0, ur));
            t.push(row(&pattern, "boundary", 0, None, None, None, Some(sol.boundary_flux)));
        }
        Model::SecondOrder(variant) => {
            let ul = State2::new(r.left.rho, r.left.v.unwrap());
            let ur = State2::new(r.right.rho, r.right.v.unwrap());
            let sol = variant.solve(ul, ur).map_err(run_error)?;
            let pattern = sol.pattern.name();
            let state_row =
                |role: &str, u: State2<f64>| row(pattern, role, 0, Some(u.rho), Some(u.v), None, Some(u.m()));
            t.push(state_row("left", ul));
            if let Some(m) = sol.intermediate {
                t.push(state_row("intermediate", m));
            }
            t.push(state_row("right", ur));
            t.push(state_row("boundary", sol.boundary_avg));
        }
    }
    Ok(t)
}

fn state_columns(model: &Model<f64>) -> Vec<&'static str> {
    match model {
        Model::Lwr(_) => vec!["t", "cell", "x", "rho"],
        Model::Resonant(_) => vec!["t", "cell", "x", "rho", "lanes"],
        Model::SecondOrder(_) => vec!["t", "cell", "x", "rho", "v"],
    }
}

/// Simulation of the scenario on `cells` cells; returns every snapshot.
fn run_on(s: &Scenario, cells: usize) -> Result<Vec<(f64, SimulationState<f64>)>, String> {
    let grid = build::grid(s, cells);
    let run = s.run.as_ref().expect("resolved scenario has a run table");
    let config = SimulationConfig {
        grid,
        stepper: build::stepper(s),
        initial: build::initial_state(s, &grid),
        t_end: run.t_end.unwrap(),
        output_times: run.output_times.clone().unwrap_or_default(),
    };
    let traj = run_simulation(&config).map_err(|e| e.to_string())?;
    Ok(traj.snapshots.into_iter().map(|snap| (snap.t, snap.state)).collect())
}

fn final_state(s: &Scenario, cells: usize) -> Result<SimulationState<f64>, String> {
    Ok(run_on(s, cells)?.pop().expect("trajectory has a snapshot").1)
}

fn simulate(s: &Scenario) -> Result<Table, CliError> {
    let model = build::model(s);
    let cells = s.grid.as_ref().unwrap().cells.unwrap();
    let grid = build::grid(s, cells);
    let mut t = Table::new(header(s, &[]), &state_columns(&model));
    for (time, state) in run_on(s, cells).map_err(run_error)? {
        for i in 0..state.len() {
            let mut row = vec![num(time), i.to_string(), num(grid.center(i))];
            match model {
                Model::Lwr(_) => row.push(num(state.rho[i])),
                Model::Resonant(_) => {
                    row.push(num(state.rho[i] / state.lanes[i]));
                    row.push(num(state.lanes[i]));
                }
                Model::SecondOrder(_) => {
                    row.push(num(state.rho[i]));
                    row.push(num(state.v[i]));
                }
            }
            t.push(row);
        }
    }
    Ok(t)
}

fn converge(s: &Scenario) -> Result<Table, CliError> {
    let study = s.study.as_ref().unwrap();
    let sizes = study.grids.clone().unwrap();
    let fields: Vec<Field> = study
        .fields
        .as_ref()
        .unwrap()
        .iter()
        .map(|f| if f == "v" { Field::V } else { Field::Rho })
        .collect();
    let report =
        analysis::convergence_study(&sizes, &fields, |n| final_state(s, n)).map_err(run_error)?;
    let mut t = Table::new(
        header(s, &[]),
        &["n_coarse", "n_fine", "field", "norm", "error", "rate"],
    );
    for &field in &fields {
        for kind in NormKind::ALL {
            for e in report.entries.iter().filter(|e| e.field == field && e.kind == kind) {
                t.push(vec![
                    e.n_coarse.to_string(),
                    (2 * e.n_coarse).to_string(),
                    field.name().to_string(),
                    kind.name().to_string(),
                    num(e.error),
                    opt_num(e.rate),
                ]);
            }
        }
    }
    Ok(t)
}

fn stability(s: &Scenario) -> Result<Table, CliError> {
    let sizes = s.study.as_ref().unwrap().grids.clone().unwrap();
    let report = analysis::stability_probe(&sizes, |n| final_state(s, n)).map_err(run_error)?;
    let verdict = format!("{:?}", report.verdict);
    let band = num(report.band);
    let mut t = Table::new(
        header(s, &[("band", band)]),
        &["n_coarse", "n_fine", "error", "ratio", "verdict"],
    );
    for (i, e) in report.errors.iter().enumerate() {
        let ratio = if i == 0 {
            None
        } else {
            Some(e / report.errors[i - 1])
        };
        t.push(vec![
            sizes[i].to_string(),
            sizes[i + 1].to_string(),
            num(*e),
            opt_num(ratio),
            verdict.clone(),
        ]);
    }
    Ok(t)
}

fn network(s: &Scenario) -> Result<Table, CliError> {
    let spec = build::network_spec(s);
    let mut net = Network::new(spec).map_err(run_error)?;
    let steps = s.network.as_ref().unwrap().steps.unwrap();
    let n_dest = net.n_destinations();
    let mut columns = vec!["table", "step", "t", "id", "vehicles"];
    let dest_names: Vec<String> = (0..n_dest).map(|d| format!("dest_{d}")).collect();
    columns.extend(dest_names.iter().map(String::as_str));
    let mut t = Table::new(header(s, &[("rng", RNG_NAME.to_string())]), &columns);
    for _ in 0..steps {
        let rec = net.step().map_err(run_error)?;
        for (z, count) in rec.zone_counts.iter().enumerate() {
            let mut row = vec![
                "zone".to_string(),
                rec.step.to_string(),
                num(rec.t),
                z.to_string(),
                num(count.to_f64()),
            ];
            row.extend(rec.dest_counts[z].iter().map(|c| num(c.to_f64())));
            t.push(row);
        }
        for (c, flux) in rec.connector_flux.iter().enumerate() {
            let mut row = vec![
                "connector".to_string(),
                rec.step.to_string(),
                num(rec.t),
                c.to_string(),
                num(flux.to_f64()),
            ];
            row.extend(std::iter::repeat(String::new()).take(n_dest));
            t.push(row);
        }
    }
    Ok(t)
}
