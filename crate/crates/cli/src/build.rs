//! Conversion of resolved scenarios into solver objects.

use trafficflow::diagrams::FundamentalDiagram;
use trafficflow::godunov::{
    Boundary, CellState, DtPolicy, Grid1D, InitialCondition, Model, Scheme, SimulationState,
    SourceTiming, Stepper,
};
use trafficflow::network::{
    example_corridor, ConnectorSpec, NetworkSpec, OriginMode, OriginSpec, SinkPolicy, ZoneRole,
    ZoneSpec,
};
use trafficflow::waves2nd::{ModelVariant, PwCurves};

use crate::scenario::{Scenario, StateSpec};

// Everything below assumes `Scenario::resolve` succeeded, so required fields are present.

pub fn diagram(s: &Scenario) -> FundamentalDiagram<f64> {
    s.diagram
        .as_ref()
        .expect("resolved scenario has a diagram")
        .build()
        .expect("resolved diagram is valid")
}

pub fn model(s: &Scenario) -> Model<f64> {
    let m = s.model.as_ref().expect("resolved scenario has a model");
    let fd = diagram(s);
    match m.kind.as_str() {
        "lwr" => Model::Lwr(fd),
        "resonant" => Model::Resonant(fd),
        "zhang" => Model::SecondOrder(ModelVariant::zhang(fd, m.tau.unwrap())),
        _ => {
            let curves = match m.curves.as_deref() {
                Some("isothermal") => PwCurves::Isothermal,
                _ => PwCurves::AsPrinted,
            };
            Model::SecondOrder(
                ModelVariant::payne_whitham(fd, m.c0.unwrap(), m.tau.unwrap()).with_curves(curves),
            )
        }
    }
}

pub fn stepper(s: &Scenario) -> Stepper<f64> {
    let run = s.run.as_ref().expect("resolved scenario has a run table");
    let scheme = Scheme::from_name(run.scheme.as_deref().unwrap()).expect("resolved scheme");
    let dt_policy = match run.dt_policy.as_deref() {
        Some("fixed") => DtPolicy::Fixed(run.dt.unwrap()),
        Some("speed-bound") => DtPolicy::SpeedBound,
        _ => DtPolicy::Cfl {
            target: run.cfl.unwrap(),
            dt_max: run.dt_max.unwrap_or(f64::INFINITY),
        },
    };
    let timing = match run.timing.as_deref() {
        Some("midpoint") => SourceTiming::Midpoint,
        _ => SourceTiming::Implicit,
    };
    let mut st = Stepper::new(model(s), scheme)
        .with_dt(dt_policy)
        .with_timing(timing);
    st.stiff_guard = run.stiff_guard.unwrap_or(true);
    st
}

/// Cell state of a per-lane state spec; resonant densities become totals.
pub fn cell_state(s: &StateSpec, model: &Model<f64>) -> CellState<f64> {
    let a = s.lanes.unwrap_or(1.0);
    let v = s.v.unwrap_or_else(|| model.diagram().v(s.rho));
    match model {
        Model::Resonant(_) => CellState { rho: s.rho * a, v, a },
        _ => CellState { rho: s.rho, v, a },
    }
}

pub fn grid(s: &Scenario, cells: usize) -> Grid1D<f64> {
    let g = s.grid.as_ref().expect("resolved scenario has a grid");
    let m = model(s);
    let bc = match g.bc.as_deref() {
        Some("periodic") => Boundary::Periodic,
        Some("dirichlet") => Boundary::Dirichlet {
            left: cell_state(&g.left.unwrap(), &m),
            right: cell_state(&g.right.unwrap(), &m),
        },
        _ => Boundary::Neumann,
    };
    Grid1D::new(g.x_min.unwrap(), g.x_max, cells, bc).expect("resolved grid is valid")
}

pub fn initial_condition(s: &Scenario) -> InitialCondition<f64> {
    let i = s.initial.as_ref().expect("resolved scenario has an initial table");
    match i.kind.as_str() {
        "constant" => InitialCondition::Constant {
            rho: i.rho.unwrap(),
            v: i.v,
        },
        "jump" => {
            let (l, r) = (i.left.unwrap(), i.right.unwrap());
            InitialCondition::Jump {
                x0: i.x0.unwrap(),
                left: (l.rho, l.v),
                right: (r.rho, r.v),
            }
        }
        "sine" => InitialCondition::SineWave {
            base: i.base.unwrap(),
            amplitude: i.amplitude.unwrap(),
            period: i.period.unwrap(),
            speed_offset: i.speed_offset.unwrap(),
        },
        "global-perturbation" => InitialCondition::GlobalPerturbation {
            rho_h: i.rho_h.unwrap(),
            amplitude: i.amplitude.unwrap(),
            period: i.period.unwrap(),
        },
        "local-perturbation" => {
            let (h, d) = (i.hump.unwrap(), i.dip.unwrap());
            InitialCondition::LocalPerturbation {
                rho_h: i.rho_h.unwrap(),
                delta: i.delta.unwrap(),
                hump: (h[0], h[1]),
                dip: (d[0], d[1]),
            }
        }
        _ => InitialCondition::Piecewise(
            i.pieces
                .as_ref()
                .unwrap()
                .iter()
                .map(|p| (p.x_end, p.rho, p.v))
                .collect(),
        ),
    }
}

/// Lane count at `x` for the resonant model.
pub fn lanes_at(s: &Scenario, x: f64) -> f64 {
    let i = s.initial.as_ref().expect("resolved scenario has an initial table");
    if let Some(segments) = &i.lanes {
        return segments
            .iter()
            .find(|seg| x < seg.x_end)
            .or(segments.last())
            .map(|seg| seg.lanes)
            .unwrap_or(1.0);
    }
    if i.kind == "jump" {
        let side = if x < i.x0.unwrap() { i.left } else { i.right };
        return side.and_then(|st| st.lanes).unwrap_or(1.0);
    }
    1.0
}

pub fn initial_state(s: &Scenario, grid: &Grid1D<f64>) -> SimulationState<f64> {
    initial_condition(s).build_with_lanes(grid, &model(s), |x| lanes_at(s, x))
}

pub fn network_spec(s: &Scenario) -> NetworkSpec<f64> {
    let net = s.network.as_ref().expect("resolved scenario has a network table");
    let mut spec = if net.preset.is_some() {
        example_corridor(s.seed())
    } else {
        let fd = diagram(s);
        let zones = net
            .zones
            .as_ref()
            .unwrap()
            .iter()
            .map(|z| ZoneSpec {
                lanes: z.lanes,
                length: z.length,
                fd,
                role: match z.role.as_deref() {
                    Some("origin") => ZoneRole::Origin(OriginSpec {
                        platoons: z
                            .platoons
                            .as_ref()
                            .unwrap()
                            .iter()
                            .map(|p| (p.dest, p.vehicles))
                            .collect(),
                        mode: z.rate.map(OriginMode::Rate).unwrap_or(OriginMode::Jammed),
                    }),
                    Some("destination") => ZoneRole::Destination {
                        dest: z.dest.unwrap(),
                        sink: match z.sink.as_deref() {
                            Some("mirror-zone") => SinkPolicy::MirrorZone {
                                zone: z.mirror_zone.unwrap(),
                            },
                            Some("mirror-destination") => SinkPolicy::MirrorDestination {
                                zone: z.mirror_zone.unwrap(),
                                dest: z.mirror_dest.unwrap(),
                            },
                            _ => SinkPolicy::Infinite,
                        },
                    },
                    _ => ZoneRole::Interior,
                },
            })
            .collect();
        let connectors = net
            .connectors
            .as_ref()
            .unwrap()
            .iter()
            .map(|c| ConnectorSpec {
                upstream: c.upstream.clone(),
                downstream: c.downstream.clone(),
                fractions: c.fractions.clone(),
                metering: c.metering,
            })
            .collect();
        NetworkSpec {
            zones,
            connectors,
            dt: 0.0,
            seed: s.seed(),
            diverge_skip_blocked: false,
        }
    };
    spec.dt = net.dt.unwrap();
    spec.diverge_skip_blocked = net.skip_blocked.unwrap_or(false);
    spec
}
