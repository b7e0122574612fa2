//! Properties of the finite-volume steppers and the refinement analysis.

use proptest::prelude::*;

use trafficflow::analysis::{coarsen_diff, convergence_rate, norm, report_from_states, Field, NormKind};
use trafficflow::godunov::{
    choose_dt, run_simulation, step, Boundary, DtPolicy, Grid1D, InitialCondition, Model, Scheme,
    SimulationConfig, SimulationState, Stepper,
};
use trafficflow::waves2nd::{ModelVariant, PwCurves};
use trafficflow::FundamentalDiagram;

fn zhang() -> Model<f64> {
    Model::SecondOrder(ModelVariant::zhang(FundamentalDiagram::newell_normalized(), 1.0))
}

fn pw(curves: PwCurves) -> Model<f64> {
    Model::SecondOrder(ModelVariant::payne_whitham(FundamentalDiagram::kerner(), 2.48445, 1.0).with_curves(curves))
}

/// Every supported (model, scheme) pair.
fn combinations() -> Vec<(String, Model<f64>, Scheme)> {
    let fd = FundamentalDiagram::newell_normalized();
    let mut out = vec![
        ("lwr".to_string(), Model::Lwr(fd), Scheme::FirstOrder),
        ("resonant".to_string(), Model::Resonant(fd), Scheme::FirstOrder),
        ("zhang".to_string(), zhang(), Scheme::FirstOrder),
        ("zhang".to_string(), zhang(), Scheme::SecondOrder),
    ];
    for curves in [PwCurves::AsPrinted, PwCurves::Isothermal] {
        for scheme in [
            Scheme::FirstOrder,
            Scheme::FirstOrderCauchy,
            Scheme::SecondOrder,
            Scheme::Pember,
            Scheme::Fractional,
            Scheme::LeVeque,
        ] {
            out.push((format!("pw-{curves:?}"), pw(curves), scheme));
        }
    }
    out
}

/// Smooth non-equilibrium data suited to each model.
fn smooth_state(model: &Model<f64>, grid: &Grid1D<f64>) -> SimulationState<f64> {
    match model {
        Model::Lwr(_) => InitialCondition::SineWave {
            base: 0.5,
            amplitude: 0.2,
            period: grid.x_max - grid.x_min,
            speed_offset: 0.0,
        }
        .build(grid, model),
        Model::Resonant(_) => InitialCondition::Constant { rho: 0.4, v: None }.build_with_lanes(grid, model, |x| {
            if x < 0.5 * (grid.x_min + grid.x_max) {
                3.0
            } else {
                2.0
            }
        }),
        Model::SecondOrder(m) if m.fd == FundamentalDiagram::kerner() => {
            InitialCondition::global_perturbation(0.16).build(grid, model)
        }
        Model::SecondOrder(_) => InitialCondition::zhang_sine().build(grid, model),
    }
}

#[test]
fn density_is_conserved_up_to_boundary_fluxes() {
    for (name, model, scheme) in combinations() {
        let length = if model.is_second_order() { 800.0 } else { 1.0 };
        let grid = Grid1D::new(0.0, length, 64, Boundary::Neumann).unwrap();
        let stepper = Stepper::new(model, scheme);
        let mut state = smooth_state(&model, &grid);
        let dx = grid.dx();
        for k in 0..40 {
            let dt = choose_dt(&stepper, &grid, &state);
            let (next, report) = step(&stepper, &grid, &state, dt).unwrap();
            let before: f64 = state.rho.iter().sum::<f64>() * dx;
            let after: f64 = next.rho.iter().sum::<f64>() * dx;
            let expected = (report.left_flux - report.right_flux) * dt;
            assert!(
                (after - before - expected).abs() < 1e-12 * before.max(1.0),
                "{name} {}: step {k} residual {}",
                scheme.name(),
                after - before - expected
            );
            state = next;
        }
    }
}

#[test]
fn uniform_equilibrium_is_a_fixed_point() {
    for (name, model, scheme) in combinations() {
        let rho = if model.is_pw() { 0.16 } else { 0.45 };
        for bc in [Boundary::Neumann, Boundary::Periodic] {
            let grid = Grid1D::new(0.0, 100.0, 32, bc).unwrap();
            let lanes = if matches!(model, Model::Resonant(_)) { 2.0 } else { 1.0 };
            let state = InitialCondition::Constant { rho, v: None }.build_with_lanes(&grid, &model, |_| lanes);
            let stepper = Stepper::new(model, scheme);
            let dt = choose_dt(&stepper, &grid, &state);
            let (next, _) = step(&stepper, &grid, &state, dt).unwrap();
            for i in 0..state.len() {
                assert!((next.rho[i] - state.rho[i]).abs() < 1e-13, "{name} {} rho", scheme.name());
                if model.is_second_order() {
                    assert!((next.v[i] - state.v[i]).abs() < 1e-13, "{name} {} v", scheme.name());
                }
            }
        }
    }
}

#[test]
fn implicit_relaxation_contracts_speed_toward_equilibrium() {
    let tau = 1e-3;
    for model in [
        Model::SecondOrder(ModelVariant::zhang(FundamentalDiagram::newell_normalized(), tau)),
        Model::SecondOrder(ModelVariant::payne_whitham(FundamentalDiagram::kerner(), 2.48445, tau)),
    ] {
        let grid = Grid1D::new(0.0, 100.0, 16, Boundary::Periodic).unwrap();
        let rho = if model.is_pw() { 0.16 } else { 0.45 };
        let v_eq = model.diagram().v(rho);
        let mut state = InitialCondition::Constant { rho, v: Some(v_eq + 0.3) }.build(&grid, &model);
        let stepper = Stepper::new(model, Scheme::FirstOrder);
        let dt = 0.5 * choose_dt(&Stepper { stiff_guard: false, ..stepper }, &grid, &state);
        assert!(dt > 100.0 * tau);
        let factor = 1.0 / (1.0 + dt / tau);
        let mut gap = 0.3;
        for _ in 0..3 {
            let (next, _) = step(&stepper, &grid, &state, dt).unwrap();
            let new_gap = next.v[0] - v_eq;
            assert!((new_gap - gap * factor).abs() < 1e-12 * gap.abs().max(1e-300) + 1e-15);
            assert!(new_gap.abs() < gap.abs());
            gap = new_gap;
            state = next;
        }
    }
}

#[test]
fn first_order_lwr_converges_at_first_order_on_smooth_data() {
    let model = Model::Lwr(FundamentalDiagram::newell_normalized());
    let sizes = [64, 128, 256, 512, 1024];
    let states: Vec<_> = sizes
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(0.0, 1.0, n, Boundary::Periodic).unwrap();
            let config = SimulationConfig {
                grid,
                stepper: Stepper::new(model, Scheme::FirstOrder).with_dt(DtPolicy::SpeedBound),
                initial: InitialCondition::SineWave {
                    base: 0.5,
                    amplitude: 0.1,
                    period: 1.0,
                    speed_offset: 0.0,
                }
                .build(&grid, &model),
                t_end: 0.1,
                output_times: vec![],
            };
            run_simulation(&config).unwrap().last().clone()
        })
        .collect();
    let report = report_from_states(&sizes, &states, &[Field::Rho]).unwrap();
    for r in report.rates(Field::Rho, NormKind::L1) {
        assert!((0.8..=1.1).contains(&r), "rate {r}");
    }
}

fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n))
}

proptest! {
    #[test]
    fn coarsen_diff_is_linear(
        (f1, f2) in vec_pair(16),
        (c1, c2) in vec_pair(8),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect::<Vec<_>>();
        let lhs = coarsen_diff(&comb(&f1, &f2), &comb(&c1, &c2)).unwrap();
        let d1 = coarsen_diff(&f1, &c1).unwrap();
        let d2 = coarsen_diff(&f2, &c2).unwrap();
        for i in 0..8 {
            prop_assert!((lhs[i] - (a * d1[i] + b * d2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_satisfy_the_triangle_inequality((x, y) in vec_pair(20)) {
        let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        for kind in NormKind::ALL {
            let lhs = norm(&sum, kind).unwrap();
            let rhs = norm(&x, kind).unwrap() + norm(&y, kind).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn rate_is_scale_invariant(e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, s in 1e-6f64..1e6) {
        let r = convergence_rate(e1, e2).unwrap();
        let scaled = convergence_rate(s * e1, s * e2).unwrap();
        prop_assert!((r - scaled).abs() < 1e-9);
    }
}
