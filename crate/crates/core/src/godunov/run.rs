use crate::num::Real;

use super::grid::{Grid1D, SimulationState};
use super::schemes::{cfl_dt, step};
use super::{DtPolicy, SimulationError, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T> {
    pub grid: Grid1D<T>,
    pub stepper: Stepper<T>,
    pub initial: SimulationState<T>,
    pub t_end: T,
    /// Extra snapshot times in `(0, t_end)`; the initial and final states are always recorded.
    pub output_times: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub state: SimulationState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub steps: usize,
    /// `∫ F_left dt`, density entering through the left end.
    pub inflow: T,
    /// `∫ F_right dt`, density leaving through the right end.
    pub outflow: T,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &SimulationState<T> {
        &self.snapshots.last().expect("trajectory has a snapshot").state
    }
}

/// Time step for the current state under the stepper's policy.
pub fn choose_dt<T: Real>(stepper: &Stepper<T>, grid: &Grid1D<T>, state: &SimulationState<T>) -> T {
    match stepper.dt_policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::SpeedBound => grid.dx() / stepper.model.speed_bound(),
        DtPolicy::Cfl { target, dt_max } => {
            let dt = cfl_dt(state, grid, &stepper.model, target, dt_max);
            match stepper.model.tau() {
                Some(tau) if stepper.stiff_guard && tau < dt => dt.min(tau * T::half()),
                _ => dt,
            }
        }
    }
}

/// Integrates from `initial` to `t_end`, landing exactly on each output time.
pub fn run_simulation<T: Real>(config: &SimulationConfig<T>) -> Result<Trajectory<T>, SimulationError> {
    let mut state = config.initial.clone();
    let mut targets: Vec<T> = config
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > state.t && t < config.t_end)
        .collect();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.push(config.t_end);

    let mut traj = Trajectory {
        snapshots: vec![Snapshot {
            t: state.t,
            state: state.clone(),
        }],
        steps: 0,
        inflow: T::zero(),
        outflow: T::zero(),
    };
    // Remainders below this are rounding left over from a fixed step.
    let slack = T::lit(1e-9);
    for target in targets {
        while target - state.t > slack * target.abs().max(T::one()) {
            let mut dt = choose_dt(&config.stepper, &config.grid, &state);
            let remaining = target - state.t;
            if dt >= remaining * (T::one() - slack) {
                dt = remaining;
            }
            let (next, report) =
                step(&config.stepper, &config.grid, &state, dt).map_err(|source| SimulationError {
                    step: traj.steps,
                    t: state.t.to_f64().unwrap_or(f64::NAN),
                    source,
                })?;
            traj.inflow += report.left_flux * dt;
            traj.outflow += report.right_flux * dt;
            traj.steps += 1;
            state = next;
        }
        state.t = target;
        if target > traj.snapshots.last().unwrap().t {
            traj.snapshots.push(Snapshot {
                t: target,
                state: state.clone(),
            });
        }
    }
    Ok(traj)
}
