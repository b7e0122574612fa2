use crate::lwr;
use crate::num::Real;
use crate::resonant::{self, ResonantState};
use crate::roots;
use crate::waves2nd::{ModelKind, ModelVariant, State2};

use super::grid::{CellState, Grid1D, SimulationState};
use super::{Model, Scheme, SourceTiming, StepError, Stepper};

/// Density fluxes through the two ends of the domain during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    pub dt: T,
    pub left_flux: T,
    pub right_flux: T,
}

/// Fastest characteristic speed over cells and the first ghost layer.
pub fn max_wave_speed<T: Real>(state: &SimulationState<T>, grid: &Grid1D<T>, model: &Model<T>) -> T {
    let ext = state.extended(&grid.bc, 1);
    ext.iter()
        .map(|c| match model {
            Model::Lwr(fd) => fd.lambda(c.rho).abs(),
            Model::Resonant(fd) => fd.lambda(c.rho / c.a).abs(),
            Model::SecondOrder(m) => {
                let u = State2::new(c.rho, c.v);
                m.lambda1(u).abs().max(m.lambda2(u).abs())
            }
        })
        .fold(T::zero(), T::max)
}

/// Largest `dt` keeping the CFL number at `target`, clamped to `dt_max`.
pub fn cfl_dt<T: Real>(
    state: &SimulationState<T>,
    grid: &Grid1D<T>,
    model: &Model<T>,
    target: T,
    dt_max: T,
) -> T {
    let s = max_wave_speed(state, grid, model);
    if s == T::zero() {
        return dt_max;
    }
    (target * grid.dx() / s).min(dt_max)
}

/// Van Leer limited slope of `w` from its two neighbours.
pub fn van_leer_slope<T: Real>(w_prev: T, w: T, w_next: T) -> T {
    let dp = w_next - w;
    let dm = w - w_prev;
    if dp * dm <= T::zero() {
        return T::zero();
    }
    let two = T::two();
    let dc = w_next - w_prev;
    dc.signum() * (two * dp.abs()).min(two * dm.abs()).min(T::half() * dc.abs())
}

/// Half-width `δ` of the standing-wave split `(ρ ± δ, m)` of a PW cell.
///
/// `δ` makes the momentum-flux jump inside the cell equal `k`, the integrated
/// relaxation source `((f*(ρ) − m)/τ) Δx`. It is the root of
/// `2c₀²δ³ − kδ² + (2m² − 2c₀²ρ²)δ + kρ² = 0` with `|δ| < ρ`, the smallest such
/// root when several exist.
pub fn leveque_standing_delta<T: Real>(rho: T, m: T, k: T, c0: T) -> Option<T> {
    if k == T::zero() {
        return Some(T::zero());
    }
    let two = T::two();
    let c2 = c0 * c0;
    let roots = roots::cubic_roots(two * c2, -k, two * m * m - two * c2 * rho * rho, k * rho * rho);
    let best = roots
        .into_iter()
        .filter(|d| d.is_finite() && d.abs() < rho)
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())?;
    // Newton polish on the defining flux balance.
    let balance = |d: T| momentum_flux(rho + d, m, c0) - momentum_flux(rho - d, m, c0) - k;
    let mut d = best;
    for _ in 0..4 {
        let h = T::lit(1e-7) * rho;
        let slope = (balance(d + h) - balance(d - h)) / (two * h);
        if slope == T::zero() {
            break;
        }
        let next = d - balance(d) / slope;
        if next.abs() >= rho || balance(next).abs() >= balance(d).abs() {
            break;
        }
        d = next;
    }
    Some(d)
}

fn momentum_flux<T: Real>(rho: T, m: T, c0: T) -> T {
    m * m / rho + c0 * c0 * rho
}

/// Flux vector of a second-order model at a boundary state.
fn flux2<T: Real>(model: &ModelVariant<T>, u: State2<T>) -> [T; 2] {
    match model.kind {
        ModelKind::Zhang => [u.rho * u.v, u.v * u.v * T::half() + model.phi(u.rho)],
        ModelKind::PayneWhitham { c0, .. } => {
            [u.rho * u.v, u.rho * u.v * u.v + c0 * c0 * u.rho]
        }
    }
}

fn state2<T: Real>(c: &CellState<T>) -> State2<T> {
    State2::new(c.rho, c.v)
}

/// First-order edge fluxes `F_0 .. F_n`; edge `e` is the left edge of cell `e`.
pub fn edge_fluxes_first_order<T: Real>(
    state: &SimulationState<T>,
    grid: &Grid1D<T>,
    model: &Model<T>,
) -> Result<Vec<[T; 2]>, StepError> {
    let ext = state.extended(&grid.bc, 1);
    let n = state.len();
    (0..=n)
        .map(|e| {
            let (l, r) = (&ext[e], &ext[e + 1]);
            match model {
                Model::Lwr(fd) => Ok([lwr::solve_unchecked(l.rho, r.rho, fd).boundary_flux, T::zero()]),
                Model::Resonant(fd) => Ok([
                    resonant::boundary_flux(
                        ResonantState::new(l.a, l.rho),
                        ResonantState::new(r.a, r.rho),
                        fd,
                    ),
                    T::zero(),
                ]),
                Model::SecondOrder(m) => m
                    .boundary_average(state2(l), state2(r))
                    .map(|u| flux2(m, u))
                    .map_err(|source| StepError::Riemann { edge: e, source }),
            }
        })
        .collect()
}

fn second_order_edges<T: Real>(
    m: &ModelVariant<T>,
    ext: &[CellState<T>],
    g: usize,
    n: usize,
    cauchy_dt: Option<T>,
) -> Result<(Vec<[T; 2]>, Vec<State2<T>>), StepError> {
    let mut fluxes = Vec::with_capacity(n + 1);
    let mut stars = Vec::with_capacity(n + 1);
    for e in 0..=n {
        let l = state2(&ext[e + g - 1]);
        let r = state2(&ext[e + g]);
        let u = match cauchy_dt {
            Some(dt) => m.pw_cauchy_boundary_average(l, r, dt),
            None => m.boundary_average(l, r),
        }
        .map_err(|source| StepError::Riemann { edge: e, source })?;
        fluxes.push(flux2(m, u));
        stars.push(u);
    }
    Ok((fluxes, stars))
}

/// Characteristic decomposition of the working variables at a frozen state.
struct CharBasis<T> {
    t: [[T; 2]; 2],
    t_inv: [[T; 2]; 2],
    lambda: [T; 2],
}

impl<T: Real> CharBasis<T> {
    fn at(m: &ModelVariant<T>, u: State2<T>, cell: usize) -> Result<Self, StepError> {
        let lambda = [m.lambda1(u), m.lambda2(u)];
        let one = T::one();
        let half = T::half();
        match m.kind {
            ModelKind::Zhang => {
                // Variables (ρ, v); eigenvectors (1, v*') and (1, −v*').
                let d = m.fd.dv(u.rho);
                if d == T::zero() || !d.is_finite() {
                    return Err(StepError::SingularTransform { cell });
                }
                Ok(Self {
                    t: [[one, one], [d, -d]],
                    t_inv: [[half, half / d], [half, -half / d]],
                    lambda,
                })
            }
            ModelKind::PayneWhitham { .. } => {
                // Variables (ρ, m); eigenvectors (1, λ1) and (1, λ2).
                let det = lambda[1] - lambda[0];
                if det == T::zero() {
                    return Err(StepError::SingularTransform { cell });
                }
                Ok(Self {
                    t: [[one, one], [lambda[0], lambda[1]]],
                    t_inv: [
                        [lambda[1] / det, -one / det],
                        [-lambda[0] / det, one / det],
                    ],
                    lambda,
                })
            }
        }
    }

    fn to_char(&self, q: [T; 2]) -> [T; 2] {
        [
            self.t_inv[0][0] * q[0] + self.t_inv[0][1] * q[1],
            self.t_inv[1][0] * q[0] + self.t_inv[1][1] * q[1],
        ]
    }

    fn from_char(&self, w: [T; 2]) -> [T; 2] {
        [
            self.t[0][0] * w[0] + self.t[0][1] * w[1],
            self.t[1][0] * w[0] + self.t[1][1] * w[1],
        ]
    }
}

fn working<T: Real>(m: &ModelVariant<T>, c: &CellState<T>) -> [T; 2] {
    match m.kind {
        ModelKind::Zhang => [c.rho, c.v],
        ModelKind::PayneWhitham { .. } => [c.rho, c.rho * c.v],
    }
}

fn from_working<T: Real>(m: &ModelVariant<T>, q: [T; 2], cell: usize) -> Result<State2<T>, StepError> {
    if !(q[0] > T::zero()) {
        return Err(StepError::NonPositiveDensity {
            cell,
            rho: q[0].to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(match m.kind {
        ModelKind::Zhang => State2::new(q[0], q[1]),
        ModelKind::PayneWhitham { .. } => State2::new(q[0], q[1] / q[0]),
    })
}

/// Predicted face states `(left face, right face)` of every extended cell that borders an edge.
fn muscl_faces<T: Real>(
    m: &ModelVariant<T>,
    ext: &[CellState<T>],
    n: usize,
    ratio: T,
) -> Result<Vec<(State2<T>, State2<T>)>, StepError> {
    let g = 2;
    let mut faces = Vec::with_capacity(ext.len());
    faces.push((state2(&ext[0]), state2(&ext[0])));
    for j in 1..=n + g {
        let cell = j.saturating_sub(g).min(n - 1);
        let basis = CharBasis::at(m, state2(&ext[j]), cell)?;
        let w_prev = basis.to_char(working(m, &ext[j - 1]));
        let w = basis.to_char(working(m, &ext[j]));
        let w_next = basis.to_char(working(m, &ext[j + 1]));
        let mut left = [T::zero(); 2];
        let mut right = [T::zero(); 2];
        for p in 0..2 {
            let slope = van_leer_slope(w_prev[p], w[p], w_next[p]);
            let nu = basis.lambda[p] * ratio;
            right[p] = w[p] + T::half() * (T::one() - nu) * slope;
            left[p] = w[p] - T::half() * (T::one() + nu) * slope;
        }
        faces.push((
            from_working(m, basis.from_char(left), cell)?,
            from_working(m, basis.from_char(right), cell)?,
        ));
    }
    Ok(faces)
}

/// Conservative update of a second-order model with the relaxation source treated per `timing`.
fn relax_update<T: Real>(
    m: &ModelVariant<T>,
    state: &SimulationState<T>,
    fluxes: &[[T; 2]],
    dt: T,
    dx: T,
    timing: SourceTiming,
    with_source: bool,
) -> Result<SimulationState<T>, StepError> {
    let n = state.len();
    let r = dt / dx;
    let q = if with_source { dt / m.tau } else { T::zero() };
    let mut rho = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let (rho0, v0) = (state.rho[i], state.v[i]);
        let rho1 = rho0 - r * (fluxes[i + 1][0] - fluxes[i][0]);
        if !(rho1 > T::zero()) {
            return Err(StepError::NonPositiveDensity {
                cell: i,
                rho: rho1.to_f64().unwrap_or(f64::NAN),
            });
        }
        let df = fluxes[i + 1][1] - fluxes[i][1];
        let v1 = match m.kind {
            ModelKind::Zhang => match timing {
                SourceTiming::Implicit => (v0 - r * df + q * m.fd.v(rho1)) / (T::one() + q),
                SourceTiming::Midpoint => {
                    let h = q * T::half();
                    let rho_mid = (rho0 + rho1) * T::half();
                    (v0 * (T::one() - h) - r * df + q * m.fd.v(rho_mid)) / (T::one() + h)
                }
            },
            ModelKind::PayneWhitham { .. } => {
                let m0 = rho0 * v0;
                let m1 = match timing {
                    SourceTiming::Implicit => (m0 - r * df + q * m.fd.flux(rho1)) / (T::one() + q),
                    SourceTiming::Midpoint => {
                        let h = q * T::half();
                        let rho_mid = (rho0 + rho1) * T::half();
                        (m0 * (T::one() - h) - r * df + q * m.fd.flux(rho_mid)) / (T::one() + h)
                    }
                };
                m1 / rho1
            }
        };
        rho.push(rho1);
        v.push(v1);
    }
    Ok(SimulationState {
        rho,
        v,
        lanes: Vec::new(),
        t: state.t + dt,
    })
}

/// Implicit relaxation of PW momentum over `dt` with the flux frozen out.
fn pw_relax<T: Real>(m: &ModelVariant<T>, state: &SimulationState<T>, dt: T) -> SimulationState<T> {
    let q = dt / m.tau;
    let v = state
        .rho
        .iter()
        .zip(&state.v)
        .map(|(&rho, &v)| (rho * v + q * m.fd.flux(rho)) / (T::one() + q) / rho)
        .collect();
    SimulationState {
        rho: state.rho.clone(),
        v,
        lanes: Vec::new(),
        t: state.t,
    }
}

fn scalar_update<T: Real>(state: &SimulationState<T>, fluxes: &[[T; 2]], dt: T, dx: T) -> SimulationState<T> {
    let r = dt / dx;
    let rho = (0..state.len())
        .map(|i| state.rho[i] - r * (fluxes[i + 1][0] - fluxes[i][0]))
        .collect();
    SimulationState {
        rho,
        v: state.v.clone(),
        lanes: state.lanes.clone(),
        t: state.t + dt,
    }
}

fn report<T: Real>(fluxes: &[[T; 2]], dt: T) -> StepReport<T> {
    StepReport {
        dt,
        left_flux: fluxes[0][0],
        right_flux: fluxes[fluxes.len() - 1][0],
    }
}

/// Advances `state` by `dt` with the stepper's scheme.
pub fn step<T: Real>(
    stepper: &Stepper<T>,
    grid: &Grid1D<T>,
    state: &SimulationState<T>,
    dt: T,
) -> Result<(SimulationState<T>, StepReport<T>), StepError> {
    let dx = grid.dx();
    let n = state.len();
    let model = &stepper.model;
    let cfl = max_wave_speed(state, grid, model) * dt / dx;
    if cfl > T::one() + T::lit(1e-12) {
        return Err(StepError::Cfl {
            cfl: cfl.to_f64().unwrap_or(f64::NAN),
        });
    }
    let unsupported = || StepError::Unsupported {
        scheme: stepper.scheme.name(),
    };
    match (model, stepper.scheme) {
        (Model::Lwr(_) | Model::Resonant(_), Scheme::FirstOrder) => {
            let fluxes = edge_fluxes_first_order(state, grid, model)?;
            Ok((scalar_update(state, &fluxes, dt, dx), report(&fluxes, dt)))
        }
        (Model::Lwr(_) | Model::Resonant(_), _) => Err(unsupported()),
        (Model::SecondOrder(m), Scheme::FirstOrder) => {
            let ext = state.extended(&grid.bc, 1);
            let (fluxes, _) = second_order_edges(m, &ext, 1, n, None)?;
            let next = relax_update(m, state, &fluxes, dt, dx, stepper.timing, true)?;
            Ok((next, report(&fluxes, dt)))
        }
        (Model::SecondOrder(m), Scheme::FirstOrderCauchy) => {
            if !model.is_pw() {
                return Err(unsupported());
            }
            let ext = state.extended(&grid.bc, 1);
            let (fluxes, _) = second_order_edges(m, &ext, 1, n, Some(dt))?;
            let next = relax_update(m, state, &fluxes, dt, dx, stepper.timing, true)?;
            Ok((next, report(&fluxes, dt)))
        }
        (Model::SecondOrder(m), Scheme::SecondOrder) => {
            let ext = state.extended(&grid.bc, 2);
            let faces = muscl_faces(m, &ext, n, dt / dx)?;
            let mut fluxes = Vec::with_capacity(n + 1);
            for e in 0..=n {
                // Edge e separates extended cells e+1 and e+2.
                let l = faces[e + 1].1;
                let r = faces[e + 2].0;
                let u = m
                    .boundary_average(l, r)
                    .map_err(|source| StepError::Riemann { edge: e, source })?;
                fluxes.push(flux2(m, u));
            }
            let next = relax_update(m, state, &fluxes, dt, dx, stepper.timing, true)?;
            Ok((next, report(&fluxes, dt)))
        }
        (Model::SecondOrder(m), Scheme::Pember) => {
            if !model.is_pw() {
                return Err(unsupported());
            }
            let ext = state.extended(&grid.bc, 1);
            let (fluxes, stars) = second_order_edges(m, &ext, 1, n, None)?;
            let r = dt / dx;
            let src = |u: State2<T>| (m.fd.flux(u.rho) - u.m()) / m.tau;
            let mut rho = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let rho1 = state.rho[i] - r * (fluxes[i + 1][0] - fluxes[i][0]);
                if !(rho1 > T::zero()) {
                    return Err(StepError::NonPositiveDensity {
                        cell: i,
                        rho: rho1.to_f64().unwrap_or(f64::NAN),
                    });
                }
                let s = T::half() * (src(stars[i]) + src(stars[i + 1]));
                let m1 = state.rho[i] * state.v[i] - r * (fluxes[i + 1][1] - fluxes[i][1]) + dt * s;
                rho.push(rho1);
                v.push(m1 / rho1);
            }
            let next = SimulationState {
                rho,
                v,
                lanes: Vec::new(),
                t: state.t + dt,
            };
            Ok((next, report(&fluxes, dt)))
        }
        (Model::SecondOrder(m), Scheme::Fractional) => {
            if !model.is_pw() {
                return Err(unsupported());
            }
            let half = dt * T::half();
            let first = pw_relax(m, state, half);
            let ext = first.extended(&grid.bc, 1);
            let (fluxes, _) = second_order_edges(m, &ext, 1, n, None)?;
            let mid = relax_update(m, &first, &fluxes, dt, dx, SourceTiming::Implicit, false)?;
            let mut next = pw_relax(m, &mid, half);
            next.t = state.t + dt;
            Ok((next, report(&fluxes, dt)))
        }
        (Model::SecondOrder(m), Scheme::LeVeque) => {
            let ModelKind::PayneWhitham { c0, .. } = m.kind else {
                return Err(unsupported());
            };
            let ext = state.extended(&grid.bc, 1);
            let mut plus = Vec::with_capacity(ext.len());
            let mut minus = Vec::with_capacity(ext.len());
            for (j, c) in ext.iter().enumerate() {
                let mom = c.rho * c.v;
                let k = (m.fd.flux(c.rho) - mom) / m.tau * dx;
                let cell = j.saturating_sub(1).min(n - 1);
                let d = leveque_standing_delta(c.rho, mom, k, c0)
                    .ok_or(StepError::NoAdmissibleRoot { cell })?;
                plus.push(State2::new(c.rho + d, mom / (c.rho + d)));
                minus.push(State2::new(c.rho - d, mom / (c.rho - d)));
            }
            let mut fluxes = Vec::with_capacity(n + 1);
            for e in 0..=n {
                let u = m
                    .boundary_average(plus[e], minus[e + 1])
                    .map_err(|source| StepError::Riemann { edge: e, source })?;
                fluxes.push(flux2(m, u));
            }
            let r = dt / dx;
            let mut rho = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let fp = flux2(m, plus[i + 1]);
                let fm = flux2(m, minus[i + 1]);
                let rho1 = state.rho[i] - r * (fluxes[i + 1][0] - fp[0] + fm[0] - fluxes[i][0]);
                if !(rho1 > T::zero()) {
                    return Err(StepError::NonPositiveDensity {
                        cell: i,
                        rho: rho1.to_f64().unwrap_or(f64::NAN),
                    });
                }
                let m1 = state.rho[i] * state.v[i]
                    - r * (fluxes[i + 1][1] - fp[1] + fm[1] - fluxes[i][1]);
                rho.push(rho1);
                v.push(m1 / rho1);
            }
            let next = SimulationState {
                rho,
                v,
                lanes: Vec::new(),
                t: state.t + dt,
            };
            Ok((next, report(&fluxes, dt)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_leer_cases() {
        assert_eq!(van_leer_slope(1.0, 0.0, 1.0), 0.0);
        assert_eq!(van_leer_slope(1.0, 2.0, 3.0), 1.0);
        assert_eq!(van_leer_slope(0.0, 1.0, 10.0), 2.0);
    }

    #[test]
    fn standing_delta_balances_source() {
        let c0: f64 = 2.48445;
        let (rho, m): (f64, f64) = (0.16, 0.16 * 3.0);
        for &k in &[0.0, 1e-3, -1e-3, 0.05] {
            let d = leveque_standing_delta(rho, m, k, c0).unwrap();
            let jump = momentum_flux(rho + d, m, c0) - momentum_flux(rho - d, m, c0);
            assert!((jump - k).abs() < 1e-10, "k={k} jump={jump}");
            assert!(d.abs() < rho);
        }
    }
}
