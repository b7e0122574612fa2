//! Riemann solver for the lane-inhomogeneous LWR system.
//!
//! The state is `U = (a, ρ)` with `a` the (static) number of lanes and
//! `f(a, ρ) = a f₁(ρ/a)` where `f₁` is the single-lane diagram. The transition
//! curve `ρ/a = α` separates undercritical from overcritical states; a standing
//! wave at `x = 0` connects states with equal flow on the same side of it.
//!
//! [`classify`] returns one of ten solution types with its intermediate states
//! and wave fan; [`boundary_flux`] is the equivalent `min(demand, supply)` rule.

use thiserror::Error;

use crate::diagrams::FundamentalDiagram;
use crate::num::Real;
use crate::roots;

/// Per-lane density ratios within this distance of `α` count as critical.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResonantError {
    #[error("invalid state: lanes {a}, density {rho}")]
    InvalidState { a: f64, rho: f64 },
    #[error("no state with flow {target} on the {branch} branch for {a} lanes")]
    NoRoot {
        a: f64,
        target: f64,
        branch: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantState<T> {
    pub a: T,
    pub rho: T,
}

impl<T: Real> ResonantState<T> {
    pub fn new(a: T, rho: T) -> Self {
        Self { a, rho }
    }

    pub fn ratio(&self) -> T {
        self.rho / self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResonantWave<T> {
    Standing,
    Shock { speed: T },
    /// Fan between the head and tail characteristic speeds.
    Rarefaction { tail: T, head: T },
}

impl<T: Real> ResonantWave<T> {
    pub fn min_speed(&self) -> T {
        match *self {
            ResonantWave::Standing => T::zero(),
            ResonantWave::Shock { speed } => speed,
            ResonantWave::Rarefaction { tail, .. } => tail,
        }
    }

    pub fn max_speed(&self) -> T {
        match *self {
            ResonantWave::Standing => T::zero(),
            ResonantWave::Shock { speed } => speed,
            ResonantWave::Rarefaction { head, .. } => head,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonantSolution<T> {
    pub case_id: u8,
    pub intermediates: Vec<ResonantState<T>>,
    /// Waves left to right, each paired with the state on its right.
    pub waves: Vec<(ResonantWave<T>, ResonantState<T>)>,
    pub boundary_flux: T,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Branch {
    Under,
    Over,
}

/// Total flow `a f₁(ρ/a)`.
pub fn flow<T: Real>(u: ResonantState<T>, fd: &FundamentalDiagram<T>) -> T {
    u.a * fd.flux(u.ratio())
}

/// Capacity `a f₁(α)` of an `a`-lane section.
pub fn capacity<T: Real>(a: T, fd: &FundamentalDiagram<T>) -> T {
    a * fd.capacity()
}

fn is_under<T: Real>(u: ResonantState<T>, fd: &FundamentalDiagram<T>) -> bool {
    u.ratio() < fd.critical_density() - T::lit(CRITICAL_TOL)
}

pub fn demand<T: Real>(u: ResonantState<T>, fd: &FundamentalDiagram<T>) -> T {
    if is_under(u, fd) {
        flow(u, fd)
    } else {
        capacity(u.a, fd)
    }
}

pub fn supply<T: Real>(u: ResonantState<T>, fd: &FundamentalDiagram<T>) -> T {
    if is_under(u, fd) {
        capacity(u.a, fd)
    } else {
        flow(u, fd)
    }
}

/// Boundary flow `min(demand(U_L), supply(U_R))`.
pub fn boundary_flux<T: Real>(
    ul: ResonantState<T>,
    ur: ResonantState<T>,
    fd: &FundamentalDiagram<T>,
) -> T {
    demand(ul, fd).min(supply(ur, fd))
}

fn validate<T: Real>(u: ResonantState<T>, fd: &FundamentalDiagram<T>) -> Result<(), ResonantError> {
    if u.a > T::zero() && fd.check(u.ratio()).is_ok() {
        Ok(())
    } else {
        Err(ResonantError::InvalidState {
            a: u.a.to_f64().unwrap_or(f64::NAN),
            rho: u.rho.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// State with `a` lanes and total flow `target` on the requested side of the transition curve.
fn state_with_flow<T: Real>(
    a: T,
    target: T,
    branch: Branch,
    fd: &FundamentalDiagram<T>,
) -> Result<ResonantState<T>, ResonantError> {
    let alpha = fd.critical_density();
    let per_lane = target / a;
    let cap = fd.capacity();
    let err = || ResonantError::NoRoot {
        a: a.to_f64().unwrap_or(f64::NAN),
        target: target.to_f64().unwrap_or(f64::NAN),
        branch: match branch {
            Branch::Under => "undercritical",
            Branch::Over => "overcritical",
        },
    };
    if per_lane > cap {
        // Flows equal to capacity up to rounding sit on the transition curve.
        if per_lane - cap <= T::lit(8.0) * T::epsilon() * cap.abs() {
            return Ok(ResonantState::new(a, a * alpha));
        }
        return Err(err());
    }
    let (lo, hi) = match branch {
        Branch::Under => (T::zero(), alpha),
        Branch::Over => (alpha, fd.rho_max()),
    };
    let r = roots::bracketed(|r| fd.flux(r) - per_lane, lo, hi, T::zero()).map_err(|_| err())?;
    Ok(ResonantState::new(a, a * r))
}

fn wave_between<T: Real>(
    left: ResonantState<T>,
    right: ResonantState<T>,
    fd: &FundamentalDiagram<T>,
) -> ResonantWave<T> {
    // Same lane count: an ordinary LWR wave on the per-lane diagram.
    let rl = left.ratio();
    let rr = right.ratio();
    if rl < rr || (rl - rr).abs() < T::lit(1e-14) {
        let speed = if (rr - rl).abs() < T::lit(1e-14) {
            fd.lambda(rl)
        } else {
            (fd.flux(rr) - fd.flux(rl)) / (rr - rl)
        };
        ResonantWave::Shock { speed }
    } else {
        ResonantWave::Rarefaction {
            tail: fd.lambda(rl),
            head: fd.lambda(rr),
        }
    }
}

/// Classifies the Riemann problem into one of the ten solution types.
pub fn classify<T: Real>(
    ul: ResonantState<T>,
    ur: ResonantState<T>,
    fd: &FundamentalDiagram<T>,
) -> Result<ResonantSolution<T>, ResonantError> {
    validate(ul, fd)?;
    validate(ur, fd)?;
    let alpha = fd.critical_density();
    let f_l = flow(ul, fd);
    let f_r = flow(ur, fd);
    let cap_l = capacity(ul.a, fd);
    let cap_r = capacity(ur.a, fd);
    // A right state on the transition curve counts as overcritical, a left one as undercritical.
    let right_under = is_under(ur, fd);
    let left_under = ul.ratio() <= alpha + T::lit(CRITICAL_TOL);

    let (case_id, intermediates) = if left_under {
        // Critical point on the standing wave through U_L.
        let a_star = f_l / fd.capacity();
        if f_r >= f_l {
            let u1 = state_with_flow(ur.a, f_l, Branch::Under, fd)?;
            (2, vec![u1])
        } else if !right_under {
            let u1 = state_with_flow(ul.a, f_r, Branch::Over, fd)?;
            (3, vec![u1])
        } else if ur.a >= a_star {
            let u1 = state_with_flow(ur.a, f_l, Branch::Under, fd)?;
            (1, vec![u1])
        } else {
            let u2 = ResonantState::new(ur.a, ur.a * alpha);
            let u1 = state_with_flow(ul.a, cap_r, Branch::Over, fd)?;
            (4, vec![u1, u2])
        }
    } else {
        let u_star = ResonantState::new(ul.a, ul.a * alpha);
        if f_r >= cap_l {
            let u2 = state_with_flow(ur.a, cap_l, Branch::Under, fd)?;
            (6, vec![u_star, u2])
        } else if !right_under {
            let u1 = state_with_flow(ul.a, f_r, Branch::Over, fd)?;
            (if f_r >= f_l { 7 } else { 8 }, vec![u1])
        } else if ur.a >= ul.a {
            let u2 = state_with_flow(ur.a, cap_l, Branch::Under, fd)?;
            (5, vec![u_star, u2])
        } else {
            let u2 = ResonantState::new(ur.a, ur.a * alpha);
            let u1 = state_with_flow(ul.a, cap_r, Branch::Over, fd)?;
            (if f_r >= f_l { 9 } else { 10 }, vec![u1, u2])
        }
    };

    let boundary_flux = match case_id {
        1 | 2 => f_l,
        3 | 7 | 8 => f_r,
        4 | 9 | 10 => cap_r,
        _ => cap_l,
    };

    // The standing wave sits where the lane count changes: first for types 1-2,
    // second for all others. The remaining links are LWR waves at fixed lane count.
    let standing_at = if case_id <= 2 { 0 } else { 1 };
    let mut chain = vec![ul];
    chain.extend(intermediates.iter().copied());
    chain.push(ur);
    let waves = chain
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let wave = if i == standing_at {
                ResonantWave::Standing
            } else {
                wave_between(pair[0], pair[1], fd)
            };
            (wave, pair[1])
        })
        .collect();

    Ok(ResonantSolution {
        case_id,
        intermediates,
        waves,
        boundary_flux,
    })
}
