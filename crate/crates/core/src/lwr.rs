//! Exact Riemann solver for `ρ_t + f(ρ)_x = 0` with a concave flux.

use crate::diagrams::FundamentalDiagram;
use crate::num::Real;
use crate::roots;

/// Jumps smaller than this are treated as constant states.
pub const CONSTANT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRiemann<T> {
    pub rho_l: T,
    pub rho_r: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarWave<T> {
    Shock { speed: T },
    Rarefaction { lambda_l: T, lambda_r: T },
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarWaveSolution<T> {
    pub rho_l: T,
    pub rho_r: T,
    pub kind: ScalarWave<T>,
    /// State at `x/t = 0`.
    pub boundary_state: T,
    pub boundary_flux: T,
}

pub fn solve_riemann<T: Real>(
    problem: ScalarRiemann<T>,
    fd: &FundamentalDiagram<T>,
) -> Result<ScalarWaveSolution<T>, crate::diagrams::DiagramError> {
    let ScalarRiemann { rho_l, rho_r } = problem;
    fd.check(rho_l)?;
    fd.check(rho_r)?;
    Ok(solve_unchecked(rho_l, rho_r, fd))
}

pub(crate) fn solve_unchecked<T: Real>(
    rho_l: T,
    rho_r: T,
    fd: &FundamentalDiagram<T>,
) -> ScalarWaveSolution<T> {
    let (kind, star) = if (rho_l - rho_r).abs() < T::lit(CONSTANT_TOL) {
        (ScalarWave::Constant, rho_l)
    } else if rho_l < rho_r {
        let speed = (fd.flux(rho_r) - fd.flux(rho_l)) / (rho_r - rho_l);
        let star = if speed > T::zero() { rho_l } else { rho_r };
        (ScalarWave::Shock { speed }, star)
    } else {
        let lambda_l = fd.lambda(rho_l);
        let lambda_r = fd.lambda(rho_r);
        let star = if lambda_l >= T::zero() {
            rho_l
        } else if lambda_r <= T::zero() {
            rho_r
        } else {
            sonic(rho_r, rho_l, fd)
        };
        (ScalarWave::Rarefaction { lambda_l, lambda_r }, star)
    };
    ScalarWaveSolution {
        rho_l,
        rho_r,
        kind,
        boundary_state: star,
        boundary_flux: fd.flux(star),
    }
}

fn sonic<T: Real>(lo: T, hi: T, fd: &FundamentalDiagram<T>) -> T {
    let alpha = fd.critical_density();
    if alpha >= lo && alpha <= hi {
        return alpha;
    }
    roots::bracketed(|r| fd.lambda(r), lo, hi, T::zero()).unwrap_or(alpha)
}

/// Density on the ray `x/t = xi`.
pub fn sample_solution<T: Real>(
    sol: &ScalarWaveSolution<T>,
    xi: T,
    fd: &FundamentalDiagram<T>,
) -> T {
    match sol.kind {
        ScalarWave::Constant => sol.rho_l,
        ScalarWave::Shock { speed } => {
            if xi < speed {
                sol.rho_l
            } else {
                sol.rho_r
            }
        }
        ScalarWave::Rarefaction { lambda_l, lambda_r } => {
            if xi <= lambda_l {
                sol.rho_l
            } else if xi >= lambda_r {
                sol.rho_r
            } else {
                roots::bracketed(|r| fd.lambda(r) - xi, sol.rho_r, sol.rho_l, T::zero())
                    .unwrap_or(sol.rho_l)
            }
        }
    }
}

/// Sending flow of an upstream cell.
pub fn demand<T: Real>(rho: T, fd: &FundamentalDiagram<T>) -> T {
    if rho < fd.critical_density() {
        fd.flux(rho)
    } else {
        fd.capacity()
    }
}

/// Receiving flow of a downstream cell.
pub fn supply<T: Real>(rho: T, fd: &FundamentalDiagram<T>) -> T {
    if rho < fd.critical_density() {
        fd.capacity()
    } else {
        fd.flux(rho)
    }
}

/// Godunov flux as `min(demand, supply)`.
pub fn demand_supply_flux<T: Real>(rho_l: T, rho_r: T, fd: &FundamentalDiagram<T>) -> T {
    demand(rho_l, fd).min(supply(rho_r, fd))
}
