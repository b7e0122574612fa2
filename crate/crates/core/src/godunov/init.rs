use crate::num::Real;

use super::grid::{Grid1D, SimulationState};
use super::Model;

/// Initial profile, sampled at cell centres.
///
/// Densities are per lane. Speeds left as `None` take the equilibrium value
/// `v*(ρ)`; scalar models ignore speeds.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition<T> {
    Constant {
        rho: T,
        v: Option<T>,
    },
    /// `left` for `x < x0`, `right` otherwise.
    Jump {
        x0: T,
        left: (T, Option<T>),
        right: (T, Option<T>),
    },
    /// `ρ = base + amplitude·sin(2πx/period)`, `v = v*(ρ) + speed_offset`.
    SineWave {
        base: T,
        amplitude: T,
        period: T,
        speed_offset: T,
    },
    /// `ρ = ρ_h + amplitude·sin(2πx/period)`, `v = v*(ρ_h) − amplitude·cos(2πx/period)`.
    GlobalPerturbation {
        rho_h: T,
        amplitude: T,
        period: T,
    },
    /// A hump of `+delta` on `hump` followed by a dip of `−delta/3` on `dip`, equilibrium speeds.
    LocalPerturbation {
        rho_h: T,
        delta: T,
        hump: (T, T),
        dip: (T, T),
    },
    /// Pieces `(x_end, ρ, v)`; a cell takes the first piece whose `x_end` exceeds its centre.
    Piecewise(Vec<(T, T, Option<T>)>),
}

impl<T: Real> InitialCondition<T> {
    /// Sine data used for the Zhang convergence study on `[0, 800]`.
    pub fn zhang_sine() -> Self {
        InitialCondition::SineWave {
            base: T::lit(0.65),
            amplitude: T::lit(0.25),
            period: T::lit(800.0),
            speed_offset: T::lit(0.1),
        }
    }

    pub fn global_perturbation(rho_h: T) -> Self {
        InitialCondition::GlobalPerturbation {
            rho_h,
            amplitude: T::lit(0.02),
            period: T::lit(800.0),
        }
    }

    pub fn local_perturbation(rho_h: T) -> Self {
        InitialCondition::LocalPerturbation {
            rho_h,
            delta: T::lit(0.02),
            hump: (T::lit(37.5), T::lit(48.4)),
            dip: (T::lit(50.0), T::lit(82.8)),
        }
    }

    /// `(ρ, v)` at position `x`.
    pub fn sample(&self, x: T, model: &Model<T>) -> (T, T) {
        let fd = model.diagram();
        let eq = |rho: T, v: Option<T>| (rho, v.unwrap_or_else(|| fd.v(rho)));
        let two_pi = T::two() * T::PI();
        match self {
            InitialCondition::Constant { rho, v } => eq(*rho, *v),
            InitialCondition::Jump { x0, left, right } => {
                if x < *x0 {
                    eq(left.0, left.1)
                } else {
                    eq(right.0, right.1)
                }
            }
            InitialCondition::SineWave {
                base,
                amplitude,
                period,
                speed_offset,
            } => {
                let rho = *base + *amplitude * (two_pi * x / *period).sin();
                (rho, fd.v(rho) + *speed_offset)
            }
            InitialCondition::GlobalPerturbation {
                rho_h,
                amplitude,
                period,
            } => {
                let phase = two_pi * x / *period;
                (
                    *rho_h + *amplitude * phase.sin(),
                    fd.v(*rho_h) - *amplitude * phase.cos(),
                )
            }
            InitialCondition::LocalPerturbation {
                rho_h,
                delta,
                hump,
                dip,
            } => {
                let rho = if x >= hump.0 && x <= hump.1 {
                    *rho_h + *delta
                } else if x >= dip.0 && x <= dip.1 {
                    *rho_h - *delta / T::lit(3.0)
                } else {
                    *rho_h
                };
                eq(rho, None)
            }
            InitialCondition::Piecewise(pieces) => {
                let piece = pieces
                    .iter()
                    .find(|p| x < p.0)
                    .or(pieces.last())
                    .expect("piecewise profile has at least one piece");
                eq(piece.1, piece.2)
            }
        }
    }

    /// Cell-centre samples on `grid`, with one lane per cell.
    pub fn build(&self, grid: &Grid1D<T>, model: &Model<T>) -> SimulationState<T> {
        self.build_with_lanes(grid, model, |_| T::one())
    }

    /// Cell-centre samples with lane counts from `lanes(x)`. Resonant densities are
    /// stored as totals over lanes.
    pub fn build_with_lanes(
        &self,
        grid: &Grid1D<T>,
        model: &Model<T>,
        lanes: impl Fn(T) -> T,
    ) -> SimulationState<T> {
        let samples: Vec<(T, T, T)> = (0..grid.n_cells)
            .map(|i| {
                let x = grid.center(i);
                let (rho, v) = self.sample(x, model);
                (rho, v, lanes(x))
            })
            .collect();
        match model {
            Model::Lwr(_) => SimulationState::scalar(samples.iter().map(|s| s.0).collect()),
            Model::Resonant(_) => SimulationState::resonant(
                samples.iter().map(|s| s.0 * s.2).collect(),
                samples.iter().map(|s| s.2).collect(),
            ),
            Model::SecondOrder(_) => SimulationState::second_order(
                samples.iter().map(|s| s.0).collect(),
                samples.iter().map(|s| s.1).collect(),
            ),
        }
    }
}
