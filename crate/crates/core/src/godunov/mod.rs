//! Finite-volume time stepping on a uniform 1-D grid.
//!
//! Every scheme is written in conservation form with edge fluxes taken from
//! the exact Riemann solvers of [`crate::lwr`], [`crate::resonant`] and
//! [`crate::waves2nd`]. The second-order models relax toward equilibrium;
//! the relaxation is implicit unless a source-term variant is selected.

mod grid;
mod init;
mod run;
mod schemes;

use thiserror::Error;

use crate::diagrams::FundamentalDiagram;
use crate::num::Real;
use crate::resonant::ResonantError;
use crate::waves2nd::{ModelKind, ModelVariant, RiemannError};

pub use grid::{Boundary, CellState, Grid1D, SimulationState};
pub use init::InitialCondition;
pub use run::{choose_dt, run_simulation, SimulationConfig, Snapshot, Trajectory};
pub use schemes::{
    cfl_dt, edge_fluxes_first_order, leveque_standing_delta, max_wave_speed, step, van_leer_slope,
    StepReport,
};

/// Evolution equations being solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model<T> {
    /// `ρ_t + f*(ρ)_x = 0`.
    Lwr(FundamentalDiagram<T>),
    /// Lane-inhomogeneous LWR; the diagram is per lane.
    Resonant(FundamentalDiagram<T>),
    /// Zhang or Payne–Whitham.
    SecondOrder(ModelVariant<T>),
}

impl<T: Real> Model<T> {
    pub fn diagram(&self) -> &FundamentalDiagram<T> {
        match self {
            Model::Lwr(fd) | Model::Resonant(fd) => fd,
            Model::SecondOrder(m) => &m.fd,
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self, Model::SecondOrder(_))
    }

    pub fn is_pw(&self) -> bool {
        matches!(
            self,
            Model::SecondOrder(ModelVariant {
                kind: ModelKind::PayneWhitham { .. },
                ..
            })
        )
    }

    /// Upper bound on characteristic speeds over the equilibrium range:
    /// `max v* + c₀` for PW, `max v* + max ρ|v*'|` for Zhang, `max |λ*|` for scalar models.
    pub fn speed_bound(&self) -> T {
        let fd = self.diagram();
        let samples = 4000;
        let rho_at = |i: usize| fd.rho_max() * T::from_usize(i).unwrap() / T::from_usize(samples).unwrap();
        let lo = if fd.check(T::zero()).is_ok() { 0 } else { 1 };
        match self {
            Model::Lwr(_) | Model::Resonant(_) => (lo..=samples)
                .map(|i| fd.lambda(rho_at(i)).abs())
                .fold(T::zero(), T::max),
            Model::SecondOrder(m) => {
                let v_max = (lo..=samples).map(|i| fd.v(rho_at(i))).fold(T::zero(), T::max);
                let spread = match m.kind {
                    ModelKind::PayneWhitham { c0, .. } => c0,
                    ModelKind::Zhang => (lo.max(1)..=samples)
                        .map(|i| {
                            let r = rho_at(i);
                            (r * fd.dv(r)).abs()
                        })
                        .fold(T::zero(), T::max),
                };
                v_max + spread
            }
        }
    }

    /// Relaxation time, if the model has one.
    pub fn tau(&self) -> Option<T> {
        match self {
            Model::SecondOrder(m) => Some(m.tau),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    FirstOrder,
    /// First order with the parabolic-characteristic boundary state (PW only).
    FirstOrderCauchy,
    SecondOrder,
    Pember,
    Fractional,
    LeVeque,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::FirstOrder => "first-order",
            Scheme::FirstOrderCauchy => "first-order-cauchy",
            Scheme::SecondOrder => "second-order",
            Scheme::Pember => "pember",
            Scheme::Fractional => "fractional",
            Scheme::LeVeque => "leveque",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Scheme::FirstOrder,
            Scheme::FirstOrderCauchy,
            Scheme::SecondOrder,
            Scheme::Pember,
            Scheme::Fractional,
            Scheme::LeVeque,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

/// Time level at which the relaxation source is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceTiming {
    /// At `t_{n+1}`.
    #[default]
    Implicit,
    /// At the average of the old and new states.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy<T> {
    /// Largest step with CFL number at most `target`, capped at `dt_max`.
    Cfl { target: T, dt_max: T },
    Fixed(T),
    /// `dx` divided by [`Model::speed_bound`], fixed for the whole run.
    SpeedBound,
}

impl<T: Real> Default for DtPolicy<T> {
    fn default() -> Self {
        DtPolicy::Cfl {
            target: T::lit(0.9),
            dt_max: T::infinity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper<T> {
    pub model: Model<T>,
    pub scheme: Scheme,
    pub timing: SourceTiming,
    pub dt_policy: DtPolicy<T>,
    /// Shrink the CFL step to `τ/2` when it exceeds `τ`.
    pub stiff_guard: bool,
}

impl<T: Real> Stepper<T> {
    pub fn new(model: Model<T>, scheme: Scheme) -> Self {
        Self {
            model,
            scheme,
            timing: SourceTiming::default(),
            dt_policy: DtPolicy::default(),
            stiff_guard: true,
        }
    }

    pub fn with_dt(mut self, policy: DtPolicy<T>) -> Self {
        self.dt_policy = policy;
        self
    }

    pub fn with_timing(mut self, timing: SourceTiming) -> Self {
        self.timing = timing;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("Riemann problem at edge {edge}: {source}")]
    Riemann {
        edge: usize,
        #[source]
        source: RiemannError,
    },
    #[error("resonant Riemann problem at edge {edge}: {source}")]
    Resonant {
        edge: usize,
        #[source]
        source: ResonantError,
    },
    #[error("CFL number {cfl} exceeds 1")]
    Cfl { cfl: f64 },
    #[error("singular characteristic transform in cell {cell}")]
    SingularTransform { cell: usize },
    #[error("no admissible standing-wave split in cell {cell}")]
    NoAdmissibleRoot { cell: usize },
    #[error("non-positive density {rho} in cell {cell}")]
    NonPositiveDensity { cell: usize, rho: f64 },
    #[error("scheme {scheme} does not apply to this model")]
    Unsupported { scheme: &'static str },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {step} (t = {t}): {source}")]
pub struct SimulationError {
    pub step: usize,
    pub t: f64,
    #[source]
    pub source: StepError,
}
