use crate::num::Real;

use super::StepError;

/// State of one cell. `v` is unused by scalar models and `a` by all but the resonant model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState<T> {
    pub rho: T,
    pub v: T,
    pub a: T,
}

impl<T: Real> CellState<T> {
    pub fn new(rho: T, v: T) -> Self {
        Self {
            rho,
            v,
            a: T::one(),
        }
    }

    pub fn with_lanes(rho: T, a: T) -> Self {
        Self {
            rho,
            v: T::zero(),
            a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary<T> {
    /// Ghost cells copy the end cells.
    Neumann,
    Periodic,
    /// Ghost cells hold fixed states; edge fluxes are still Riemann fluxes.
    Dirichlet { left: CellState<T>, right: CellState<T> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    pub x_min: T,
    pub x_max: T,
    pub n_cells: usize,
    pub bc: Boundary<T>,
}

impl<T: Real> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n_cells: usize, bc: Boundary<T>) -> Result<Self, StepError> {
        if n_cells < 2 {
            return Err(StepError::InvalidGrid("at least two cells are required"));
        }
        if !(x_max > x_min) {
            return Err(StepError::InvalidGrid("x_max must exceed x_min"));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            bc,
        })
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize(self.n_cells).unwrap()
    }

    pub fn center(&self, i: usize) -> T {
        self.x_min + (T::from_usize(i).unwrap() + T::half()) * self.dx()
    }

    pub fn with_cells(&self, n_cells: usize) -> Self {
        Self { n_cells, ..*self }
    }
}

/// Cell averages at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState<T> {
    pub rho: Vec<T>,
    /// Speeds for second-order models, empty otherwise.
    pub v: Vec<T>,
    /// Lane counts for the resonant model, empty otherwise.
    pub lanes: Vec<T>,
    pub t: T,
}

impl<T: Real> SimulationState<T> {
    pub fn scalar(rho: Vec<T>) -> Self {
        Self {
            rho,
            v: Vec::new(),
            lanes: Vec::new(),
            t: T::zero(),
        }
    }

    pub fn second_order(rho: Vec<T>, v: Vec<T>) -> Self {
        Self {
            rho,
            v,
            lanes: Vec::new(),
            t: T::zero(),
        }
    }

    pub fn resonant(rho: Vec<T>, lanes: Vec<T>) -> Self {
        Self {
            rho,
            v: Vec::new(),
            lanes,
            t: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn cell(&self, i: usize) -> CellState<T> {
        CellState {
            rho: self.rho[i],
            v: self.v.get(i).copied().unwrap_or_else(T::zero),
            a: self.lanes.get(i).copied().unwrap_or_else(T::one),
        }
    }

    /// Cells padded with `g` ghost layers on each side.
    pub(crate) fn extended(&self, bc: &Boundary<T>, g: usize) -> Vec<CellState<T>> {
        let n = self.len();
        let mut out = Vec::with_capacity(n + 2 * g);
        for k in (1..=g).rev() {
            out.push(match bc {
                Boundary::Neumann => self.cell(0),
                Boundary::Periodic => self.cell((n * g + n - k) % n),
                Boundary::Dirichlet { left, .. } => *left,
            });
        }
        out.extend((0..n).map(|i| self.cell(i)));
        for k in 0..g {
            out.push(match bc {
                Boundary::Neumann => self.cell(n - 1),
                Boundary::Periodic => self.cell(k % n),
                Boundary::Dirichlet { right, .. } => *right,
            });
        }
        out
    }

    /// Total mass `Σ ρ_i dx`.
    pub fn mass(&self, dx: T) -> T {
        self.rho.iter().copied().sum::<T>() * dx
    }
}
