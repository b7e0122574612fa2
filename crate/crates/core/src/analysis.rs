//! Grid self-convergence: error vectors between successive refinements, their
//! norms, observed rates and a refinement-based stability verdict.
//!
//! Norms are per-cell means so errors on different grids are comparable.

use std::thread;

use thiserror::Error;

use crate::godunov::SimulationState;
use crate::num::Real;

/// Fraction of the coarse-pair error the fine-pair error must stay under to count as decreasing.
pub const STABILITY_BAND: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("fine grid has {fine} cells, expected twice {coarse}")]
    LengthMismatch { fine: usize, coarse: usize },
    #[error("empty error vector")]
    Empty,
    #[error("errors must be positive, got {coarse} and {fine}")]
    NonPositive { coarse: f64, fine: f64 },
    #[error("need at least three grid sizes, got {0}")]
    TooFewGrids(usize),
    #[error("run on {n} cells failed: {message}")]
    Run { n: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

    pub fn name(&self) -> &'static str {
        match self {
            NormKind::L1 => "L1",
            NormKind::L2 => "L2",
            NormKind::Linf => "Linf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Rho,
    V,
}

impl Field {
    pub fn name(&self) -> &'static str {
        match self {
            Field::Rho => "rho",
            Field::V => "v",
        }
    }

    pub fn of<'a, T>(&self, state: &'a SimulationState<T>) -> &'a [T] {
        match self {
            Field::Rho => &state.rho,
            Field::V => &state.v,
        }
    }
}

/// Pair-averaged fine values minus coarse values.
pub fn coarsen_diff<T: Real>(fine: &[T], coarse: &[T]) -> Result<Vec<T>, AnalysisError> {
    if fine.len() != 2 * coarse.len() {
        return Err(AnalysisError::LengthMismatch {
            fine: fine.len(),
            coarse: coarse.len(),
        });
    }
    Ok(coarse
        .iter()
        .zip(fine.chunks_exact(2))
        .map(|(&c, pair)| (pair[0] + pair[1]) * T::half() - c)
        .collect())
}

pub fn norm<T: Real>(e: &[T], kind: NormKind) -> Result<T, AnalysisError> {
    if e.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = T::from_usize(e.len()).unwrap();
    Ok(match kind {
        NormKind::L1 => e.iter().map(|x| x.abs()).sum::<T>() / n,
        NormKind::L2 => (e.iter().map(|x| *x * *x).sum::<T>() / n).sqrt(),
        NormKind::Linf => e.iter().fold(T::zero(), |m, x| m.max(x.abs())),
    })
}

/// `log₂(eps_coarse / eps_fine)`.
pub fn convergence_rate<T: Real>(eps_coarse: T, eps_fine: T) -> Result<T, AnalysisError> {
    if !(eps_coarse > T::zero() && eps_fine > T::zero()) {
        return Err(AnalysisError::NonPositive {
            coarse: eps_coarse.to_f64().unwrap_or(f64::NAN),
            fine: eps_fine.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((eps_coarse / eps_fine).log2())
}

/// Error between the runs on `n_coarse` and `2·n_coarse` cells, and the rate
/// against the previous (coarser) pair when both errors are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEntry<T> {
    pub n_coarse: usize,
    pub field: Field,
    pub kind: NormKind,
    pub error: T,
    pub rate: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub sizes: Vec<usize>,
    pub entries: Vec<ConvergenceEntry<T>>,
}

impl<T: Real> ConvergenceReport<T> {
    pub fn errors(&self, field: Field, kind: NormKind) -> Vec<T> {
        self.select(field, kind).map(|e| e.error).collect()
    }

    pub fn rates(&self, field: Field, kind: NormKind) -> Vec<T> {
        self.select(field, kind).filter_map(|e| e.rate).collect()
    }

    fn select(&self, field: Field, kind: NormKind) -> impl Iterator<Item = &ConvergenceEntry<T>> {
        self.entries
            .iter()
            .filter(move |e| e.field == field && e.kind == kind)
    }
}

/// Runs `run` on every size concurrently; each size must double the previous one.
pub fn run_all<T, F, E>(sizes: &[usize], run: F) -> Result<Vec<SimulationState<T>>, AnalysisError>
where
    T: Real,
    F: Fn(usize) -> Result<SimulationState<T>, E> + Sync,
    E: std::fmt::Display,
{
    for w in sizes.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(AnalysisError::LengthMismatch {
                fine: w[1],
                coarse: w[0],
            });
        }
    }
    thread::scope(|s| {
        let handles: Vec<_> = sizes
            .iter()
            .map(|&n| {
                let run = &run;
                s.spawn(move || {
                    run(n).map_err(|e| AnalysisError::Run {
                        n,
                        message: e.to_string(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Self-convergence study over doubling `sizes` for the requested fields.
pub fn convergence_study<T, F, E>(
    sizes: &[usize],
    fields: &[Field],
    run: F,
) -> Result<ConvergenceReport<T>, AnalysisError>
where
    T: Real,
    F: Fn(usize) -> Result<SimulationState<T>, E> + Sync,
    E: std::fmt::Display,
{
    let states = run_all(sizes, run)?;
    report_from_states(sizes, &states, fields)
}

/// Builds the report from finished runs, `states[i]` on `sizes[i]` cells.
pub fn report_from_states<T: Real>(
    sizes: &[usize],
    states: &[SimulationState<T>],
    fields: &[Field],
) -> Result<ConvergenceReport<T>, AnalysisError> {
    let mut entries = Vec::new();
    for &field in fields {
        for kind in NormKind::ALL {
            let mut prev: Option<T> = None;
            for (i, pair) in states.windows(2).enumerate() {
                let e = coarsen_diff(field.of(&pair[1]), field.of(&pair[0]))?;
                let error = norm(&e, kind)?;
                let rate = prev.and_then(|p| convergence_rate(p, error).ok());
                entries.push(ConvergenceEntry {
                    n_coarse: sizes[i],
                    field,
                    kind,
                    error,
                    rate,
                });
                prev = Some(error);
            }
        }
    }
    Ok(ConvergenceReport {
        sizes: sizes.to_vec(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub verdict: Verdict,
    pub sizes: Vec<usize>,
    /// L1 density errors of successive refinement pairs, coarsest first.
    pub errors: Vec<T>,
    pub band: f64,
}

/// Stable iff every refinement pair's L1 density error is at most `band` times the previous one.
pub fn stability_probe<T, F, E>(sizes: &[usize], run: F) -> Result<StabilityReport<T>, AnalysisError>
where
    T: Real,
    F: Fn(usize) -> Result<SimulationState<T>, E> + Sync,
    E: std::fmt::Display,
{
    if sizes.len() < 3 {
        return Err(AnalysisError::TooFewGrids(sizes.len()));
    }
    let report = convergence_study(sizes, &[Field::Rho], run)?;
    let errors = report.errors(Field::Rho, NormKind::L1);
    let band = T::lit(STABILITY_BAND);
    let decreasing = errors.windows(2).all(|w| w[1] <= band * w[0]);
    Ok(StabilityReport {
        verdict: if decreasing {
            Verdict::Stable
        } else {
            Verdict::Unstable
        },
        sizes: sizes.to_vec(),
        errors,
        band: STABILITY_BAND,
    })
}
