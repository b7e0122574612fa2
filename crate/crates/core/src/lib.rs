//! Macroscopic traffic flow: exact Riemann solvers, Godunov-type schemes,
//! refinement studies and a multi-commodity network simulator.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod diagrams;
pub mod num;
mod roots;

pub use num::Real;

pub type FundamentalDiagram = diagrams::FundamentalDiagram<f64>;
pub mod lwr;
pub mod resonant;
pub mod waves2nd;
pub mod godunov;
pub mod analysis;
pub mod network;
