//! Pseudo-spectral solvers for the fractional Camassa-Holm equation and its
//! fractional KdV and BBM companions on the periodic interval `[0, L)`.
//!
//! Fields are sampled on uniform grids of even size; spectral coefficients use
//! the convention `u(x_j) = Σ_k û_k e^{ik x_j}`. Quadratic products are
//! dealiased with the 2/3 rule unless raw products are requested.

pub mod checkpoint;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod operators;
pub mod spectral;
pub mod timestepper;

pub use error::{BlowUp, Error, Result};
pub use models::{Coefficients, ModelKind, ModelParams};
pub use operators::{FractionalOrder, Products};
pub use spectral::{Grid, RealField, SpectralField};
pub use timestepper::{Integrator, Outcome, SimulationState, SolverConfig, StepSize};
