//! Numerical toolkit for identifying the source of a fully nonlinear elliptic
//! equation from Dirichlet data and noisy observations on a measurement set,
//! by minimising softened `L^p` energies along an increasing ladder of
//! exponents to select an `L^inf` regularised solution.

mod banded;
pub mod calculus;
pub mod error;
pub mod forward;
pub mod functional;
pub mod grid;
mod hessian;
pub mod measures;
pub mod operators;
pub mod optimizer;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_grid, Grid, Interval, Kappa, MeasurementSet, ScalarField};
