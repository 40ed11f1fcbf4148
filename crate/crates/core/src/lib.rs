//! Lagrangian simulator for one-dimensional free-boundary viscous flow.
//!
//! The fluid occupies the reference interval `(-1, 1)` in mass-following
//! coordinates; the physical domain is the image of the flow map `eta`. Three
//! flow kinds are supported: pressureless flow with constant viscosity, the
//! Navier–Stokes–Fourier system with a `1/M^2` pressure, and pressureless flow
//! with density-dependent viscosity `rho^alpha`.
//!
//! Alongside the steppers, [`diagnostics`] evaluates the energy identities and
//! decay estimates the solutions are known to satisfy, [`selfsimilar`]
//! integrates the closed-form self-similar family, and [`oracle`] provides
//! reference computations used to check the solver.

pub mod cli;
pub mod diagnostics;
pub mod discretize;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod oracle;
pub mod selfsimilar;
pub mod stepper;

pub use error::{Error, Result};
pub use model::{FlowKind, Grid, InitialData, LagrangianState, Params, Profile};
