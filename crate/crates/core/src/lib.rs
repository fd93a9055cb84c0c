//! Explicit solution machinery for heat equations with a constant delay.
//!
//! - [`delayed_exp`]: the delayed exponential and the fundamental solution
//!   of a scalar linear delay ODE.
//! - [`delay_ode`]: closed-form and method-of-steps solvers for that ODE.
//! - [`spectral_heat`]: modal solver for the 1D delayed heat equation.
//! - [`stability`]: exponential decay certificate and energy checks.
//! - [`illposed`]: characteristic roots showing blow-up for lower-order
//!   regularizations.
//! - [`laser`]: short-pulse laser heating of a thin gold film.
//! - [`cli_io`]: configuration parsing, CSV output and the experiment runner.

#[cfg(feature = "cli")]
pub mod cli_io;
pub mod delay_ode;
pub mod delayed_exp;
pub mod error;
pub mod illposed;
pub mod laser;
pub mod numerics;
pub mod signal;
pub mod spectral_heat;
pub mod stability;

pub use error::{Error, Result};
