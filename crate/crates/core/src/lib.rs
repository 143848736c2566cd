//! Numerical laboratory for viscous strictly hyperbolic systems
//! `u_t + A(u)u_x = (B(u)u_x)_x` whose viscosity commutes with the drift.
//!
//! The crate covers system models and their spectral frames, an explicit
//! finite-difference solver, the decomposition of `u_x` and `u_t` into wave
//! amplitudes, interaction and area functionals, viscous travelling waves,
//! and configured experiments driven from the `vvlab` binary.

// `!(x > y)` is used on purpose so that NaN fails the guard
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod solver;
pub mod spectral;
pub mod system;
pub mod travelling;

pub use error::{Error, Result};
