//! Fully discrete simulation of the stochastic Cahn-Hilliard equation
//!
//! ```text
//! du + A^2 u dt = A f(u) dt + sigma dW,   x in (0, pi), Neumann boundary
//! ```
//!
//! by finite differences in space and a strongly tamed exponential Euler
//! method in time, with the experiment harness used to measure strong
//! convergence rates and ergodic limits.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod integrator;
pub mod noise;
pub mod observables;
pub mod output;
pub mod runner;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Norm, SpectralBasis, SpectralField};
pub use integrator::{run_trajectory, DriftSpec, InitialProfile, SchemeParams, SchemeState};
pub use noise::NoiseSource;
