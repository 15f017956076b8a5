//! Coupled dissipative systems driven by Lévy noise.
//!
//! The crate simulates two-sided Lévy paths, integrates additive and general
//! jump-diffusion SDEs on them, computes stationary orbits by pullback and by
//! closed-form convolution, measures path distances in the Skorohod metric,
//! and runs λ-sweeps that show the coupled system's stationary orbits
//! collapsing onto the orbit of the averaged equation.

pub mod config;
pub mod csvio;
pub mod drift;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod levy;
pub mod path;
pub mod runner;
pub mod seed;
pub mod skorohod;
pub mod stationary;
pub mod sync;

pub use error::{Error, Result};
pub use grid::SimulationGrid;
pub use levy::{GeneratingTriplet, JumpDistribution, JumpMeasure, NoiseRealization};
pub use path::{CadlagPath, PathBuilder};
