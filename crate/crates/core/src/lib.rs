//! Noisy single-well oscillators driven by long-range-correlated Gaussian
//! noise, their action-angle description, and the limiting diffusions.
//!
//! * [`noise`] builds the noise as a finite superposition of exactly stepped
//!   Ornstein–Uhlenbeck modes.
//! * [`hamiltonian`] traces orbits and tabulates action-angle charts.
//! * [`oscillator`] integrates the forced system and splits the angle.
//! * [`limit`] computes the limiting coefficients by two routes and
//!   simulates the limiting diffusion.
//! * [`fbm`] renormalizes the integrated noise.
//! * [`stats`] runs ensembles and compares distributions.

pub mod error;
pub mod fbm;
pub mod hamiltonian;
pub mod interp;
pub mod limit;
pub mod noise;
pub mod ode;
pub mod oscillator;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use hamiltonian::{ActionAngleChart, HamiltonianModel, OrbitFourier};
pub use limit::LimitCoeffs;
pub use noise::{Lambda, NoiseDiscretization, NoiseState, SpectralDensity};
pub use oscillator::{SimConfig, TrajectoryRecord};
pub use stats::{EnsembleSummary, Estimate};
