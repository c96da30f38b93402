//! Travelling heteroclinic waves of the Frenkel-Kontorova chain
//!
//! ```text
//! c² u'' − Δ_D u + α u − α ψ'(u) = 0,   Δ_D u = u(x+1) − 2u(x) + u(x−1)
//! ```
//!
//! The pipeline runs `model` → `potential` → `spectral_green` → `exact_core`
//! → `wavetrain` → `family` → `corrector`, with `verify` holding norms,
//! invariant checks and a direct lattice integrator.

pub mod corrector;
pub mod error;
pub mod exact_core;
pub mod family;
pub mod grid;
pub mod model;
pub mod potential;
pub mod smooth;
pub mod spectral_green;
pub mod verify;
pub mod wavetrain;

pub use error::{Error, Result};
pub use grid::{Asymptote, Grid, GridProfile, Harmonic};
pub use model::ModelParams;
pub use potential::PotentialSpec;
