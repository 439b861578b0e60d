//! Simulation and verification toolkit for a sub-critical Keller-Segel model
//! in the plane: the interacting N-particle system with the singular
//! attraction kernel `K(x) = x / |x|^{alpha+1}` (`0 < alpha < 1`) and its
//! capped regularization, a finite-volume solver for the limiting
//! aggregation-diffusion equation, and the statistical functionals (entropy,
//! Fisher information, moments, exact Wasserstein-1, pairwise interaction
//! integrals) used to test the two against each other.
//!
//! Everything is deterministic: noise is counter-based and keyed by
//! `(seed, step, particle)`, so runs replay bit-identically for any worker
//! count, coupled runs share their Brownian paths exactly, and checkpointed
//! runs resume mid-stream.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod meanfield;
pub mod particle;
pub mod rng;
pub mod vec2;

pub use error::{Error, Result};
pub use grid::DensityGrid;
pub use kernel::KernelParams;
pub use meanfield::{PdeConfig, PdeSolution, VelocityField};
pub use particle::{
    InitialCondition, ParticleState, SimConfig, Trajectory,
};
pub use vec2::Vec2;
