//! Walk-on-spheres solver for the fractional torsion problem
//! `(-Δ)^s u = 1` in Ω, `u = 0` outside, and numerical checks of the
//! symmetry and stability estimates for domains `Ω = G + B_R`.

pub mod cli;
pub mod constants;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod geometry;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod verify;
pub mod vec;
pub mod wos;

pub use error::{Error, Result};
