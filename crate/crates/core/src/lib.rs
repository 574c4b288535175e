//! Path following for magnetic dipole-driven microswimmers.
//!
//! The swimmer moves with velocity `ṗ = w(p, ω) + d(t)`, where the dipole
//! command `ω` sets a heading through the field matrix `Γ(p)` and a speed
//! through the step-out map `F(|ω|)`. This crate provides the plant model,
//! path geometry, integral line-of-sight guidance, a step-out constrained
//! optimal controller, stability checks for the reduced error dynamics and a
//! fixed-step closed-loop simulator.

pub mod error;
pub mod guidance;
pub mod linalg;
pub mod model;
pub mod ods;
pub mod paths;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use linalg::{Mat2, Vec2};
