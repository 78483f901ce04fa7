//! Simulation and relaxed optimal control of the stochastic
//! Landau–Lifshitz–Bloch equation driven by pure-jump Lévy noise in Marcus
//! canonical form.
//!
//! The numerical core is generic over the scalar type ([`Real`]: `f32` or
//! `f64`); the aliases at the crate root fix it to `f64`, which is what the
//! Monte Carlo drivers, optimizer and property suites use.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod levy;
pub mod marcus;
pub mod optimize;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod vec3;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Field64 = grid::Field<f64>;
pub type Field32 = grid::Field<f32>;
pub type MaterialField64 = marcus::MaterialField<f64>;
pub type LevyMeasure64 = levy::LevyMeasureSpec<f64>;
pub type YoungMeasure64 = control::YoungMeasure<f64>;
pub type SimConfig64 = integrator::SimConfig<f64>;
pub type Trajectory64 = integrator::Trajectory<f64>;
pub type Problem64 = control::Problem<f64>;
