//! Reduced few-level model of number-selective atom transfer from a
//! condensate reservoir into a tightly confining tweezer trap.
//!
//! The crate derives model parameters from trap and scattering data, builds
//! detuning and drive schedules for adiabatic ramps, Stark-chirped passage and
//! resonant pulses, integrates the ladder dynamics, and evaluates the
//! closed-form transfer estimates and validity margins that go with them.

pub mod analytics;
pub mod error;
pub mod experiments;
pub mod levels;
pub mod presets;
pub mod propagator;
pub mod pulses;
pub mod units;

pub use error::{Error, Result};
