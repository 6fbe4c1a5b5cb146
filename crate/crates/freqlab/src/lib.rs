//! freqlab: a simulator and analysis toolkit for power-system frequency
//! fluctuations driven by stochastic loads.
//!
//! The crate couples a two-state linear stochastic model (swing equation plus
//! Ornstein-Uhlenbeck load) with a nonlinear center-of-inertia grid model
//! (turbine governors with dead-bands, AGC, load damping, drifting load,
//! synthetic inertia), closed-form moment oracles, and histogram/modality
//! statistics for frequency sample series.

pub mod error;
pub mod expm;
pub mod rng;
pub mod sde;
pub mod oracle;
pub mod grid;
pub mod stats;
pub mod scenario;
pub mod measured;

pub use error::{Error, Result};
pub use rng::NoiseStream;
