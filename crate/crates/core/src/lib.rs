//! Stationary optomechanical entanglement between a probed oscillator and its output light.
//!
//! The crate builds the covariance matrix of the oscillator and a finite set of
//! temporal modes of the reflected light, and decides whether the joint state is
//! entangled. Frequencies are in units of the mechanical resonance by default.

pub mod boundary;
pub mod config;
pub mod covariance;
pub mod entanglement;
pub mod error;
pub mod montecarlo;
pub mod optimize;
pub mod output;
pub mod plant;
pub mod poly;
pub mod spectra;
pub mod squeeze;
pub mod statespace;

pub use error::{Error, Result};
pub use plant::{PlantParams, TransferMatrices};
pub use spectra::{NoiseModel, RationalSpectrum, SqlReference};
pub use squeeze::InputFieldState;
