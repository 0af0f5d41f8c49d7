//! Simulation and analysis core for a voltage-gated quantum-dot single-photon
//! source.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and a seed: emission Monte Carlo, detector models,
//! coincidence correlation, lineshape analysis, two-photon interference and
//! photon-correlation Fourier spectroscopy. File formats, parallel drivers and
//! the command-line front end live in the `qdsim` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod correlator;
pub mod emitter;
mod error;
mod linalg;
pub mod interference;
mod lm;
pub mod pcfs;
pub mod photon;
pub mod rng;
pub mod spectroscopy;
mod voigt;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::correlator::{correlate, ChannelSet, CorrelationHistogram, HistogramSpec};
    pub use crate::emitter::{EmitterConfig, Excitation};
    pub use crate::photon::{DetectorModel, PhotonTag, TagStream, Truth};
    pub use crate::spectroscopy::Spectrum;
    pub use crate::{Error, Result};
}

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
