//! Spectral characterization of weak coherent state (WCS) sources through
//! two-photon Hong-Ou-Mandel interference.
//!
//! The crate is split along the measurement chain:
//!
//! * [`wavepackets`]: Gaussian spatio-temporal modes and the two-photon
//!   coincidence kernels behind a symmetric beamsplitter.
//! * [`statistics`]: photon-number statistics of a WCS pair, event-class
//!   weights and the normalized quantum-beat coincidence model.
//! * [`simulator`]: Monte Carlo coincidence scans (two-photon kernel engine
//!   and semiclassical field engine) plus the self-heterodyne FM emulation.
//! * [`beat_oracle`]: bright-light heterodyne beat synthesis, averaged
//!   periodogram and Gaussian line fit.
//! * [`estimator`]: quantum-beat model fitting and cross-technique
//!   comparison statistics.
//!
//! Times are in seconds, angular frequencies in rad/s and spectral
//! quantities in Hz unless a name says otherwise.

pub mod beat_oracle;
mod error;
pub mod estimator;
pub mod lsq;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod statistics;
pub mod wavepackets;

pub use error::{Error, Result};

/// Converts a frequency in Hz to an angular frequency in rad/s.
pub fn hz_to_rad(f: f64) -> f64 {
    std::f64::consts::TAU * f
}

/// Converts an angular frequency in rad/s to Hz.
pub fn rad_to_hz(w: f64) -> f64 {
    w / std::f64::consts::TAU
}
