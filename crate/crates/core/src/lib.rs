//! Exact few-photon simulation of linear-optical interferometers, built
//! around heralded coherence swapping between two independent sources.
//!
//! * [`fock`]: sparse bosonic states and the ladder algebra.
//! * [`elements`]: beam splitters, phase shifters, flux segments, mirrors.
//! * [`circuit`]: declarative circuits, validation, simulation and
//!   Aharonov-Bohm loop bookkeeping.
//! * [`conditioning`]: heralding, conditional fringe scans, visibility fits.
//! * [`spectral`]: pulsed down-conversion joint amplitudes and the four-fold
//!   fringe visibility.
//! * [`scenario`]: scenario files and the runner behind the `cohswap` binary.

pub mod circuit;
pub mod conditioning;
pub mod elements;
pub mod error;
pub mod fock;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
