//! Simulation and analysis toolkit for a triggered quantum-dot single-photon
//! source.
//!
//! The crate is organised along the measurement chain:
//!
//! * [`excitation`] drives a two-level emitter with one- or two-colour pulse
//!   trains (swing-up and phonon-assisted schemes) and maps preparation
//!   probabilities over detuning/power grids.
//! * [`stream`] turns a preparation probability into a Monte Carlo photon
//!   stream with blinking, spectral diffusion, telegraph line jumps and
//!   background photons.
//! * [`optics`] sends photons through filters, a Fabry-Pérot scan, an HBT
//!   beamsplitter or an unbalanced-MZI Hong-Ou-Mandel setup and produces
//!   detector time tags.
//! * [`analysis`] reduces time tags and spectra to g²(0), two-photon
//!   interference visibility, Voigt line parameters and the brightness
//!   budget.
//! * [`scenario`] ties everything together from a TOML scenario file and
//!   carries the reference operating points.

pub mod analysis;
pub mod error;
pub mod excitation;
pub mod optics;
pub mod rng;
pub mod scenario;
pub mod stream;
pub mod units;

pub use error::{Error, Result};
