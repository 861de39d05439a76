//! Simulation and reconstruction toolkit for quantum optical coherence
//! tomography (QOCT).
//!
//! The fourth-order coincidence rate of a Hong-Ou-Mandel interferometer is
//! computed for layered, dispersive samples. A-scans are assembled into
//! volumes over a procedural onion-skin phantom and sliced into B/C-scans.
//! A second-order (classical OCT) engine is included as the
//! dispersion-sensitive reference.
//!
//! Length conventions: delay positions and depths are micrometres at the
//! public surface; frequencies are angular (rad/s); dispersion coefficients
//! are SI (rad/m, s/m, s²/m).

pub mod config;
pub mod counting;
pub mod error;
pub mod fft;
pub mod io;
pub mod oct;
pub mod phantom;
pub mod profile;
pub mod qoct;
pub mod sample;
pub mod scan;
pub mod spectrum;

pub use error::{QoctError, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Micrometres to metres.
pub(crate) const UM: f64 = 1e-6;
