//! Modal-dispersion toolkit for multimode optical waveguides.
//!
//! The crate covers the full chain from a 2D refractive-index profile to a
//! channel bandwidth figure:
//!
//! * [`profile`] — index-profile representation, CSV I/O and a synthetic
//!   graded-index generator; radial fiber profiles.
//! * [`modesolver`] — scalar finite-difference eigenmode solver for arbitrary
//!   2D profiles, plus group indices via spectral finite differences.
//! * [`fibermodes`] — analytic LP modes of circular multimode fibers.
//! * [`launch`] — launch fields, overlap-integral coupling and mode power
//!   distributions.
//! * [`dispersion`] — modal delays, impulse/frequency responses, −3 dB
//!   bandwidth, offset scans and the step loss-model fit.
//! * [`pulse`] — autocorrelation-trace fitting and link-bandwidth extraction.
//! * [`budget`] — receiver sensitivity and link power-budget arithmetic.
//!
//! All lengths are micrometers, times picoseconds and frequencies GHz unless
//! a name says otherwise.

pub mod budget;
pub mod dispersion;
pub mod error;
pub mod fibermodes;
pub mod grid;
pub mod launch;
pub mod modesolver;
pub mod profile;
pub mod pulse;

mod bessel;
mod eigen;
mod fit;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 2.997_924_58e8;
