//! Ladder-type (cascade) EIT in a warm rubidium vapor around an optical nanofiber.
//!
//! The crate is organised bottom-up:
//!
//! - [`atoms`]: rubidium line data, Clebsch–Gordan coefficients and magnetic-sublevel pathways.
//! - [`lineshape`]: the three-level weak-probe susceptibility, velocity averaging for a
//!   counter-propagating signal/control pair, Doppler width and transit-time broadening.
//! - [`spectra`]: full transmission spectra over a detuning grid, window metrics and
//!   Autler–Townes splitting diagnostics.
//! - [`polarization`]: σ± susceptibilities, Jones propagation and crossed/parallel analyzer
//!   spectra.
//! - [`calibrate`]: control power to Rabi frequency mapping and bounded least-squares fits.
//!
//! Angular frequencies are in rad/s, frequencies in Hz and everything else in SI units.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atoms;
pub mod calibrate;
mod error;
pub mod lineshape;
pub mod polarization;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// `2π`, used for converting between Hz and rad/s.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
