//! Special functions and sampling shared by the physics modules.
//!
//! Everything here is pure except [`gaussian_sample`], which advances the
//! generator it is handed.

mod bessel;
mod fft;
mod gamma;
mod rng;

pub use bessel::{bessel_j, bessel_j_unchecked, MAX_ARGUMENT, MAX_ORDER};
pub use fft::{fft_magnitude_spectrum, SpectrumBin};
pub use gamma::{arg_gamma_one_minus_i, log_gamma_complex, EULER_GAMMA};
pub use rng::{gaussian_sample, SeededRng};
