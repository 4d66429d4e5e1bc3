//! Simulation kernels for an acoustically driven excited-state orbital doublet.
//!
//! The crate is organised bottom-up:
//!
//! - [`specfun`]: Bessel functions, complex log-gamma, seeded Gaussian sampling, FFT.
//! - [`model`]: strain/drive/laser/relaxation parameters and the Hamiltonian and
//!   collapse-operator constructors.
//! - [`lindblad`]: adaptive integration of the master equation.
//! - [`floquet`]: rotating-frame couplings, truncated Fourier-block and
//!   one-period propagator quasi-energies, absorption line weights.
//! - [`analytic`]: second-order perturbative Rabi frequency, Rabi trajectory,
//!   large-drive asymptotics and the Landau-Zener transfer-matrix estimate.
//! - [`fitdsp`]: bounded Levenberg-Marquardt and the fit models built on it.
//! - [`experiment`]: simulated PLE sweeps, pulsed time-domain histograms and the
//!   spectral-diffusion decoherence Monte Carlo.
//!
//! Frequencies are ordinary frequencies in GHz and times are in ns throughout.
//! The factor 2π is applied once, inside the Hamiltonian constructors.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod fitdsp;
pub mod floquet;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod series;
pub mod specfun;

pub use error::{Error, Result};
pub use series::TimeSeries;
