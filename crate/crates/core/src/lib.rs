//! Simulation and analysis toolkit for orbital-angular-momentum (OAM)
//! quantum key distribution over turbulent underwater channels.
//!
//! The crate covers the full chain from scalar Fourier optics to protocol
//! analysis:
//!
//! - [`field`]: sampled complex fields, OAM mode generation, overlaps.
//! - [`zernike`]: Zernike polynomials, phase screens, modal decomposition.
//! - [`propagation`]: band-limited angular-spectrum propagation with
//!   absorption.
//! - [`turbulence`]: stochastic Zernike-composed screens with AR(1) temporal
//!   evolution.
//! - [`retrieval`]: Gerchberg-Saxton phase retrieval and batch frame
//!   characterization.
//! - [`vortex`]: phase-singularity detection and frame-to-frame tracking.
//! - [`quantum`]: mutually unbiased bases, channel cross-talk simulation,
//!   counting statistics.
//! - [`protocols`]: QBER, secret-key rates, abort thresholds, sifting.
//! - [`tomography`]: single-qubit process tomography and process fidelity.
//!
//! Heavy loops (frame batches, screen ensembles, FFT rows) are data-parallel
//! under the `parallel` feature (enabled by default) and fall back to
//! sequential execution without it. Results are identical either way: all
//! parallel reductions collect in input order and fold sequentially.

pub mod error;
mod exec;
mod fft2;
pub mod field;
pub mod propagation;
pub mod protocols;
pub mod quantum;
pub mod retrieval;
pub mod tomography;
pub mod turbulence;
pub mod vortex;
pub mod zernike;

pub use error::{Error, Result};
