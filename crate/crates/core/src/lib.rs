//! Phase retrieval of real audio signals from STFT magnitude or power
//! spectrograms by minimizing Bregman divergences.
//!
//! The crate is organized bottom-up:
//!
//! - [`stft`]: Gabor-frame STFT / inverse STFT with dual windows and
//!   frequency-Hermitian storage of real-signal transforms.
//! - [`divergence`]: Bregman generating functions, left/right objectives and
//!   their analytic gradients.
//! - [`prox`]: closed-form proximal operators and the Lambert W function.
//! - [`solvers`]: accelerated gradient descent, ADMM, and the Griffin-Lim
//!   family of baselines.
//! - [`metrics`]: spectral convergence and alignment-invariant SNR.
//! - [`harness`]: WAV I/O, synthetic inputs, measurement/degradation
//!   pipelines, the setup grid and experiment reporting.

pub mod divergence;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod prox;
pub mod solvers;
pub mod stft;


pub use error::{Error, Result, WavError};
pub use divergence::{Direction, DivergenceSpec, Measurements, Power, ProblemSpec};
pub use stft::{StftPlan, TfMatrix, TimeSignal, Window};

pub use num_complex::Complex64;
