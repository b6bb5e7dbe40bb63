//! Volume integral equation modeling of induction-logging responses in
//! anisotropic conductive media.
//!
//! The electric field inside the anomalous region satisfies
//! `(I − 𝒢Δσ)E = E⁽⁰⁾`, where `𝒢` is the electric Green's operator of a
//! homogeneous isotropic background. The operator is applied with zero-padded
//! FFT convolutions, the system is solved with restarted GMRES, and large
//! anomalous regions are split into rectangular boxes coupled by block
//! Gauss-Seidel or Jacobi sweeps.

pub mod decomposition;
pub mod error;
pub mod fft;
pub mod greens;
pub mod krylov;
pub mod logsim;
pub mod model;
pub mod operators;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod sources;

pub use error::{Error, Result};
pub use num_complex::Complex64;
