//! Riemannian multinomial logistic regression on SPD matrices and rotations.
//!
//! - [`symlin`]: symmetric-matrix kernel (spectral calculus, Cholesky, Lyapunov)
//! - [`spdgeo`]: the five power-deformed metric families on S++(n)
//! - [`songeo`]: bi-invariant geometry of SO(n) with an SO(3) fast path
//! - [`rmlr`]: classifier heads and their closed-form scores
//! - [`grad`]: reverse-mode gradients of the heads and a finite-difference oracle
//! - [`model`]: one interface over all heads for training
//! - [`optim`]: Riemannian SGD with momentum on mixed parameter manifolds

pub mod error;
pub mod grad;
pub mod model;
pub mod optim;
pub mod rmlr;
pub mod sample;
pub mod songeo;
pub mod spdgeo;
pub mod symlin;

pub use error::{Error, Result};
