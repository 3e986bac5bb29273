//! Numerics for the variable-mass Klein-Gordon field.
//!
//! Mass squared `xi` is treated as a variable paired with an invariant
//! evolution parameter `tau` by the Laplace transform. The crate provides
//!
//! * [`kinematics`]: Minkowski four-vectors, dispersion relations and the
//!   noise-model scalars `lambda(k)` and `varpi`,
//! * [`spectral`]: mass-spectral measures, forward Laplace transforms, the
//!   closed-form exponential-step inverse and xi-convolutions,
//! * [`fields`]: mode functions, the Klein-Gordon inner product and
//!   finite-difference residuals on a periodic box,
//! * [`propagators`]: quadrature evaluation of Wightman, Feynman, tau and
//!   noisy Feynman kernels plus commutator diagnostics,
//! * [`positivity`]: kernel functionals, test-function families and sweeps,
//! * [`semigroup`]: the tau-semigroup on a finite momentum lattice.
//!
//! Signature is (+,-,-,-) and natural units are used throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod kinematics;
pub mod positivity;
pub mod propagators;
pub mod quadrature;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
pub use kinematics::{FourVector, ThreeVector, ZetaParams};
pub use num_complex::Complex64;

/// Crate version embedded in every emitted report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
