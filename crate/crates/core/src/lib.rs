//! Gaussian-mixture posterior sampling for linear Bayesian inverse problems.
//!
//! The crate covers the closed-form posterior mixture of a linear-Gaussian likelihood under a
//! Gaussian mixture prior ([`model`]), fast evaluators of the Laplace-prior posterior mixing
//! density ([`mixing`]), samplers and chain diagnostics ([`samplers`]), coordinate-selection and
//! MAP-based dimension reduction of the mixing density ([`reduction`]), and the deblurring and
//! super-resolution test problems ([`problems`]).

pub mod container;
pub mod error;
pub mod linalg;
pub mod mixing;
pub mod model;
pub mod optim;
pub mod problems;
pub mod reduction;
pub mod samplers;

pub use error::{Error, Result};
