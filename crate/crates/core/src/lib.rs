//! Gaussian-process regression with improper priors.
//!
//! Conditionally positive definite kernels such as the Smooth Walk
//! `-tau * tanh(tau / l)` are not covariance functions, but the limit of the
//! posterior of `s + c` as `c -> inf` is finite and does not revert to a
//! global mean far from the data. This crate provides the kernel catalogue,
//! the limit posterior, a large-`c` reference posterior, hyperparameter
//! fitting by the conditional marginal likelihood, numerical validity checks,
//! and an experiment harness.

pub mod harness;
pub mod hyperopt;
pub mod kernel;
pub mod linalg;
pub mod points;
pub mod regression;
pub mod validation;

pub use kernel::{Covariance, Family, KernelError, KernelSpec, MaternOrder};
pub use points::Points;
