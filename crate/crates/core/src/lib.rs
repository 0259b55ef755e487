//! Coupled TV-Stokes image denoising.
//!
//! The model couples an image `u` with a smoothed gradient field `n`
//! constrained to be curl free:
//!
//! ```text
//! min_{n, u : P n = n}  alpha |grad n| + beta |grad u - n|
//!                       + eta1/2 ||n - grad f||^2 + eta2/2 ||u - f||^2
//! ```
//!
//! where `P` is the orthogonal projection onto gradient fields. It is solved
//! by alternating minimisation over the two blocks, each block by a
//! semi-implicit dual iteration. The first outer iteration reproduces the
//! two-step (smooth the gradient field, then fit the image) TV-Stokes scheme.
//!
//! Besides the solver, the crate carries the diagnostics needed to check the
//! sublinear convergence theory numerically (gradient mappings, sufficient
//! decrease, the `O(1/k)` energy bound) and brute-force oracles for tiny
//! instances.

pub mod diff;
pub mod driver;
pub mod error;
pub mod field;
pub mod io;
pub mod oracle;
pub mod params;
pub mod projector;
pub mod solvers;

pub use driver::{
    denoise, denoise_with_reference, energy_total, gradient_mapping, lrt_reference, rate_check,
    Energy, Trace, TraceRecord,
};
pub use error::{Error, Result};
pub use field::{
    inner, norm_l2, sum_pointwise_euclid, Field, ScalarField, Shape, TensorField, VecField,
};
pub use params::Params;
pub use projector::{poisson_pinv, project, PoissonPlan};
pub use solvers::{solve_sub1, solve_sub2, Sub1State, Sub2State};
