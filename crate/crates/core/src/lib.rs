//! Large deviations of stochastic Euler schemes.
//!
//! The crate simulates the recursion
//! `X_k = X_{k-1} + n^-1 F_k(X_{k-1})` driven by i.i.d. random vector fields,
//! evaluates the cumulant generating function `G(y, alpha)` of the increment
//! law and its Legendre-Fenchel conjugate, computes and minimizes the rate
//! functional `I^x(f) = int G*(f, f') ds` on polygonal paths, and estimates
//! event probabilities by plain and exponentially tilted Monte Carlo.
//!
//! | module | contents |
//! |---|---|
//! | [`kernel`] | increment laws, `G`, `grad G`, perturbation `G^a`, presets |
//! | [`conjugate`] | numeric and closed-form `G*`, dominating points |
//! | [`scheme`] | simulation, polygons, dual functionals `Phi_n` and `Phi` |
//! | [`action`] | rate functional, minimum-action paths, limit ODE |
//! | [`rare_event`] | Monte Carlo estimators and verification suites |
//!
//! ```
//! use euler_ldp::kernel::preset;
//! use euler_ldp::conjugate::{fenchel, ConjugateSettings};
//! use euler_ldp::Vector;
//!
//! let model = preset::bernoulli(0.3).build().unwrap();
//! let y = Vector::from_element(1, 0.0);
//! let r = fenchel(&model, &y, &Vector::from_element(1, 0.6), &ConjugateSettings::default()).unwrap();
//! let kl = 0.6 * (0.6f64 / 0.3).ln() + 0.4 * (0.4f64 / 0.7).ln();
//! assert!((r.value - kl).abs() < 1e-10);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod conjugate;
mod error;
pub mod kernel;
pub mod quadrature;
pub mod rare_event;
pub mod rng;
pub mod scheme;

pub use error::{Error, Result};
pub use kernel::{AffineNoiseModel, KernelModel, PerturbationLevel};
pub use scheme::{DualMeasure, Trajectory};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

// The guide's code listings are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/conjugates.md")]
    mod conjugates {}
    #[doc = include_str!("../../../book/src/scheme.md")]
    mod scheme {}
    #[doc = include_str!("../../../book/src/action.md")]
    mod action {}
    #[doc = include_str!("../../../book/src/rare_events.md")]
    mod rare_events {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
