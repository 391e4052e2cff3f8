//! Increment laws `mu(y, .)` of the recursive scheme.
//!
//! A model is the triple (sampler, cumulant generating function, gradient).
//! The cumulant generating function is
//!
//! ```text
//! G(y, alpha) = log E exp<F(y), alpha>,     F(y) ~ mu(y, .)
//! ```
//!
//! Every model must satisfy `G(y, 0) = 0`, have `G(y, .)` finite and convex
//! everywhere with `sup_y G(y, alpha) < infinity`, and have
//! `cgf_grad(y, 0) = E F(y)`. The shipped models all belong to the affine
//! family [`AffineNoiseModel`], for which these obligations follow from
//! bounded Lipschitz drift and diffusion.

mod affine;
mod base;
pub mod preset;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

pub use affine::{AffineNoiseModel, DriftFn, SigmaFn};
pub use base::{BaseNoise, ProductBernoulli, StandardGaussian};

use crate::{Error, Matrix, Result, Vector};

/// An increment law `mu(y, .)` known through a sampler and its cumulant
/// generating function in the second argument.
///
/// Implementations are immutable and shared freely across threads; all
/// randomness comes from the caller's stream.
pub trait KernelModel: Send + Sync {
    fn dim(&self) -> usize;

    /// One draw of `F(y)`.
    fn sample_increment(&self, y: &Vector, rng: &mut dyn RngCore) -> Vector;

    /// `G(y, alpha)`.
    fn cgf(&self, y: &Vector, alpha: &Vector) -> f64;

    /// Gradient of `G(y, .)` at `alpha`.
    fn cgf_grad(&self, y: &Vector, alpha: &Vector) -> Vector;

    /// Hessian of `G(y, .)` at `alpha`. The default differentiates
    /// [`cgf_grad`](Self::cgf_grad) by central differences.
    fn cgf_hessian(&self, y: &Vector, alpha: &Vector) -> Matrix {
        let d = alpha.len();
        let mut h = Matrix::zeros(d, d);
        for j in 0..d {
            let step = 1e-5 * (1.0 + alpha[j].abs());
            let mut up = alpha.clone();
            let mut dn = alpha.clone();
            up[j] += step;
            dn[j] -= step;
            let col = (self.cgf_grad(y, &up) - self.cgf_grad(y, &dn)) / (2.0 * step);
            h.set_column(j, &col);
        }
        (&h + h.transpose()) * 0.5
    }

    /// `E F(y) = cgf_grad(y, 0)`.
    fn mean(&self, y: &Vector) -> Vector {
        self.cgf_grad(y, &Vector::zeros(self.dim()))
    }

    fn as_affine(&self) -> Option<&AffineNoiseModel> {
        None
    }
}

/// Gaussian perturbation amplitude `a >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize)]
pub struct PerturbationLevel(f64);

impl PerturbationLevel {
    pub const ZERO: PerturbationLevel = PerturbationLevel(0.0);

    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "perturbation level must be finite and >= 0, got {a}"
            )));
        }
        Ok(Self(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// The model with an independent `a N(0, I)` term added to every increment:
/// `G^a(y, alpha) = G(y, alpha) + a^2 |alpha|^2 / 2`.
///
/// Sampling always draws the Gaussian term after the base increment, even
/// when `a = 0`, so runs at different levels stay coupled through the seed.
#[derive(Clone, Copy)]
pub struct Perturbed<'m, M: ?Sized> {
    pub model: &'m M,
    pub a: PerturbationLevel,
}

impl<'m, M: KernelModel + ?Sized> Perturbed<'m, M> {
    pub fn new(model: &'m M, a: PerturbationLevel) -> Self {
        Self { model, a }
    }
}

impl<M: KernelModel + ?Sized> KernelModel for Perturbed<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn sample_increment(&self, y: &Vector, rng: &mut dyn RngCore) -> Vector {
        let f = self.model.sample_increment(y, rng);
        let g = Vector::from_fn(f.len(), |_, _| StandardNormal.sample(rng));
        if self.a.is_zero() {
            f
        } else {
            f + g * self.a.value()
        }
    }

    fn cgf(&self, y: &Vector, alpha: &Vector) -> f64 {
        let a = self.a.value();
        self.model.cgf(y, alpha) + 0.5 * a * a * alpha.norm_squared()
    }

    fn cgf_grad(&self, y: &Vector, alpha: &Vector) -> Vector {
        let a = self.a.value();
        self.model.cgf_grad(y, alpha) + alpha * (a * a)
    }

    fn cgf_hessian(&self, y: &Vector, alpha: &Vector) -> Matrix {
        let a = self.a.value();
        let d = alpha.len();
        self.model.cgf_hessian(y, alpha) + Matrix::identity(d, d) * (a * a)
    }

    fn mean(&self, y: &Vector) -> Vector {
        self.model.mean(y)
    }

    fn as_affine(&self) -> Option<&AffineNoiseModel> {
        if self.a.is_zero() {
            self.model.as_affine()
        } else {
            None
        }
    }
}

pub(crate) fn check_finite(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_dim(v: &Vector, dim: usize, what: &'static str) -> Result<()> {
    if v.len() == dim {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected: dim,
            got: v.len(),
        })
    }
}

fn check_args<M: KernelModel + ?Sized>(model: &M, y: &Vector, alpha: &Vector) -> Result<()> {
    check_dim(y, model.dim(), "state")?;
    check_dim(alpha, model.dim(), "alpha")?;
    check_finite(y, "state")?;
    check_finite(alpha, "alpha")
}

/// `G(y, alpha)` with input validation.
pub fn cgf<M: KernelModel + ?Sized>(model: &M, y: &Vector, alpha: &Vector) -> Result<f64> {
    check_args(model, y, alpha)?;
    Ok(model.cgf(y, alpha))
}

/// Gradient of `G(y, .)` with input validation.
pub fn cgf_grad<M: KernelModel + ?Sized>(model: &M, y: &Vector, alpha: &Vector) -> Result<Vector> {
    check_args(model, y, alpha)?;
    Ok(model.cgf_grad(y, alpha))
}

/// `G^a(y, alpha) = G(y, alpha) + a^2 |alpha|^2 / 2`.
pub fn perturbed_cgf<M: KernelModel + ?Sized>(
    model: &M,
    a: f64,
    y: &Vector,
    alpha: &Vector,
) -> Result<f64> {
    let a = PerturbationLevel::new(a)?;
    check_args(model, y, alpha)?;
    Ok(Perturbed::new(model, a).cgf(y, alpha))
}

/// One draw from `mu(y, .)`.
pub fn sample_increment<M: KernelModel + ?Sized>(
    model: &M,
    y: &Vector,
    rng: &mut dyn RngCore,
) -> Vector {
    model.sample_increment(y, rng)
}
