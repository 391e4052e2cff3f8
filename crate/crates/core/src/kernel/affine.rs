use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use super::base::BaseNoise;
use super::KernelModel;
use crate::{Error, Matrix, Result, Vector};

pub type DriftFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type SigmaFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Increments `F(y) = b(y) + sigma(y) Z` with a fixed base law for `Z`.
///
/// The cumulant generating function is
/// `G(y, alpha) = <b(y), alpha> + log_mgf(sigma(y)^T alpha)` and its gradient
/// `b(y) + sigma(y) grad log_mgf(sigma(y)^T alpha)`.
///
/// The drift and diffusion are expected to be bounded and Lipschitz. Under
/// that assumption the Lipschitz bound `|<F(y) - F(z), alpha>| <=
/// C |y - z| |alpha| (1 + |Z|)` gives the exponential-moment condition on
/// increment differences for any base law with a finite MGF; it is not
/// checked here.
#[derive(Clone)]
pub struct AffineNoiseModel {
    dim: usize,
    drift: DriftFn,
    sigma: SigmaFn,
    base: Arc<dyn BaseNoise>,
    label: String,
}

impl fmt::Debug for AffineNoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineNoiseModel")
            .field("dim", &self.dim)
            .field("base", &self.base)
            .field("label", &self.label)
            .finish()
    }
}

impl AffineNoiseModel {
    pub fn new(
        dim: usize,
        drift: DriftFn,
        sigma: SigmaFn,
        base: Arc<dyn BaseNoise>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if base.dim() != dim {
            return Err(Error::Dimension {
                what: "base noise",
                expected: dim,
                got: base.dim(),
            });
        }
        Ok(Self {
            dim,
            drift,
            sigma,
            base,
            label: String::from("affine"),
        })
    }

    /// Attaches a human-readable summary used in reports.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn drift(&self, y: &Vector) -> Vector {
        (self.drift)(y)
    }

    pub fn sigma(&self, y: &Vector) -> Matrix {
        (self.sigma)(y)
    }

    pub fn base(&self) -> &dyn BaseNoise {
        self.base.as_ref()
    }

    /// `F(y)` for an externally drawn base sample `z`.
    pub fn increment(&self, y: &Vector, z: &Vector) -> Vector {
        self.drift(y) + self.sigma(y) * z
    }
}

impl KernelModel for AffineNoiseModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_increment(&self, y: &Vector, rng: &mut dyn RngCore) -> Vector {
        let z = self.base.sample(rng);
        self.increment(y, &z)
    }

    fn cgf(&self, y: &Vector, alpha: &Vector) -> f64 {
        let s = self.sigma(y);
        self.drift(y).dot(alpha) + self.base.log_mgf(&(s.transpose() * alpha))
    }

    fn cgf_grad(&self, y: &Vector, alpha: &Vector) -> Vector {
        let s = self.sigma(y);
        let v = s.transpose() * alpha;
        self.drift(y) + &s * self.base.log_mgf_grad(&v)
    }

    fn cgf_hessian(&self, y: &Vector, alpha: &Vector) -> Matrix {
        let s = self.sigma(y);
        let v = s.transpose() * alpha;
        &s * self.base.log_mgf_hessian(&v) * s.transpose()
    }

    fn as_affine(&self) -> Option<&AffineNoiseModel> {
        Some(self)
    }
}
