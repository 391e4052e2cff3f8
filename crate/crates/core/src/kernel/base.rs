//! Base noise laws `Z` for the affine family `F(y) = b(y) + sigma(y) Z`.

use std::fmt::Debug;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::{Matrix, Vector};

/// A fixed noise law on `R^d`, described by its log moment generating function.
pub trait BaseNoise: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// `log E exp<Z, v>`.
    fn log_mgf(&self, v: &Vector) -> f64;

    fn log_mgf_grad(&self, v: &Vector) -> Vector;

    fn log_mgf_hessian(&self, v: &Vector) -> Matrix;

    fn sample(&self, rng: &mut dyn RngCore) -> Vector;

    /// `E Z`.
    fn mean(&self) -> Vector {
        self.log_mgf_grad(&Vector::zeros(self.dim()))
    }

    /// Closed-form Legendre-Fenchel conjugate of `log_mgf`, when known.
    /// `f64::INFINITY` outside the effective domain.
    fn log_mgf_conjugate(&self, _v: &Vector) -> Option<f64> {
        None
    }

    /// Whether the law is the standard Gaussian (exact tilted sampling available).
    fn is_standard_gaussian(&self) -> bool {
        false
    }
}

/// Standard Gaussian `N(0, I_d)`: `log_mgf(v) = |v|^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardGaussian {
    pub dim: usize,
}

impl StandardGaussian {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl BaseNoise for StandardGaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_mgf(&self, v: &Vector) -> f64 {
        0.5 * v.norm_squared()
    }

    fn log_mgf_grad(&self, v: &Vector) -> Vector {
        v.clone()
    }

    fn log_mgf_hessian(&self, _v: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vector {
        Vector::from_fn(self.dim, |_, _| rng.sample(StandardNormal))
    }

    fn log_mgf_conjugate(&self, v: &Vector) -> Option<f64> {
        Some(0.5 * v.norm_squared())
    }

    fn is_standard_gaussian(&self) -> bool {
        true
    }
}

/// Independent Bernoulli(p) coordinates on `{0, 1}^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBernoulli {
    pub dim: usize,
    pub p: f64,
}

impl ProductBernoulli {
    /// `p` must lie strictly inside `(0, 1)`.
    pub fn new(dim: usize, p: f64) -> crate::Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "bernoulli p must lie in (0, 1), got {p}"
            )));
        }
        Ok(Self { dim, p })
    }

    /// `log(1 - p + p e^s)`, stable for large `|s|`.
    fn coord_log_mgf(&self, s: f64) -> f64 {
        let p = self.p;
        if s > 1.0 {
            s + p.ln() + ((1.0 - p) / p * (-s).exp()).ln_1p()
        } else {
            (p * s.exp_m1()).ln_1p()
        }
    }

    /// Tilted success probability `p e^s / (1 - p + p e^s)`.
    fn coord_tilted_p(&self, s: f64) -> f64 {
        let logit = s + (self.p / (1.0 - self.p)).ln();
        if logit >= 0.0 {
            1.0 / (1.0 + (-logit).exp())
        } else {
            let e = logit.exp();
            e / (1.0 + e)
        }
    }
}

impl BaseNoise for ProductBernoulli {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_mgf(&self, v: &Vector) -> f64 {
        v.iter().map(|&s| self.coord_log_mgf(s)).sum()
    }

    fn log_mgf_grad(&self, v: &Vector) -> Vector {
        v.map(|s| self.coord_tilted_p(s))
    }

    fn log_mgf_hessian(&self, v: &Vector) -> Matrix {
        let diag = v.map(|s| {
            let e = (-(s + (self.p / (1.0 - self.p)).ln()).abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        });
        Matrix::from_diagonal(&diag)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vector {
        Vector::from_fn(self.dim, |_, _| {
            if rng.random::<f64>() < self.p {
                1.0
            } else {
                0.0
            }
        })
    }

    fn log_mgf_conjugate(&self, v: &Vector) -> Option<f64> {
        let p = self.p;
        let mut total = 0.0;
        for &x in v.iter() {
            if !(0.0..=1.0).contains(&x) {
                return Some(f64::INFINITY);
            }
            // Boundary values are the lower semicontinuous limits.
            let a = if x == 0.0 { 0.0 } else { x * (x / p).ln() };
            let b = if x == 1.0 {
                0.0
            } else {
                (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln()
            };
            total += a + b;
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bernoulli_log_mgf_matches_two_point_sum() {
        let b = ProductBernoulli::new(1, 0.3).unwrap();
        let v = Vector::from_element(1, 1.0);
        let direct = (0.7 + 0.3 * 1f64.exp()).ln();
        assert_relative_eq!(b.log_mgf(&v), direct, max_relative = 1e-15);
        let v = Vector::from_element(1, -2.5);
        let direct = (0.7 + 0.3 * (-2.5f64).exp()).ln();
        assert_relative_eq!(b.log_mgf(&v), direct, max_relative = 1e-14);
    }

    #[test]
    fn bernoulli_large_arguments_stay_finite() {
        let b = ProductBernoulli::new(1, 0.3).unwrap();
        let big = b.log_mgf(&Vector::from_element(1, 800.0));
        assert_relative_eq!(big, 800.0 + 0.3f64.ln(), max_relative = 1e-15);
        let small = b.log_mgf(&Vector::from_element(1, -800.0));
        assert_relative_eq!(small, 0.7f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(b.log_mgf_grad(&Vector::from_element(1, 800.0))[0], 1.0);
        assert_eq!(b.log_mgf_grad(&Vector::from_element(1, -800.0))[0], 0.0);
    }

    #[test]
    fn bernoulli_conjugate_boundary_limits() {
        let b = ProductBernoulli::new(1, 0.3).unwrap();
        let at = |x: f64| b.log_mgf_conjugate(&Vector::from_element(1, x)).unwrap();
        assert_relative_eq!(at(0.0), -(0.7f64.ln()));
        assert_relative_eq!(at(1.0), -(0.3f64.ln()));
        assert_eq!(at(0.3), 0.0);
        assert!(at(1.5).is_infinite());
        assert!(at(-0.1).is_infinite());
    }

    #[test]
    fn bernoulli_rejects_degenerate_p() {
        assert!(ProductBernoulli::new(1, 0.0).is_err());
        assert!(ProductBernoulli::new(1, 1.0).is_err());
        assert!(ProductBernoulli::new(1, f64::NAN).is_err());
    }
}
