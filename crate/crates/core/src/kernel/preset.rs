//! Declarative model records and the named presets built from them.
//!
//! ```
//! use euler_ldp::kernel::preset::ModelSpec;
//!
//! let spec: ModelSpec = serde_json::from_str(r#"{
//!     "kind": "affine",
//!     "dim": 1,
//!     "drift": {"type": "linear", "matrix": [[-1.0]], "offset": [0.0]},
//!     "sigma": {"type": "scaled_identity", "scale": 1.0},
//!     "base": {"type": "gaussian"}
//! }"#).unwrap();
//! let model = spec.build().unwrap();
//! assert_eq!(model.label(), "gaussian base, drift linear, sigma 1*I, d=1");
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AffineNoiseModel, BaseNoise, ProductBernoulli, StandardGaussian};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Affine,
}

/// Drift `b(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `b(y) = A y + v`.
    Linear { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Scalar `b(y) = y (1 - y)`.
    Logistic,
}

/// Diffusion `sigma(y)`; the presets are state independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Constant { matrix: Vec<Vec<f64>> },
    ScaledIdentity { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    Gaussian,
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub kind: ModelKind,
    pub dim: usize,
    pub drift: DriftSpec,
    pub sigma: SigmaSpec,
    pub base: BaseSpec,
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize, what: &'static str) -> Result<Matrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidParameter(format!("{what} must be {dim}x{dim}")));
    }
    let m = Matrix::from_fn(dim, dim, |i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(m)
}

fn vector_of(xs: &[f64], dim: usize, what: &'static str) -> Result<Vector> {
    if xs.len() != dim {
        return Err(Error::Dimension {
            what,
            expected: dim,
            got: xs.len(),
        });
    }
    let v = Vector::from_column_slice(xs);
    super::check_finite(&v, what)?;
    Ok(v)
}

impl DriftSpec {
    fn name(&self) -> &'static str {
        match self {
            DriftSpec::Zero => "zero",
            DriftSpec::Constant { .. } => "constant",
            DriftSpec::Linear { .. } => "linear",
            DriftSpec::Logistic => "logistic",
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<AffineNoiseModel> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        let drift: super::DriftFn = match &self.drift {
            DriftSpec::Zero => Arc::new(move |_y: &Vector| Vector::zeros(d)),
            DriftSpec::Constant { value } => {
                let c = vector_of(value, d, "drift value")?;
                Arc::new(move |_y: &Vector| c.clone())
            }
            DriftSpec::Linear { matrix, offset } => {
                let a = matrix_from_rows(matrix, d, "drift matrix")?;
                let v = vector_of(offset, d, "drift offset")?;
                Arc::new(move |y: &Vector| &a * y + &v)
            }
            DriftSpec::Logistic => {
                if d != 1 {
                    return Err(Error::InvalidParameter("logistic drift is scalar (dim 1)".into()));
                }
                Arc::new(|y: &Vector| y.map(|s| s * (1.0 - s)))
            }
        };
        let (sigma, sigma_desc) = match &self.sigma {
            SigmaSpec::Constant { matrix } => (matrix_from_rows(matrix, d, "sigma matrix")?, "const".to_string()),
            SigmaSpec::ScaledIdentity { scale } => {
                if !scale.is_finite() {
                    return Err(Error::NonFinite("sigma scale"));
                }
                (Matrix::identity(d, d) * *scale, format!("{scale}*I"))
            }
        };
        let base: Arc<dyn BaseNoise> = match self.base {
            BaseSpec::Gaussian => Arc::new(StandardGaussian::new(d)),
            BaseSpec::Bernoulli { p } => Arc::new(ProductBernoulli::new(d, p)?),
        };
        let label = format!(
            "{} base, drift {}, sigma {}, d={}",
            base.name(),
            self.drift.name(),
            sigma_desc,
            d
        );
        let model = AffineNoiseModel::new(d, drift, Arc::new(move |_y: &Vector| sigma.clone()), base)?;
        Ok(model.with_label(label))
    }
}

fn rows(m: &[&[f64]]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

/// `b = 0`, `sigma = I`, Gaussian base.
pub fn standard_gaussian(dim: usize) -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Affine,
        dim,
        drift: DriftSpec::Zero,
        sigma: SigmaSpec::ScaledIdentity { scale: 1.0 },
        base: BaseSpec::Gaussian,
    }
}

/// Scalar `b(y) = -y`, `sigma = 1`, Gaussian base.
pub fn ornstein_uhlenbeck() -> ModelSpec {
    ModelSpec {
        drift: DriftSpec::Linear {
            matrix: vec![vec![-1.0]],
            offset: vec![0.0],
        },
        ..standard_gaussian(1)
    }
}

/// Scalar Bernoulli(p) increments: `b = 0`, `sigma = 1`.
pub fn bernoulli(p: f64) -> ModelSpec {
    ModelSpec {
        base: BaseSpec::Bernoulli { p },
        ..standard_gaussian(1)
    }
}

/// Scalar `b(y) = -y` with Bernoulli(p) noise.
pub fn bernoulli_ou(p: f64) -> ModelSpec {
    ModelSpec {
        base: BaseSpec::Bernoulli { p },
        ..ornstein_uhlenbeck()
    }
}

/// Scalar logistic drift `y (1 - y)` with Gaussian noise of scale `sigma`.
pub fn logistic(sigma: f64) -> ModelSpec {
    ModelSpec {
        drift: DriftSpec::Logistic,
        sigma: SigmaSpec::ScaledIdentity { scale: sigma },
        ..standard_gaussian(1)
    }
}

/// Two-dimensional damped rotation `b(y) = A y + v` with a correlated constant diffusion.
pub fn linear_2d() -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Affine,
        dim: 2,
        drift: DriftSpec::Linear {
            matrix: rows(&[&[-1.0, 0.5], &[-0.5, -1.0]]),
            offset: vec![0.2, 0.0],
        },
        sigma: SigmaSpec::Constant {
            matrix: rows(&[&[1.0, 0.0], &[0.3, 0.8]]),
        },
        base: BaseSpec::Gaussian,
    }
}

/// `b(y) = A y + v` with no noise (`sigma = 0`).
pub fn deterministic_linear(matrix: &[&[f64]], offset: &[f64]) -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Affine,
        dim: offset.len(),
        drift: DriftSpec::Linear {
            matrix: rows(matrix),
            offset: offset.to_vec(),
        },
        sigma: SigmaSpec::ScaledIdentity { scale: 0.0 },
        base: BaseSpec::Gaussian,
    }
}

/// The preset catalogue exercised by the verification suites.
pub fn shipped() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("gaussian-zero", standard_gaussian(1)),
        ("gaussian-ou", ornstein_uhlenbeck()),
        ("gaussian-linear-2d", linear_2d()),
        ("gaussian-logistic", logistic(0.5)),
        ("bernoulli", bernoulli(0.3)),
        ("bernoulli-ou", bernoulli_ou(0.3)),
    ]
}

/// Looks up a shipped preset by name.
pub fn by_name(name: &str) -> Option<ModelSpec> {
    shipped().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::KernelModel;

    #[test]
    fn presets_build() {
        for (name, spec) in shipped() {
            let m = spec.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(m.dim(), spec.dim);
            assert_eq!(by_name(name), Some(spec));
        }
    }

    #[test]
    fn rejects_bad_records() {
        let mut s = standard_gaussian(2);
        s.drift = DriftSpec::Linear {
            matrix: vec![vec![1.0]],
            offset: vec![0.0, 0.0],
        };
        assert!(s.build().is_err());
        let mut s = standard_gaussian(2);
        s.drift = DriftSpec::Logistic;
        assert!(s.build().is_err());
        assert!(bernoulli(1.2).build().is_err());
        let bad = r#"{"dim": 1, "drift": {"type": "zero"}, "sigma": {"type": "scaled_identity", "scale": 1.0}, "base": {"type": "gaussian"}, "extra": 1}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn default_kind_is_echoed() {
        let s: ModelSpec = serde_json::from_str(
            r#"{"dim": 1, "drift": {"type": "zero"}, "sigma": {"type": "scaled_identity", "scale": 1.0}, "base": {"type": "bernoulli", "p": 0.3}}"#,
        )
        .unwrap();
        let echo = serde_json::to_string(&s).unwrap();
        assert!(echo.contains(r#""kind":"affine""#));
    }
}
