//! Legendre-Fenchel conjugates of the cumulant generating function.
//!
//! ```text
//! G*(y, z) = sup_alpha [ <z, alpha> - G(y, alpha) ]
//! ```
//!
//! The numeric route maximizes the concave objective by a damped Newton
//! iteration started at `alpha = 0`, so the reported value is never negative.
//! Affine models with an invertible diffusion also have the closed form
//! `G*(y, z) = (log mgf)*(sigma(y)^-1 (z - b(y)))`.

use nalgebra::SVD;
use serde::Serialize;

use crate::kernel::{check_dim, check_finite, AffineNoiseModel, KernelModel, PerturbationLevel, Perturbed};
use crate::{Error, Matrix, Result, Vector};

/// Tolerances and caps for the conjugate solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateSettings {
    pub max_iter: usize,
    /// Convergence when `|z - grad G(y, alpha)| <= grad_tol * (1 + |z|)`.
    pub grad_tol: f64,
    /// Iterate norm beyond which sustained ascent is classified as divergence.
    pub norm_cap: f64,
    /// Number of consecutive strictly increasing iterations required to
    /// declare divergence at the cap.
    pub divergence_window: usize,
}

impl Default for ConjugateSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
            norm_cap: 1e3,
            divergence_window: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateStatus {
    Converged,
    /// The supremum is `+infinity`.
    Divergent,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateResult {
    /// `G*(y, z)`; `+infinity` when divergent, the best value found on
    /// `MaxIterations`.
    pub value: f64,
    pub argmax: Option<Vector>,
    pub status: ConjugateStatus,
    pub iterations: usize,
}

impl ConjugateResult {
    pub fn is_converged(&self) -> bool {
        self.status == ConjugateStatus::Converged
    }
}

/// Solves `(H + mu I) d = g`, raising `mu` until the factorization succeeds.
fn damped_newton_direction(h: &Matrix, g: &Vector) -> Vector {
    let d = g.len();
    let scale = h.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut mu = 0.0;
    for _ in 0..40 {
        let m = h + Matrix::identity(d, d) * mu;
        if let Some(ch) = m.cholesky() {
            let dir = ch.solve(g);
            if dir.iter().all(|x| x.is_finite()) && dir.amax() < 1e150 {
                return dir;
            }
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
    }
    g * 1e150
}

/// Maximizes `alpha -> <z, alpha> - G(y, alpha)` for any model.
fn maximize<M: KernelModel + ?Sized>(
    model: &M,
    y: &Vector,
    z: &Vector,
    settings: &ConjugateSettings,
) -> ConjugateResult {
    let objective = |alpha: &Vector| z.dot(alpha) - model.cgf(y, alpha);
    let tol = settings.grad_tol * (1.0 + z.norm());

    let mut alpha = Vector::zeros(z.len());
    let mut value: f64 = 0.0;
    let mut rising = 0usize;

    for it in 0..settings.max_iter {
        let g = z - model.cgf_grad(y, &alpha);
        if g.norm() <= tol {
            return ConjugateResult {
                value: value.max(0.0),
                argmax: Some(alpha),
                status: ConjugateStatus::Converged,
                iterations: it,
            };
        }
        if alpha.norm() >= settings.norm_cap && rising >= settings.divergence_window {
            return ConjugateResult {
                value: f64::INFINITY,
                argmax: None,
                status: ConjugateStatus::Divergent,
                iterations: it,
            };
        }

        let h = model.cgf_hessian(y, &alpha);
        let mut dir = damped_newton_direction(&h, &g);
        if dir.dot(&g) <= 0.0 {
            dir = g.clone();
        }
        // Trust region grows geometrically with the iterate.
        let radius = alpha.norm().max(1.0);
        let amax = dir.amax();
        let len = amax * (&dir / amax).norm();
        if len > radius {
            dir = &dir / amax * (amax * radius / len);
        }

        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let trial = &alpha + &dir * step;
            let v = objective(&trial);
            if trial == alpha {
                break;
            }
            if v.is_finite() && v >= value + 1e-4 * step * slope {
                accepted = Some((trial, v));
                break;
            }
            step *= 0.5;
        }

        match accepted {
            Some((next, v)) => {
                if v > value {
                    rising += 1;
                } else {
                    rising = 0;
                }
                alpha = next;
                value = v;
            }
            None => {
                // No ascent is representable: the iterate is a numerical maximizer
                // if the residual is small, otherwise give up.
                let status = if g.norm() <= 1e-6 * (1.0 + z.norm()) {
                    ConjugateStatus::Converged
                } else {
                    ConjugateStatus::MaxIterations
                };
                return ConjugateResult {
                    value: value.max(0.0),
                    argmax: Some(alpha),
                    status,
                    iterations: it,
                };
            }
        }
    }

    let g = z - model.cgf_grad(y, &alpha);
    let status = if g.norm() <= tol {
        ConjugateStatus::Converged
    } else if alpha.norm() >= settings.norm_cap && rising >= settings.divergence_window {
        ConjugateStatus::Divergent
    } else {
        ConjugateStatus::MaxIterations
    };
    ConjugateResult {
        value: if status == ConjugateStatus::Divergent { f64::INFINITY } else { value.max(0.0) },
        argmax: if status == ConjugateStatus::Divergent { None } else { Some(alpha) },
        status,
        iterations: settings.max_iter,
    }
}

fn check_pair<M: KernelModel + ?Sized>(model: &M, y: &Vector, z: &Vector) -> Result<()> {
    check_dim(y, model.dim(), "state")?;
    check_dim(z, model.dim(), "z")?;
    check_finite(y, "state")?;
    check_finite(z, "z")
}

/// Numeric `G*(y, z)`.
pub fn fenchel<M: KernelModel + ?Sized>(
    model: &M,
    y: &Vector,
    z: &Vector,
    settings: &ConjugateSettings,
) -> Result<ConjugateResult> {
    check_pair(model, y, z)?;
    Ok(maximize(model, y, z, settings))
}

/// Conjugate of `G^a(y, .) = G(y, .) + a^2 |.|^2 / 2`. Finite for every `z`
/// when `a > 0`.
pub fn perturbed_fenchel<M: KernelModel + ?Sized>(
    model: &M,
    a: PerturbationLevel,
    y: &Vector,
    z: &Vector,
    settings: &ConjugateSettings,
) -> Result<ConjugateResult> {
    if a.is_zero() {
        return fenchel(model, y, z, settings);
    }
    fenchel(&Perturbed::new(model, a), y, z, settings)
}

/// Exact conjugate for an affine model with invertible `sigma(y)` and a base
/// law whose log-MGF conjugate is known.
pub fn fenchel_closed_form_affine(model: &AffineNoiseModel, y: &Vector, z: &Vector) -> Result<f64> {
    check_pair(model, y, z)?;
    let s = model.sigma(y);
    let svd = SVD::new(s.clone(), true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > 1e-14 * max_sv.max(1e-300)) {
        return Err(Error::SingularSigma);
    }
    let v = svd
        .solve(&(z - model.drift(y)), 0.0)
        .map_err(|_| Error::SingularSigma)?;
    model
        .base()
        .log_mgf_conjugate(&v)
        .ok_or(Error::NoClosedForm(model.base().name()))
}

/// Documented bound `D` on `sup_y |E F(y)|`: the largest mean norm over the
/// supplied states, with 10% headroom.
pub fn mean_bound<M: KernelModel + ?Sized>(model: &M, states: &[Vector]) -> f64 {
    1.1 * states
        .iter()
        .map(|y| model.mean(y).norm())
        .fold(0.0, f64::max)
}

/// Upper bound `(|z| + D)^2 / (2 a^2)` on the perturbed conjugate, from the
/// Jensen lower bound `G^a(y, alpha) >= -D |alpha| + a^2 |alpha|^2 / 2`.
pub fn perturbed_conjugate_bound(a: PerturbationLevel, z: &Vector, mean_bound: f64) -> f64 {
    let a = a.value();
    (z.norm() + mean_bound).powi(2) / (2.0 * a * a)
}

/// A dominating point of the half-space `{x : <x, normal> >= level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominatingPoint {
    /// `x0 = grad G(y, xi0)`, on the boundary hyperplane.
    pub point: Vector,
    /// `xi0 = t* normal`.
    pub multiplier: Vector,
    /// `G*(y, x0) = <x0, xi0> - G(y, xi0)`.
    pub level: f64,
}

/// Finds `t* >= 0` with `<grad G(y, t* normal), normal> = level`.
///
/// The map `t -> <grad G(y, t normal), normal>` is nondecreasing by
/// convexity; the root is bracketed by doubling and refined by safeguarded
/// Newton steps. Fails with [`Error::NotRare`] when the mean already lies in
/// the half-space and with [`Error::TiltDivergent`] when no root exists below
/// `settings.norm_cap`.
pub fn dominating_point_halfspace<M: KernelModel + ?Sized>(
    model: &M,
    y: &Vector,
    normal: &Vector,
    level: f64,
    settings: &ConjugateSettings,
) -> Result<DominatingPoint> {
    check_pair(model, y, normal)?;
    if !level.is_finite() {
        return Err(Error::NonFinite("half-space level"));
    }
    let nn = normal.norm();
    if nn == 0.0 {
        return Err(Error::InvalidParameter("half-space normal must be nonzero".into()));
    }
    let psi = |t: f64| model.cgf_grad(y, &(normal * t)).dot(normal) - level;
    let dpsi = |t: f64| {
        let h = model.cgf_hessian(y, &(normal * t));
        normal.dot(&(h * normal))
    };

    let base = psi(0.0);
    if base >= 0.0 {
        return Err(Error::NotRare {
            mean: base + level,
            level,
        });
    }

    let (mut lo, mut hi) = (0.0, 1.0);
    while psi(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi * nn > settings.norm_cap {
            return Err(Error::TiltDivergent {
                level,
                cap: settings.norm_cap,
            });
        }
    }

    let tol = 1e-13 * (1.0 + level.abs());
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = psi(t);
        if f.abs() <= tol {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let df = dpsi(t);
        let newton = if df > 0.0 { t - f / df } else { f64::NAN };
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }

    let multiplier = normal * t;
    let point = model.cgf_grad(y, &multiplier);
    let level_value = point.dot(&multiplier) - model.cgf(y, &multiplier);
    Ok(DominatingPoint {
        point,
        multiplier,
        level: level_value.max(0.0),
    })
}
