//! Monte Carlo estimation of scheme event probabilities.
//!
//! Plain frequency estimates work for moderate events. Rare terminal
//! half-space events use exponential tilting: step `k` draws its increment
//! from the law weighted by `exp(<F, alpha_k> - G(y, alpha_k))` and the
//! sample carries the likelihood ratio
//!
//! ```text
//! W = exp( sum_k [ G(X_{k-1}, alpha_k) - <F_k(X_{k-1}), alpha_k> ] )
//! ```
//!
//! so that `E_tilted[W 1_A] = P(A)` for any deterministic choice of the
//! `alpha_k`. For the Gaussian base the tilted law is the same Gaussian
//! shifted by `sigma(y)^T alpha_k`, which makes the sampler exact.

use serde::Serialize;

use crate::action::{limit_ode, minimize_action, ActionProblem, MinimizeSettings, Terminal};
use crate::conjugate::{dominating_point_halfspace, perturbed_fenchel, ConjugateSettings, ConjugateStatus};
use crate::kernel::{check_dim, AffineNoiseModel, KernelModel, PerturbationLevel};
use crate::rng::{replicate, Stream};
use crate::scheme::{dual_pairing, phi_n, DualMeasure, SchemeRun, Trajectory};
use crate::{Error, Result, Vector};

/// Path events whose probabilities are estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSpec {
    /// `<Y_n(1), normal> >= level`.
    TerminalHalfSpace { normal: Vector, level: f64 },
    /// `|Y_n(1) - center| <= radius`.
    TerminalBall { center: Vector, radius: f64 },
    /// `sup_t |Y_n(t) - reference(t)| >= eps`.
    SupDistance { reference: Trajectory, eps: f64 },
}

/// Serializable description of an [`EventSpec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventSummary {
    TerminalHalfspace { normal: Vec<f64>, level: f64 },
    TerminalBall { center: Vec<f64>, radius: f64 },
    SupDistance { eps: f64, reference_steps: usize },
}

impl EventSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            EventSpec::TerminalHalfSpace { normal, level } => {
                check_dim(normal, dim, "half-space normal")?;
                if !level.is_finite() || normal.iter().any(|x| !x.is_finite()) || normal.norm() == 0.0 {
                    return Err(Error::InvalidParameter("half-space needs a finite nonzero normal and finite level".into()));
                }
            }
            EventSpec::TerminalBall { center, radius } => {
                check_dim(center, dim, "ball center")?;
                if !(*radius > 0.0) || center.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("ball needs a finite center and radius > 0".into()));
                }
            }
            EventSpec::SupDistance { reference, eps } => {
                check_dim(reference.start(), dim, "reference path")?;
                if !(*eps > 0.0) {
                    return Err(Error::InvalidParameter("eps must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, path: &Trajectory) -> bool {
        match self {
            EventSpec::TerminalHalfSpace { normal, level } => path.end().dot(normal) >= *level,
            EventSpec::TerminalBall { center, radius } => (path.end() - center).norm() <= *radius,
            EventSpec::SupDistance { reference, eps } => path.sup_distance(reference) >= *eps,
        }
    }

    pub fn summary(&self) -> EventSummary {
        match self {
            EventSpec::TerminalHalfSpace { normal, level } => EventSummary::TerminalHalfspace {
                normal: normal.iter().copied().collect(),
                level: *level,
            },
            EventSpec::TerminalBall { center, radius } => EventSummary::TerminalBall {
                center: center.iter().copied().collect(),
                radius: *radius,
            },
            EventSpec::SupDistance { reference, eps } => EventSummary::SupDistance {
                eps: *eps,
                reference_steps: reference.n(),
            },
        }
    }
}

/// Sample budget, seed and worker cap of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McSettings {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Tilted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub p_hat: f64,
    pub stderr: f64,
    pub n: usize,
    pub samples: usize,
    /// Samples that landed in the event.
    pub hits: usize,
    /// `-log(p_hat) / n`; absent when `p_hat = 0`.
    pub empirical_rate: Option<f64>,
    pub predicted_rate: Option<f64>,
    pub method: Method,
    pub seed: u64,
    pub workers: usize,
}

impl EstimateReport {
    /// Delta-method standard error of the empirical rate.
    pub fn rate_stderr(&self) -> Option<f64> {
        (self.p_hat > 0.0).then(|| self.stderr / (self.p_hat * self.n as f64))
    }
}

fn empirical_rate(p: f64, n: usize) -> Option<f64> {
    (p > 0.0).then(|| -p.ln() / n as f64)
}

/// Mean and standard error (`sd / sqrt(N)`, two-pass sample variance).
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Plain frequency estimate of `P(Y_n in event)` with binomial standard error.
pub fn mc_probability<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    n: usize,
    a: PerturbationLevel,
    event: &EventSpec,
    mc: &McSettings,
) -> Result<EstimateReport> {
    mc.check()?;
    event.validate(model.dim())?;
    let run = SchemeRun::new(model, x, n, a, mc.seed);
    let hits: Vec<Result<bool>> = replicate(mc.samples, mc.seed, mc.workers, |rng, _| {
        run.simulate_with(rng).map(|path| event.contains(&path))
    });
    let mut count = 0usize;
    for h in hits {
        count += usize::from(h?);
    }
    let p = count as f64 / mc.samples as f64;
    Ok(EstimateReport {
        p_hat: p,
        stderr: (p * (1.0 - p) / mc.samples as f64).sqrt(),
        n,
        samples: mc.samples,
        hits: count,
        empirical_rate: empirical_rate(p, n),
        predicted_rate: None,
        method: Method::Naive,
        seed: mc.seed,
        workers: mc.workers,
    })
}

fn gaussian_affine<M: KernelModel + ?Sized>(model: &M) -> Result<&AffineNoiseModel> {
    match model.as_affine() {
        Some(m) if m.base().is_standard_gaussian() => Ok(m),
        _ => Err(Error::TiltUnsupported),
    }
}

/// Constant tilt `xi0` from the dominating point of the half-space for the
/// increment law at the limit-ODE terminal state `f_x(1)`.
///
/// Fails with [`Error::NotRare`] when `f_x(1)` already lies in the half-space.
pub fn dominating_point_tilt<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    normal: &Vector,
    level: f64,
    settings: &ConjugateSettings,
) -> Result<Vector> {
    let ode = limit_ode(model, x, 1000)?;
    let end = ode.end();
    let mean = end.dot(normal);
    if mean >= level {
        return Err(Error::NotRare { mean, level });
    }
    Ok(dominating_point_halfspace(model, end, normal, level, settings)?.multiplier)
}

/// Per-step tilts read off a path: step `k` uses the conjugate maximizer at
/// the midpoint of `[(k-1)/n, k/n]` for the path's local slope.
pub fn path_tilt_schedule<M: KernelModel + ?Sized>(
    model: &M,
    path: &Trajectory,
    n: usize,
    settings: &ConjugateSettings,
) -> Result<Vec<Vector>> {
    let m = path.n();
    (1..=n)
        .map(|k| {
            let t = (k as f64 - 0.5) / n as f64;
            let seg = ((t * m as f64).floor() as usize).min(m - 1) + 1;
            let y = path.eval(t)?;
            let r = perturbed_fenchel(model, PerturbationLevel::ZERO, &y, &path.slope(seg), settings)?;
            match (r.status, r.argmax) {
                (ConjugateStatus::Converged, Some(alpha)) => Ok(alpha),
                _ => Err(Error::ConjugateMaxIterations { segment: seg }),
            }
        })
        .collect()
}

/// One tilted replica: whether the event was hit and the log likelihood ratio.
fn tilted_replica(
    model: &AffineNoiseModel,
    x: &Vector,
    n: usize,
    schedule: &[Vector],
    rng: &mut Stream,
) -> Result<(Trajectory, f64)> {
    let inv_n = 1.0 / n as f64;
    let mut state = x.clone();
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(state.clone());
    let mut log_w = 0.0;
    for (k, alpha) in schedule.iter().enumerate() {
        let s = model.sigma(&state);
        let z = model.base().sample(rng) + s.transpose() * alpha;
        let f = model.drift(&state) + &s * z;
        log_w += model.cgf(&state, alpha) - f.dot(alpha);
        state += f * inv_n;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: k + 1 });
        }
        knots.push(state.clone());
    }
    Ok((Trajectory::new(knots)?, log_w))
}

/// Tilted estimate with an explicit per-step tilt schedule (`n` entries).
pub fn tilted_mc_with_schedule<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    n: usize,
    event: &EventSpec,
    schedule: &[Vector],
    mc: &McSettings,
) -> Result<EstimateReport> {
    mc.check()?;
    event.validate(model.dim())?;
    let affine = gaussian_affine(model)?;
    check_dim(x, model.dim(), "start point")?;
    if schedule.len() != n || n == 0 {
        return Err(Error::InvalidParameter(format!("tilt schedule needs {n} entries, got {}", schedule.len())));
    }
    let values: Vec<Result<f64>> = replicate(mc.samples, mc.seed, mc.workers, |rng, _| {
        let (path, log_w) = tilted_replica(affine, x, n, schedule, rng)?;
        let w = log_w.exp();
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NonFinite("likelihood ratio"));
        }
        Ok(if event.contains(&path) { w } else { 0.0 })
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let hits = values.iter().filter(|&&w| w > 0.0).count();
    let (p, se) = mean_stderr(&values);
    Ok(EstimateReport {
        p_hat: p,
        stderr: se,
        n,
        samples: mc.samples,
        hits,
        empirical_rate: empirical_rate(p, n),
        predicted_rate: None,
        method: Method::Tilted,
        seed: mc.seed,
        workers: mc.workers,
    })
}

/// Importance-sampling estimate of `P(<Y_n(1), normal> >= level)` with the
/// constant dominating-point tilt. Requires a Gaussian-base affine model and
/// a limit-ODE endpoint outside the half-space.
pub fn tilted_mc_probability<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    n: usize,
    normal: &Vector,
    level: f64,
    mc: &McSettings,
) -> Result<EstimateReport> {
    gaussian_affine(model)?;
    let event = EventSpec::TerminalHalfSpace {
        normal: normal.clone(),
        level,
    };
    event.validate(model.dim())?;
    let xi0 = dominating_point_tilt(model, x, normal, level, &ConjugateSettings::default())?;
    tilted_mc_with_schedule(model, x, n, &event, &vec![xi0; n], mc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MartingaleReport {
    /// `|mean - 1| <= k stderr`, with exact equality accepted when `stderr = 0`.
    pub fn within(&self, k: f64) -> bool {
        (self.mean - 1.0).abs() <= k * self.stderr + 1e-12
    }
}

/// Empirical mean of `exp[<Y_n, lambda> - Phi_n(Y_n, lambda)]`, which has
/// expectation exactly 1.
pub fn martingale_check<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    n: usize,
    a: PerturbationLevel,
    lambda: &DualMeasure,
    mc: &McSettings,
) -> Result<MartingaleReport> {
    mc.check()?;
    if lambda.dim() != model.dim() {
        return Err(Error::Dimension {
            what: "dual measure",
            expected: model.dim(),
            got: lambda.dim(),
        });
    }
    let run = SchemeRun::new(model, x, n, a, mc.seed);
    let values: Vec<Result<f64>> = replicate(mc.samples, mc.seed, mc.workers, |rng, _| {
        let path = run.simulate_with(rng)?;
        Ok((dual_pairing(&path, lambda) - phi_n(model, x, a, &path, lambda)).exp())
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(MartingaleReport {
        mean,
        stderr,
        samples: mc.samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub estimate: EstimateReport,
    /// `|empirical - predicted| / predicted`.
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub predicted_rate: f64,
    pub points: Vec<RatePoint>,
    /// Grid positions where the absolute gap grew by no more than two
    /// combined rate standard errors (tolerated, not failed).
    pub flagged: Vec<usize>,
    /// The absolute gap never grew by more than two standard errors.
    pub trend_ok: bool,
}

impl RateReport {
    pub fn final_gap(&self) -> Option<f64> {
        self.points.last().and_then(|p| p.relative_gap)
    }
}

/// Compares empirical decay rates over an `n` grid with the minimum action.
///
/// The predicted rate is the minimized action over paths from `x` ending in
/// the half-space. Gaussian-base affine models are estimated by tilting along
/// the conjugate maximizers of the minimizing path; other models fall back to
/// plain Monte Carlo.
#[allow(clippy::too_many_arguments)]
pub fn verify_rate<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    normal: &Vector,
    level: f64,
    n_grid: &[usize],
    mc: &McSettings,
    knots: usize,
    settings: &MinimizeSettings,
) -> Result<RateReport> {
    let event = EventSpec::TerminalHalfSpace {
        normal: normal.clone(),
        level,
    };
    event.validate(model.dim())?;
    let ode = limit_ode(model, x, 1000)?;
    let mean = ode.end().dot(normal);
    if mean >= level {
        return Err(Error::NotRare { mean, level });
    }
    let problem = ActionProblem {
        model,
        x: x.clone(),
        terminal: Terminal::HalfSpace {
            normal: normal.clone(),
            level,
        },
        knots,
        a: PerturbationLevel::ZERO,
        settings: *settings,
    };
    let best = minimize_action(&problem)?;
    let predicted = best.value.value;
    let tilted = gaussian_affine(model).is_ok();

    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut estimate = if tilted {
            let schedule = path_tilt_schedule(model, &best.path, n, &settings.conjugate)?;
            tilted_mc_with_schedule(model, x, n, &event, &schedule, mc)?
        } else {
            mc_probability(model, x, n, PerturbationLevel::ZERO, &event, mc)?
        };
        estimate.predicted_rate = Some(predicted);
        let relative_gap = estimate.empirical_rate.map(|r| (r - predicted).abs() / predicted);
        points.push(RatePoint { estimate, relative_gap });
    }

    let mut flagged = Vec::new();
    let mut trend_ok = true;
    for (i, w) in points.windows(2).enumerate() {
        let gap = |p: &RatePoint| p.estimate.empirical_rate.map(|r| (r - predicted).abs());
        match (gap(&w[0]), gap(&w[1])) {
            (Some(g0), Some(g1)) if g1 > g0 => {
                let se = w[0].estimate.rate_stderr().unwrap_or(0.0) + w[1].estimate.rate_stderr().unwrap_or(0.0);
                if g1 - g0 <= 2.0 * se {
                    flagged.push(i + 1);
                } else {
                    trend_ok = false;
                }
            }
            (Some(_), None) | (None, Some(_)) | (None, None) => trend_ok = false,
            _ => {}
        }
    }

    Ok(RateReport {
        predicted_rate: predicted,
        points,
        flagged,
        trend_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdePoint {
    pub n: usize,
    pub q_hat: f64,
    pub stderr: f64,
    pub hits: usize,
    /// No hits: excluded from the fit.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeReport {
    pub eps: f64,
    pub points: Vec<OdePoint>,
    /// Least-squares slope of `log q_n` against `n` over uncensored points.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Uncensored estimates strictly decrease along the grid and every
    /// censored point comes after all uncensored ones.
    pub strictly_decreasing: bool,
}

/// Estimates `q_n = P(sup_t |Y_n(t) - f_x(t)| >= eps)` along an `n` grid by
/// plain Monte Carlo and fits `log q_n` linearly in `n`.
pub fn verify_ode_convergence<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    eps: f64,
    n_grid: &[usize],
    mc: &McSettings,
) -> Result<OdeReport> {
    let reference = limit_ode(model, x, 1000)?;
    let event = EventSpec::SupDistance { reference, eps };
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let r = mc_probability(model, x, n, PerturbationLevel::ZERO, &event, mc)?;
        points.push(OdePoint {
            n,
            q_hat: r.p_hat,
            stderr: r.stderr,
            hits: r.hits,
            censored: r.hits == 0,
        });
    }

    let live: Vec<&OdePoint> = points.iter().filter(|p| !p.censored).collect();
    let first_censored = points.iter().position(|p| p.censored).unwrap_or(points.len());
    let strictly_decreasing = points[..first_censored].iter().all(|p| !p.censored)
        && points[first_censored..].iter().all(|p| p.censored)
        && live.windows(2).all(|w| w[1].q_hat < w[0].q_hat);

    let (slope, intercept) = if live.len() >= 2 {
        let k = live.len() as f64;
        let mx = live.iter().map(|p| p.n as f64).sum::<f64>() / k;
        let my = live.iter().map(|p| p.q_hat.ln()).sum::<f64>() / k;
        let sxy: f64 = live.iter().map(|p| (p.n as f64 - mx) * (p.q_hat.ln() - my)).sum();
        let sxx: f64 = live.iter().map(|p| (p.n as f64 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (Some(slope), Some(my - slope * mx))
    } else {
        (None, None)
    };

    Ok(OdeReport {
        eps,
        points,
        slope,
        intercept,
        strictly_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::preset;
    use statrs::function::erf::erfc;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// Standard normal upper tail.
    fn normal_tail(z: f64) -> f64 {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }

    fn mc(samples: usize, seed: u64) -> McSettings {
        McSettings::new(samples, seed).with_workers(4)
    }

    #[test]
    fn sure_event() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let ev = EventSpec::TerminalBall {
            center: v(&[0.0]),
            radius: 1e9,
        };
        let r = mc_probability(&m, &v(&[0.0]), 20, PerturbationLevel::ZERO, &ev, &mc(500, 1)).unwrap();
        assert_eq!((r.p_hat, r.stderr), (1.0, 0.0));
        assert_eq!(r.empirical_rate, Some(0.0));
    }

    #[test]
    fn symmetric_event_is_half() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let ev = EventSpec::TerminalHalfSpace {
            normal: v(&[1.0]),
            level: 0.0,
        };
        let r = mc_probability(&m, &v(&[0.0]), 100, PerturbationLevel::ZERO, &ev, &mc(20_000, 2)).unwrap();
        assert!((r.p_hat - 0.5).abs() <= 4.0 * r.stderr);
    }

    #[test]
    fn naive_estimate_misses_rare_event() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let ev = EventSpec::TerminalHalfSpace {
            normal: v(&[1.0]),
            level: 1.0,
        };
        let r = mc_probability(&m, &v(&[0.0]), 100, PerturbationLevel::ZERO, &ev, &mc(100_000, 3)).unwrap();
        assert_eq!(r.p_hat, 0.0);
        assert_eq!(r.empirical_rate, None);
        assert!((normal_tail(10.0) - 7.62e-24).abs() < 1e-26);
    }

    #[test]
    fn tilted_matches_exact_gaussian_tail() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let r = tilted_mc_probability(&m, &v(&[0.0]), 100, &v(&[1.0]), 1.0, &mc(100_000, 4)).unwrap();
        let exact = normal_tail(10.0);
        assert!((r.p_hat - exact).abs() <= 4.0 * r.stderr, "{} vs {exact}", r.p_hat);
        assert!(r.stderr / r.p_hat <= 0.05);
    }

    #[test]
    fn tilted_rejects_common_events_and_non_gaussian_bases() {
        let m = preset::standard_gaussian(1).build().unwrap();
        assert!(matches!(
            tilted_mc_probability(&m, &v(&[0.0]), 50, &v(&[1.0]), -0.2, &mc(10, 1)),
            Err(Error::NotRare { .. })
        ));
        let b = preset::bernoulli(0.3).build().unwrap();
        assert_eq!(
            tilted_mc_probability(&b, &v(&[0.0]), 50, &v(&[1.0]), 0.6, &mc(10, 1)),
            Err(Error::TiltUnsupported)
        );
    }

    #[test]
    fn naive_and_tilted_agree_on_moderate_event() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let x = v(&[0.0]);
        let ev = EventSpec::TerminalHalfSpace {
            normal: v(&[1.0]),
            level: 0.3,
        };
        let naive = mc_probability(&m, &x, 50, PerturbationLevel::ZERO, &ev, &mc(100_000, 5)).unwrap();
        let tilted = tilted_mc_probability(&m, &x, 50, &v(&[1.0]), 0.3, &mc(100_000, 6)).unwrap();
        let joint = (naive.stderr.powi(2) + tilted.stderr.powi(2)).sqrt();
        assert!((naive.p_hat - tilted.p_hat).abs() <= 4.0 * joint);
        assert!((tilted.p_hat - normal_tail(0.3 * 50f64.sqrt())).abs() <= 4.0 * tilted.stderr);
    }

    #[test]
    fn tilted_weights_positive_and_finite() {
        let m = preset::linear_2d().build().unwrap();
        let x = v(&[0.0, 0.0]);
        let schedule = vec![v(&[0.8, -0.3]); 40];
        for i in 0..200 {
            let mut rng = crate::rng::stream(9, i);
            let (_, log_w) = tilted_replica(m.as_affine().unwrap(), &x, 40, &schedule, &mut rng).unwrap();
            let w = log_w.exp();
            assert!(w.is_finite() && w > 0.0);
        }
    }

    #[test]
    fn martingale_trivial_cases() {
        let m = preset::ornstein_uhlenbeck().build().unwrap();
        let x = v(&[0.5]);
        let r = martingale_check(&m, &x, 20, PerturbationLevel::ZERO, &DualMeasure::zero(1), &mc(1000, 1)).unwrap();
        assert_eq!((r.mean, r.stderr), (1.0, 0.0));

        let det = preset::deterministic_linear(&[&[-1.0]], &[0.3]).build().unwrap();
        let lam = DualMeasure::new(1, vec![(0.37, v(&[1.5])), (1.0, v(&[-0.5]))]).unwrap();
        let r = martingale_check(&det, &x, 30, PerturbationLevel::ZERO, &lam, &mc(1000, 1)).unwrap();
        assert!((r.mean - 1.0).abs() <= 1e-12 && r.stderr <= 1e-12, "{r:?}");
    }

    #[test]
    fn martingale_gaussian_terminal_atom() {
        let m = preset::standard_gaussian(2).build().unwrap();
        let lam = DualMeasure::point(1.0, v(&[0.8, -0.6])).unwrap();
        let r = martingale_check(&m, &v(&[0.1, 0.1]), 50, PerturbationLevel::ZERO, &lam, &mc(100_000, 12)).unwrap();
        assert!(r.within(4.0), "{r:?}");
    }

    #[test]
    fn verify_rate_rejects_common_event() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let err = verify_rate(&m, &v(&[0.0]), &v(&[1.0]), -1.0, &[10], &mc(10, 1), 11, &MinimizeSettings::default());
        assert!(matches!(err, Err(Error::NotRare { .. })));
    }

    #[test]
    fn ode_convergence_trivial_cases() {
        let det = preset::deterministic_linear(&[&[-1.0]], &[0.0]).build().unwrap();
        let r = verify_ode_convergence(&det, &v(&[1.0]), 0.05, &[10, 20], &mc(200, 1)).unwrap();
        assert!(r.points.iter().all(|p| p.q_hat == 0.0 && p.censored));
        assert_eq!(r.slope, None);

        let m = preset::standard_gaussian(1).build().unwrap();
        let r = verify_ode_convergence(&m, &v(&[0.0]), 1e9, &[10, 20], &mc(200, 1)).unwrap();
        assert!(r.points.iter().all(|p| p.q_hat == 0.0));
    }

    #[test]
    fn reports_are_deterministic() {
        let m = preset::ornstein_uhlenbeck().build().unwrap();
        let ev = EventSpec::TerminalHalfSpace {
            normal: v(&[1.0]),
            level: 0.2,
        };
        let a = mc_probability(&m, &v(&[0.0]), 30, PerturbationLevel::ZERO, &ev, &McSettings::new(3000, 8)).unwrap();
        let b = mc_probability(&m, &v(&[0.0]), 30, PerturbationLevel::ZERO, &ev, &mc(3000, 8)).unwrap();
        assert_eq!(a.p_hat, b.p_hat);
        assert_eq!(a.stderr, b.stderr);
    }
}
