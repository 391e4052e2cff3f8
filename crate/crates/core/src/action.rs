//! The rate functional on polygonal paths and its constrained minimization.
//!
//! ```text
//! I^x(f) = int_0^1 G*(f(s), f'(s)) ds    if f(0) = x,    +infinity otherwise
//! ```
//!
//! On a polygon `f'` is constant per segment, and each segment is integrated
//! with five-point Gauss-Legendre. With a perturbation level `a > 0` the
//! integrand is the conjugate of `G^a`, which is finite everywhere.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;

use crate::conjugate::{perturbed_fenchel, ConjugateSettings, ConjugateStatus};
use crate::kernel::{check_dim, check_finite, KernelModel, PerturbationLevel, Perturbed};
use crate::quadrature::unit_rule;
use crate::scheme::Trajectory;
use crate::{Error, Result, Vector};

/// Finite stand-in for a divergent segment inside the optimizer.
const SURROGATE: f64 = 1e12;

/// Distance from `x` beyond which `f(0) != x`.
pub const START_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteReason {
    InitialCondition,
    DivergentSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionValue {
    /// `+infinity` when `reason` is set.
    pub value: f64,
    /// Contribution of each segment (`+infinity` for divergent ones).
    pub segments: Vec<f64>,
    pub reason: Option<InfiniteReason>,
}

impl ActionValue {
    pub fn is_finite(&self) -> bool {
        self.reason.is_none()
    }
}

/// Integrand evaluations of one segment: value, and (when finite) the
/// conjugate maximizers at the quadrature nodes.
struct SegmentEval {
    value: f64,
    maximizers: Option<Vec<Vector>>,
}

fn eval_segment<M: KernelModel + ?Sized>(
    model: &M,
    a: PerturbationLevel,
    left: &Vector,
    right: &Vector,
    n: usize,
    segment: usize,
    settings: &ConjugateSettings,
) -> Result<SegmentEval> {
    let h = 1.0 / n as f64;
    let slope = (right - left) * n as f64;
    let mut value = 0.0;
    let mut maximizers = Vec::with_capacity(5);
    for (u, w) in unit_rule() {
        let y = left * (1.0 - u) + right * u;
        let r = perturbed_fenchel(model, a, &y, &slope, settings)?;
        match r.status {
            ConjugateStatus::Converged => {
                value += w * h * r.value;
                maximizers.push(r.argmax.expect("converged result carries its maximizer"));
            }
            ConjugateStatus::Divergent => {
                return Ok(SegmentEval {
                    value: f64::INFINITY,
                    maximizers: None,
                })
            }
            ConjugateStatus::MaxIterations => return Err(Error::ConjugateMaxIterations { segment }),
        }
    }
    Ok(SegmentEval {
        value,
        maximizers: Some(maximizers),
    })
}

/// `I^x(f)` (or its perturbed analogue) on a polygon.
pub fn action<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    a: PerturbationLevel,
    f: &Trajectory,
    settings: &ConjugateSettings,
) -> Result<ActionValue> {
    check_dim(x, model.dim(), "start point")?;
    check_dim(f.start(), model.dim(), "path")?;
    let n = f.n();
    let mut segments = Vec::with_capacity(n);
    let mut divergent = false;
    for k in 1..=n {
        let seg = eval_segment(model, a, f.knot(k - 1), f.knot(k), n, k, settings)?;
        divergent |= seg.value.is_infinite();
        segments.push(seg.value);
    }
    let reason = if (f.start() - x).norm() > START_TOL {
        Some(InfiniteReason::InitialCondition)
    } else if divergent {
        Some(InfiniteReason::DivergentSegment)
    } else {
        None
    };
    let value = if reason.is_some() {
        f64::INFINITY
    } else {
        segments.iter().sum()
    };
    Ok(ActionValue {
        value,
        segments,
        reason,
    })
}

/// Discretized action and its gradient with respect to every knot.
///
/// `dG*/dz` is the conjugate maximizer and `dG*/dy = -grad_y G(y, alpha*)`,
/// the latter by central differences with step `fd_step`. Divergent segments
/// count as [`SURROGATE`] and contribute no gradient.
pub(crate) struct ActionGradient {
    pub value: f64,
    pub grad: Vec<Vector>,
    pub barrier: bool,
}

pub(crate) fn action_with_gradient<M: KernelModel + ?Sized>(
    model: &M,
    a: PerturbationLevel,
    knots: &[Vector],
    fd_step: f64,
    settings: &ConjugateSettings,
) -> Result<ActionGradient> {
    let n = knots.len() - 1;
    let h = 1.0 / n as f64;
    let d = knots[0].len();
    let g = Perturbed::new(model, a);
    let mut grad = vec![Vector::zeros(d); n + 1];
    let mut value = 0.0;
    let mut barrier = false;
    for k in 1..=n {
        let (left, right) = (&knots[k - 1], &knots[k]);
        let seg = eval_segment(model, a, left, right, n, k, settings)?;
        let Some(maxs) = seg.maximizers else {
            value += SURROGATE;
            barrier = true;
            continue;
        };
        value += seg.value;
        for ((u, w), alpha) in unit_rule().into_iter().zip(maxs) {
            let y = left * (1.0 - u) + right * u;
            let dy = Vector::from_fn(d, |i, _| {
                let mut up = y.clone();
                let mut dn = y.clone();
                up[i] += fd_step;
                dn[i] -= fd_step;
                -(g.cgf(&up, &alpha) - g.cgf(&dn, &alpha)) / (2.0 * fd_step)
            });
            grad[k - 1] += (&dy * (1.0 - u) * h - &alpha) * w;
            grad[k] += (&dy * u * h + &alpha) * w;
        }
    }
    Ok(ActionGradient { value, grad, barrier })
}

/// Fourth-order Runge-Kutta solution of `f' = grad G(f, 0)`, `f(0) = x`, on
/// `[0, 1]`, returned as a polygon with `steps` segments.
pub fn limit_ode<M: KernelModel + ?Sized>(model: &M, x: &Vector, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    check_dim(x, model.dim(), "start point")?;
    check_finite(x, "start point")?;
    let sub = 1000usize.div_ceil(steps).max(1);
    let h = 1.0 / (steps * sub) as f64;
    let field = |y: &Vector| model.mean(y);
    let mut state = x.clone();
    let mut knots = Vec::with_capacity(steps + 1);
    knots.push(state.clone());
    for k in 1..=steps {
        for _ in 0..sub {
            let k1 = field(&state);
            let k2 = field(&(&state + &k1 * (0.5 * h)));
            let k3 = field(&(&state + &k2 * (0.5 * h)));
            let k4 = field(&(&state + &k3 * h));
            state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: k });
        }
        knots.push(state.clone());
    }
    Trajectory::new(knots)
}

/// Terminal constraint of a minimum-action problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    /// `f(1) = target`; `tolerance` only enters the feasibility report.
    Point { target: Vector, tolerance: f64 },
    /// `<f(1), normal> >= level`.
    HalfSpace { normal: Vector, level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizeSettings {
    pub max_iter: usize,
    /// Stationarity certificate: projected gradient norm at most this.
    pub grad_tol: f64,
    /// L-BFGS memory.
    pub memory: usize,
    /// Central-difference step for `grad_y G`.
    pub fd_step: f64,
    pub conjugate: ConjugateSettings,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-7,
            memory: 10,
            fd_step: 1e-5,
            conjugate: ConjugateSettings::default(),
        }
    }
}

pub struct ActionProblem<'m, M: ?Sized> {
    pub model: &'m M,
    pub x: Vector,
    pub terminal: Terminal,
    /// Knot count `m >= 2` (so `m - 1` segments).
    pub knots: usize,
    pub a: PerturbationLevel,
    pub settings: MinimizeSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub iterations: usize,
    pub grad_norm: f64,
    pub stationary: bool,
    /// Line search could not decrease the objective; the result is the best iterate.
    pub line_search_failed: bool,
    /// The optimizer never left the surrogate region for divergent segments.
    pub barrier: bool,
    /// `<dJ/df(1), normal> / |normal|^2` at a binding half-space constraint.
    pub multiplier: Option<f64>,
    pub terminal_feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub path: Trajectory,
    pub value: ActionValue,
    pub certificate: Certificate,
    pub log: Vec<LogRow>,
}

/// How optimizer variables map onto knots.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    FixedEnd,
    OnHyperplane,
    FreeEnd,
}

struct Layout<'a> {
    x: &'a Vector,
    end: Vector,
    normal: Vector,
    level: f64,
    n: usize,
    d: usize,
    mode: Mode,
}

impl Layout<'_> {
    fn project(&self, u: &Vector) -> Vector {
        let nn = self.normal.norm_squared();
        u - &self.normal * ((u.dot(&self.normal) - self.level) / nn)
    }

    fn knots(&self, v: &[f64]) -> Vec<Vector> {
        let d = self.d;
        let mut ks = Vec::with_capacity(self.n + 1);
        ks.push(self.x.clone());
        for k in 1..self.n {
            ks.push(Vector::from_column_slice(&v[(k - 1) * d..k * d]));
        }
        let tail = (self.n - 1) * d;
        ks.push(match self.mode {
            Mode::FixedEnd => self.end.clone(),
            Mode::OnHyperplane => self.project(&Vector::from_column_slice(&v[tail..tail + d])),
            Mode::FreeEnd => Vector::from_column_slice(&v[tail..tail + d]),
        });
        ks
    }

    fn variables(&self, knots: &[Vector]) -> Vec<f64> {
        let mut v: Vec<f64> = knots[1..self.n].iter().flat_map(|k| k.iter().copied()).collect();
        if self.mode != Mode::FixedEnd {
            v.extend(knots[self.n].iter().copied());
        }
        v
    }

    fn reduce_grad(&self, grad: &[Vector]) -> Vec<f64> {
        let mut g: Vec<f64> = grad[1..self.n].iter().flat_map(|k| k.iter().copied()).collect();
        match self.mode {
            Mode::FixedEnd => {}
            Mode::OnHyperplane => {
                let nn = self.normal.norm_squared();
                let gm = &grad[self.n];
                let t = gm - &self.normal * (gm.dot(&self.normal) / nn);
                g.extend(t.iter().copied());
            }
            Mode::FreeEnd => g.extend(grad[self.n].iter().copied()),
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct LbfgsRun {
    knots: Vec<Vector>,
    terminal_grad: Vector,
    grad_norm: f64,
    iterations: usize,
    line_search_failed: bool,
    barrier: bool,
}

fn lbfgs<M: KernelModel + ?Sized>(
    model: &M,
    a: PerturbationLevel,
    layout: &Layout<'_>,
    start: &[Vector],
    settings: &MinimizeSettings,
    log: &mut Vec<LogRow>,
) -> Result<LbfgsRun> {
    let eval = |v: &[f64]| -> Result<(f64, Vec<f64>, Vector, bool)> {
        let ks = layout.knots(v);
        let ag = action_with_gradient(model, a, &ks, settings.fd_step, &settings.conjugate)?;
        let g = layout.reduce_grad(&ag.grad);
        Ok((ag.value, g, ag.grad[layout.n].clone(), ag.barrier))
    };

    let mut v = layout.variables(start);
    let (mut value, mut grad, mut gm, mut barrier) = eval(&v)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut line_search_failed = false;
    let offset = log.last().map_or(0, |r| r.iter + 1);
    log.push(LogRow {
        iter: offset,
        value,
        grad_norm: norm(&grad),
        step: 0.0,
    });

    let mut iterations = 0;
    while iterations < settings.max_iter && norm(&grad) > settings.grad_tol && !v.is_empty() {
        iterations += 1;
        // Two-loop recursion.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let al = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= al * yi);
            alphas.push(al);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), al) in history.iter().zip(alphas.into_iter().rev()) {
            let be = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (al - be) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|x| -x).collect();
        if dot(&dir, &grad) >= 0.0 {
            dir = grad.iter().map(|x| -x).collect();
            history.clear();
        }
        if history.is_empty() {
            // First step: keep the move comparable to the knot scale.
            let len = norm(&dir);
            let cap = 0.1 * (1.0 + norm(&v));
            if len > cap {
                dir.iter_mut().for_each(|x| *x *= cap / len);
            }
        }

        let slope = dot(&grad, &dir);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = v.iter().zip(&dir).map(|(x, p)| x + step * p).collect();
            let (tv, tg, tm, tb) = eval(&trial)?;
            if tv <= value + 1e-4 * step * slope {
                accepted = Some((trial, tv, tg, tm, tb));
                break;
            }
            step *= 0.5;
        }
        let Some((nv, nval, ngrad, nm, nb)) = accepted else {
            line_search_failed = true;
            break;
        };
        let s: Vec<f64> = nv.iter().zip(&v).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ngrad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > settings.memory {
                history.pop_front();
            }
        }
        v = nv;
        value = nval;
        grad = ngrad;
        gm = nm;
        barrier = nb;
        log.push(LogRow {
            iter: offset + iterations,
            value,
            grad_norm: norm(&grad),
            step,
        });
    }

    Ok(LbfgsRun {
        knots: layout.knots(&v),
                terminal_grad: gm,
        grad_norm: norm(&grad),
        iterations,
        line_search_failed,
        barrier,
    })
}

/// Minimizes the discretized action over uniform-knot polygons from `x`
/// subject to the terminal constraint.
///
/// Starts from the straight line to the target (or to the foot point of the
/// half-space). For a half-space the terminal knot first moves on the
/// boundary hyperplane; if the resulting multiplier shows the constraint is
/// not binding the terminal knot is released and the problem re-solved.
pub fn minimize_action<M: KernelModel + ?Sized>(problem: &ActionProblem<'_, M>) -> Result<MinimizeOutcome> {
    let model = problem.model;
    let d = model.dim();
    let x = &problem.x;
    check_dim(x, d, "start point")?;
    check_finite(x, "start point")?;
    if problem.knots < 2 {
        return Err(Error::InvalidParameter("knot count must be at least 2".into()));
    }
    let n = problem.knots - 1;
    let settings = &problem.settings;

    let (end, normal, level, mode) = match &problem.terminal {
        Terminal::Point { target, .. } => {
            check_dim(target, d, "terminal point")?;
            check_finite(target, "terminal point")?;
            (target.clone(), Vector::zeros(d), 0.0, Mode::FixedEnd)
        }
        Terminal::HalfSpace { normal, level } => {
            check_dim(normal, d, "half-space normal")?;
            check_finite(normal, "half-space normal")?;
            let nn = normal.norm_squared();
            if nn == 0.0 || !level.is_finite() {
                return Err(Error::InvalidParameter("half-space needs a nonzero normal and finite level".into()));
            }
            let shortfall = level - x.dot(normal);
            if shortfall > 0.0 {
                (x + normal * (shortfall / nn), normal.clone(), *level, Mode::OnHyperplane)
            } else {
                (x.clone(), normal.clone(), *level, Mode::FreeEnd)
            }
        }
    };

    let initial = Trajectory::straight_line(x, &end, n)?;
    let initial_value = action(model, x, problem.a, &initial, &settings.conjugate)?;
    if !initial_value.is_finite() {
        return Err(Error::Infeasible(
            "the straight-line candidate has infinite action".into(),
        ));
    }

    let mut layout = Layout {
        x,
        end,
        normal,
        level,
        n,
        d,
        mode,
    };
    let mut log = Vec::new();
    let mut run = lbfgs(model, problem.a, &layout, initial.knots(), settings, &mut log)?;
    let mut multiplier = None;
    let mut iterations = run.iterations;

    if layout.mode == Mode::OnHyperplane {
        let nn = layout.normal.norm_squared();
        let mu = run.terminal_grad.dot(&layout.normal) / nn;
        multiplier = Some(mu);
        if mu < -settings.grad_tol {
            layout.mode = Mode::FreeEnd;
            let free = lbfgs(model, problem.a, &layout, &run.knots, settings, &mut log)?;
            iterations += free.iterations;
            if free.knots[n].dot(&layout.normal) >= layout.level {
                multiplier = None;
                run = free;
            }
        }
    }

    let path = Trajectory::new(run.knots)?;
    let value = action(model, x, problem.a, &path, &settings.conjugate)?;
    let terminal_feasible = match &problem.terminal {
        Terminal::Point { target, tolerance } => (path.end() - target).norm() <= *tolerance,
        Terminal::HalfSpace { normal, level } => path.end().dot(normal) >= level - 1e-9 * (1.0 + level.abs()),
    };
    Ok(MinimizeOutcome {
        path,
        value,
        certificate: Certificate {
            iterations,
            grad_norm: run.grad_norm,
            stationary: run.grad_norm <= settings.grad_tol,
            line_search_failed: run.line_search_failed,
            barrier: run.barrier,
            multiplier,
            terminal_feasible,
        },
        log,
    })
}

/// Iteration log as CSV: `iter,value,grad_norm,step`.
pub fn write_log_csv<W: Write>(log: &[LogRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
