//! The recursive scheme, its polygonal interpolation and the dual functionals.
//!
//! For a start point `x` and step count `n` the scheme is
//!
//! ```text
//! X_0 = x,    X_k = X_{k-1} + (F_k(X_{k-1}) + a g_k) / n,    k = 1..n
//! ```
//!
//! with i.i.d. increment fields `F_k` and independent standard Gaussian
//! `g_k`. `Y_n` is the polygon through `X_k` at `t = k / n`. For an atomic
//! measure `lambda` the discrete functional
//!
//! ```text
//! Phi_n(f, lambda) = <x, lambda(T)> + sum_i G^a(f((i-1)/n), n^-1 int phi_ni d lambda)
//! ```
//!
//! satisfies `E exp[<Y_n, lambda> - Phi_n(Y_n, lambda)] = 1`, and
//! `n^-1 Phi_n(f, n lambda)` converges to
//! `Phi(f, lambda) = <x, lambda(T)> + int_0^1 G^a(f(s), lambda([s, 1])) ds`.

mod dual;
mod trajectory;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

pub use dual::{AtomRecord, DualMeasure};
pub use trajectory::Trajectory;

use crate::kernel::{check_dim, check_finite, AffineNoiseModel, KernelModel, PerturbationLevel, Perturbed};
use crate::quadrature;
use crate::rng::{stream, Stream};
use crate::{Error, Result, Vector};

/// The ramp basis `phi_ni(t) = (nt - (i-1)) 1[(i-1)/n, i/n)(t) + 1[i/n, 1](t)`,
/// `1 <= i <= n`. Every polygon on the `1/n` grid is
/// `f(t) = f(0) + sum_i (f(i/n) - f((i-1)/n)) phi_ni(t)`.
pub fn basis_phi(n: usize, i: usize, t: f64) -> f64 {
    debug_assert!(i >= 1 && i <= n);
    let r = t * n as f64;
    let lo = (i - 1) as f64;
    if r >= i as f64 {
        1.0
    } else if r >= lo {
        r - lo
    } else {
        0.0
    }
}

/// One simulation of the scheme.
#[derive(Clone, Copy)]
pub struct SchemeRun<'m, M: ?Sized> {
    pub model: &'m M,
    pub x: &'m Vector,
    pub n: usize,
    pub a: PerturbationLevel,
    pub seed: u64,
}

impl<'m, M: KernelModel + ?Sized> SchemeRun<'m, M> {
    pub fn new(model: &'m M, x: &'m Vector, n: usize, a: PerturbationLevel, seed: u64) -> Self {
        Self { model, x, n, a, seed }
    }

    /// Simulates on replica 0 of the run's seed.
    pub fn simulate(&self) -> Result<Trajectory> {
        self.simulate_with(&mut stream(self.seed, 0))
    }

    /// Simulates on a caller-owned stream. Each step draws the increment and
    /// then the Gaussian perturbation (drawn, and ignored, when `a = 0`).
    pub fn simulate_with(&self, rng: &mut dyn RngCore) -> Result<Trajectory> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        check_dim(self.x, self.model.dim(), "start point")?;
        check_finite(self.x, "start point")?;
        let perturbed = Perturbed::new(self.model, self.a);
        let inv_n = 1.0 / self.n as f64;
        let mut knots = Vec::with_capacity(self.n + 1);
        let mut state = self.x.clone();
        knots.push(state.clone());
        for k in 1..=self.n {
            let inc = perturbed.sample_increment(&state, rng);
            state += inc * inv_n;
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { step: k });
            }
            knots.push(state.clone());
        }
        Trajectory::new(knots)
    }
}

/// Convenience wrapper around [`SchemeRun::simulate`].
pub fn simulate<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    n: usize,
    a: PerturbationLevel,
    seed: u64,
) -> Result<Trajectory> {
    SchemeRun::new(model, x, n, a, seed).simulate()
}

/// Value of the polygon at `t`.
pub fn eval_path(traj: &Trajectory, t: f64) -> Result<Vector> {
    traj.eval(t)
}

/// Modulus of continuity of the polygon.
pub fn modulus(traj: &Trajectory, delta: f64) -> Result<f64> {
    traj.modulus(delta)
}

/// `<f, lambda> = sum_j <f(t_j), alpha_j>`.
pub fn dual_pairing(traj: &Trajectory, lambda: &DualMeasure) -> f64 {
    lambda
        .atoms()
        .iter()
        .map(|(t, a)| traj.eval_unchecked(*t).dot(a))
        .sum()
}

/// The discrete functional `Phi_n^{x,a}(f, lambda)` with `n = traj.n()`.
pub fn phi_n<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    a: PerturbationLevel,
    traj: &Trajectory,
    lambda: &DualMeasure,
) -> f64 {
    let n = traj.n();
    let g = Perturbed::new(model, a);
    let inv_n = 1.0 / n as f64;
    let mut total = x.dot(&lambda.total_mass());
    if lambda.atoms().is_empty() {
        return total;
    }
    for i in 1..=n {
        let weight = lambda.basis_integral(n, i) * inv_n;
        total += g.cgf(traj.knot(i - 1), &weight);
    }
    total
}

/// The limiting functional `Phi^{x,a}(f, lambda)`.
///
/// `lambda([s, 1])` is constant between consecutive atom times, and `f` is
/// affine between its knots; each piece of the merged grid is integrated
/// with five-point Gauss-Legendre.
pub fn phi_limit<M: KernelModel + ?Sized>(
    model: &M,
    x: &Vector,
    a: PerturbationLevel,
    f: &Trajectory,
    lambda: &DualMeasure,
) -> f64 {
    let g = Perturbed::new(model, a);
    let mut total = x.dot(&lambda.total_mass());
    if lambda.atoms().is_empty() {
        return total;
    }
    let mut breaks: Vec<f64> = (0..=f.n()).map(|k| f.time(k)).collect();
    breaks.extend(lambda.atoms().iter().map(|(t, _)| *t));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        // No atom lies strictly inside (lo, hi).
        let tail = lambda
            .atoms()
            .iter()
            .filter(|(t, _)| *t > lo)
            .fold(Vector::zeros(lambda.dim()), |acc, (_, a)| acc + a);
        total += quadrature::integrate(lo, hi, |s| g.cgf(&f.eval_unchecked(s), &tail));
    }
    total
}

/// Coupled distance between the perturbed and unperturbed schemes and the
/// pathwise bound
///
/// ```text
/// sup_k |X^a_k - X_k| <= n^-1 a (sum_j |g_j|) exp(n^-1 sum_i H_i)
/// ```
///
/// with `H_i = |F_i(X^a_{i-1}) - F_i(X_{i-1})| / |X^a_{i-1} - X_{i-1}|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledGap {
    pub gap: f64,
    pub bound: f64,
}

/// Runs both schemes on common random numbers: the same base draw `Z_k`
/// drives `F_k` at both states. Uses the stream layout of
/// [`SchemeRun::simulate`], so each side equals the corresponding
/// uncoupled simulation with the same seed.
pub fn coupled_perturbation_gap(
    model: &AffineNoiseModel,
    x: &Vector,
    n: usize,
    a: PerturbationLevel,
    seed: u64,
) -> Result<CoupledGap> {
    coupled_perturbation_gap_with(model, x, n, a, &mut stream(seed, 0))
}

pub fn coupled_perturbation_gap_with(
    model: &AffineNoiseModel,
    x: &Vector,
    n: usize,
    a: PerturbationLevel,
    rng: &mut Stream,
) -> Result<CoupledGap> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    check_dim(x, model.dim(), "start point")?;
    let inv_n = 1.0 / n as f64;
    let d = model.dim();
    let mut plain = x.clone();
    let mut pert = x.clone();
    let mut gap = 0.0f64;
    let mut sum_g = 0.0;
    let mut sum_h = 0.0;
    for k in 1..=n {
        let z = model.base().sample(rng);
        let g = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let f_plain = model.increment(&plain, &z);
        let f_pert = model.increment(&pert, &z);
        let dist = (&pert - &plain).norm();
        if dist > 0.0 {
            sum_h += (&f_pert - &f_plain).norm() / dist;
        }
        sum_g += g.norm();
        plain += f_plain * inv_n;
        pert += (f_pert + g * a.value()) * inv_n;
        if plain.iter().chain(pert.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: k });
        }
        gap = gap.max((&pert - &plain).norm());
    }
    let bound = inv_n * a.value() * sum_g * (inv_n * sum_h).exp();
    Ok(CoupledGap { gap, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::preset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn lvl(a: f64) -> PerturbationLevel {
        PerturbationLevel::new(a).unwrap()
    }

    #[test]
    fn basis_examples() {
        assert_eq!(basis_phi(4, 2, 1.0), 1.0);
        assert_relative_eq!(basis_phi(4, 2, 0.3), 0.2, epsilon = 1e-15);
        assert_eq!(basis_phi(4, 3, 0.3), 0.0);
        for i in 1..=7 {
            assert_eq!(basis_phi(7, i, 1.0), 1.0);
        }
    }

    #[test]
    fn deterministic_schemes() {
        let zero = preset::deterministic_linear(&[&[0.0]], &[0.0]).build().unwrap();
        let x = v(&[1.7]);
        let f = simulate(&zero, &x, 10, PerturbationLevel::ZERO, 1).unwrap();
        assert!(f.knots().iter().all(|k| *k == x));

        let unit = preset::deterministic_linear(&[&[0.0]], &[1.0]).build().unwrap();
        let f = simulate(&unit, &v(&[0.0]), 4, PerturbationLevel::ZERO, 1).unwrap();
        let got: Vec<f64> = f.knots().iter().map(|k| k[0]).collect();
        assert_eq!(got, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let decay = preset::deterministic_linear(&[&[-1.0]], &[0.0]).build().unwrap();
        let f = simulate(&decay, &v(&[1.0]), 100, PerturbationLevel::ZERO, 1).unwrap();
        for (k, knot) in f.knots().iter().enumerate() {
            assert_relative_eq!(knot[0], 0.99f64.powi(k as i32), max_relative = 1e-12);
        }
        assert!((f.end()[0] / (-1f64).exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn simulation_is_deterministic_and_coupled_by_seed() {
        let m = preset::linear_2d().build().unwrap();
        let x = v(&[0.5, -0.5]);
        let a = simulate(&m, &x, 50, lvl(0.3), 99).unwrap();
        let b = simulate(&m, &x, 50, lvl(0.3), 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &x, 50, lvl(0.3), 100).unwrap();
        assert_ne!(a, c);

        let plain = simulate(&m, &x, 50, PerturbationLevel::ZERO, 99).unwrap();
        let gap = coupled_perturbation_gap(&m, &x, 50, lvl(0.3), 99).unwrap();
        assert_relative_eq!(gap.gap, a.sup_distance(&plain), max_relative = 1e-12);
    }

    #[test]
    fn blowup_is_reported() {
        let m = preset::deterministic_linear(&[&[1e200]], &[0.0]).build().unwrap();
        let err = simulate(&m, &v(&[1e200]), 5, PerturbationLevel::ZERO, 0).unwrap_err();
        assert_eq!(err, Error::Blowup { step: 1 });
    }

    #[test]
    fn pairing_examples() {
        let f = simulate(&preset::linear_2d().build().unwrap(), &v(&[0.1, 0.2]), 20, lvl(0.0), 3).unwrap();
        assert_eq!(dual_pairing(&f, &DualMeasure::zero(2)), 0.0);
        let alpha = v(&[0.7, -1.1]);
        let at_end = DualMeasure::point(1.0, alpha.clone()).unwrap();
        assert_eq!(dual_pairing(&f, &at_end), f.end().dot(&alpha));

        let c = v(&[2.0, -1.0]);
        let flat = Trajectory::constant(&c, 8).unwrap();
        let lam = DualMeasure::new(2, vec![(0.1, v(&[1.0, 0.0])), (0.55, v(&[0.5, 3.0]))]).unwrap();
        assert_relative_eq!(dual_pairing(&flat, &lam), c.dot(&lam.total_mass()), max_relative = 1e-15);
    }

    #[test]
    fn phi_n_examples() {
        let m = preset::standard_gaussian(2).build().unwrap();
        let x = v(&[0.3, -0.4]);
        let f = simulate(&m, &x, 16, lvl(0.0), 5).unwrap();
        assert_eq!(phi_n(&m, &x, lvl(0.0), &f, &DualMeasure::zero(2)), 0.0);

        let alpha = v(&[1.5, 0.5]);
        let lam = DualMeasure::point(1.0, alpha.clone()).unwrap();
        let want = x.dot(&alpha) + alpha.norm_squared() / (2.0 * 16.0);
        assert_relative_eq!(phi_n(&m, &x, lvl(0.0), &f, &lam), want, max_relative = 1e-14);

        // sigma = 0: only the drift term survives.
        let det = preset::deterministic_linear(&[&[-1.0]], &[0.5]).build().unwrap();
        let x1 = v(&[1.0]);
        let f = Trajectory::new((0..=10).map(|k| v(&[(k as f64 * 0.37).sin()])).collect()).unwrap();
        let alpha = v(&[2.0]);
        let lam = DualMeasure::point(1.0, alpha.clone()).unwrap();
        let drift_sum: f64 = (1..=10).map(|i| (-f.knot(i - 1)[0] + 0.5) * alpha[0]).sum();
        let want = x1.dot(&alpha) + drift_sum / 10.0;
        assert_relative_eq!(phi_n(&det, &x1, lvl(0.0), &f, &lam), want, max_relative = 1e-14);
    }

    #[test]
    fn phi_limit_examples() {
        let m = preset::standard_gaussian(1).build().unwrap();
        let x = v(&[0.2]);
        let f = simulate(&m, &x, 7, lvl(0.0), 8).unwrap();
        assert_eq!(phi_limit(&m, &x, lvl(0.0), &f, &DualMeasure::zero(1)), 0.0);
        let lam = DualMeasure::point(1.0, v(&[1.3])).unwrap();
        assert_relative_eq!(
            phi_limit(&m, &x, lvl(0.0), &f, &lam),
            0.2 * 1.3 + 1.3 * 1.3 / 2.0,
            max_relative = 1e-14
        );

        // sigma = 0, b(y) = y, f(s) = s: int_0^1 s ds.
        let lin = preset::deterministic_linear(&[&[1.0]], &[0.0]).build().unwrap();
        let f = Trajectory::straight_line(&v(&[0.0]), &v(&[1.0]), 3).unwrap();
        let lam = DualMeasure::point(1.0, v(&[1.0])).unwrap();
        assert_relative_eq!(phi_limit(&lin, &v(&[0.0]), lvl(0.0), &f, &lam), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn phi_limit_with_interior_atoms_matches_fine_riemann_sum() {
        let m = preset::ornstein_uhlenbeck().build().unwrap();
        let x = v(&[0.4]);
        let f = simulate(&m, &x, 9, lvl(0.0), 21).unwrap();
        let lam = DualMeasure::new(1, vec![(0.33, v(&[0.8])), (0.71, v(&[-0.5]))]).unwrap();
        let a = lvl(0.25);
        let g = Perturbed::new(&m, a);
        let steps = 400_000;
        let h = 1.0 / steps as f64;
        let riemann: f64 = (0..steps)
            .map(|k| {
                let s = (k as f64 + 0.5) * h;
                g.cgf(&f.eval(s).unwrap(), &lam.tail_mass(s)) * h
            })
            .sum();
        let want = x.dot(&lam.total_mass()) + riemann;
        assert!((phi_limit(&m, &x, a, &f, &lam) - want).abs() < 1e-8);
    }

    #[test]
    fn scaling_limit_trend() {
        let m = preset::ornstein_uhlenbeck().build().unwrap();
        let x = v(&[1.0]);
        let f = Trajectory::new((0..=50).map(|k| v(&[(-(k as f64) / 50.0).exp()])).collect()).unwrap();
        let lam = DualMeasure::new(1, vec![(0.4, v(&[0.6])), (1.0, v(&[1.0]))]).unwrap();
        let limit = phi_limit(&m, &x, lvl(0.5), &f, &lam);
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000] {
            let fn_ = f.resample(n).unwrap();
            let scaled = phi_n(&m, &x, lvl(0.5), &fn_, &lam.scaled(n as f64)) / n as f64;
            let err = (scaled - limit).abs();
            assert!(err < last, "n={n}: {err} !< {last}");
            last = err;
        }
        assert!(last <= 1e-3);
    }

    #[test]
    fn coupled_gap_cases() {
        let m = preset::ornstein_uhlenbeck().build().unwrap();
        let x = v(&[0.5]);
        let g = coupled_perturbation_gap(&m, &x, 40, PerturbationLevel::ZERO, 4).unwrap();
        assert_eq!((g.gap, g.bound), (0.0, 0.0));

        // b = 0, sigma = 0: the gap is a scaled random walk of the g draws.
        let flat = preset::deterministic_linear(&[&[0.0]], &[0.0]).build().unwrap();
        let x = v(&[0.0]);
        let got = coupled_perturbation_gap(&flat, &x, 4, lvl(1.0), 11).unwrap();
        let mut rng = stream(11, 0);
        let mut walk = 0.0f64;
        let mut best = 0.0f64;
        for _ in 0..4 {
            let _z = flat.base().sample(&mut rng);
            let g: f64 = StandardNormal.sample(&mut rng);
            walk += g;
            best = best.max(walk.abs());
        }
        assert_relative_eq!(got.gap, best / 4.0, max_relative = 1e-14);
    }

    /// The (3.9)-style expansion evaluated independently of `eval`.
    fn basis_expansion(f: &Trajectory, t: f64) -> Vector {
        let n = f.n();
        let mut acc = f.knot(0).clone();
        for i in 1..=n {
            acc += (f.knot(i) - f.knot(i - 1)) * basis_phi(n, i, t);
        }
        acc
    }

    proptest! {
        #[test]
        fn interpolation_identity(
            xs in prop::collection::vec(-5.0f64..5.0, 2..40),
            t in 0.0f64..=1.0,
        ) {
            let f = Trajectory::new(xs.iter().map(|&x| v(&[x, 0.5 * x - 1.0])).collect()).unwrap();
            let direct = f.eval(t).unwrap();
            let expanded = basis_expansion(&f, t);
            prop_assert!((direct - expanded).norm() <= 1e-12);
        }

        #[test]
        fn coupled_gap_within_lipschitz_bound(
            seed in 0u64..10_000,
            a in 0.0f64..2.0,
            which in 0usize..3,
        ) {
            let spec = match which {
                0 => preset::ornstein_uhlenbeck(),
                1 => preset::deterministic_linear(&[&[-2.0]], &[1.0]),
                _ => preset::linear_2d(),
            };
            let m = spec.build().unwrap();
            let x = Vector::from_element(m.dim(), 0.3);
            let g = coupled_perturbation_gap(&m, &x, 60, lvl(a), seed).unwrap();
            prop_assert!(g.gap <= g.bound * (1.0 + 1e-12));
        }
    }
}
