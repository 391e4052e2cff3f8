use euler_ldp::action::MinimizeSettings;
use euler_ldp::kernel::preset;
use euler_ldp::rare_event::{
    martingale_check, mc_probability, tilted_mc_probability, verify_rate, EventSpec, McSettings,
};
use euler_ldp::{DualMeasure, KernelModel, PerturbationLevel, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[test]
fn martingale_identity_for_every_shipped_model() {
    for (k, (name, spec)) in preset::shipped().into_iter().enumerate() {
        let m = spec.build().unwrap();
        let d = m.dim();
        let x = Vector::from_element(d, 0.2);
        // Total variation 1.5 + 0.5 = 2.
        let lam = DualMeasure::new(
            d,
            vec![
                (0.3, Vector::from_element(d, 1.5 / (d as f64).sqrt())),
                (1.0, Vector::from_element(d, -0.5 / (d as f64).sqrt())),
            ],
        )
        .unwrap();
        for n in [10, 50] {
            for a in [0.0, 0.5] {
                let mc = McSettings::new(100_000, 50 + k as u64 * 7 + n as u64).with_workers(workers());
                let r = martingale_check(&m, &x, n, PerturbationLevel::new(a).unwrap(), &lam, &mc).unwrap();
                assert!(r.within(4.0), "{name} n={n} a={a}: {r:?}");
            }
        }
    }
}

#[test]
fn naive_and_tilted_agree_on_moderately_rare_events() {
    for (name, x, normal, level) in [
        ("gaussian-ou", v(&[0.0]), v(&[1.0]), 0.35),
        ("gaussian-linear-2d", v(&[0.0, 0.0]), v(&[0.6, 0.8]), 0.45),
        ("gaussian-logistic", v(&[0.2]), v(&[1.0]), 0.75),
    ] {
        let m = preset::by_name(name).unwrap().build().unwrap();
        let n = 20;
        let event = EventSpec::TerminalHalfSpace {
            normal: normal.clone(),
            level,
        };
        let naive = mc_probability(&m, &x, n, PerturbationLevel::ZERO, &event, &McSettings::new(200_000, 1).with_workers(workers()))
            .unwrap();
        assert!(naive.p_hat >= 1e-3, "{name}: {naive:?}");
        let tilted = tilted_mc_probability(&m, &x, n, &normal, level, &McSettings::new(50_000, 2).with_workers(workers()))
            .unwrap();
        let joint = (naive.stderr.powi(2) + tilted.stderr.powi(2)).sqrt();
        assert!(
            (naive.p_hat - tilted.p_hat).abs() <= 4.0 * joint,
            "{name}: naive {} tilted {} joint se {joint}",
            naive.p_hat,
            tilted.p_hat
        );
    }
}

#[test]
fn gaussian_rate_gap_shrinks_along_doubling_grid() {
    let m = preset::standard_gaussian(1).build().unwrap();
    let r = verify_rate(
        &m,
        &v(&[0.0]),
        &v(&[1.0]),
        1.0,
        &[25, 50, 100, 200],
        &McSettings::new(20_000, 17).with_workers(workers()),
        21,
        &MinimizeSettings::default(),
    )
    .unwrap();
    assert!(r.trend_ok, "{r:?}");
    assert!(r.final_gap().unwrap() <= 0.15);
    assert!((r.predicted_rate - 0.5).abs() < 1e-6);
}

#[test]
fn ou_rate_matches_minimum_action() {
    let m = preset::ornstein_uhlenbeck().build().unwrap();
    let r = verify_rate(
        &m,
        &v(&[0.0]),
        &v(&[1.0]),
        0.8,
        &[50, 100, 200],
        &McSettings::new(20_000, 23).with_workers(workers()),
        21,
        &MinimizeSettings::default(),
    )
    .unwrap();
    let exact = 0.64 / (1.0 - (-2.0f64).exp());
    assert!((r.predicted_rate - exact).abs() < 1e-3 * exact, "{}", r.predicted_rate);
    assert!(r.final_gap().unwrap() <= 0.20, "{r:?}");
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let m = preset::bernoulli_ou(0.3).build().unwrap();
    let lam = DualMeasure::point(1.0, v(&[0.9])).unwrap();
    let x = v(&[0.1]);
    let one = martingale_check(&m, &x, 25, PerturbationLevel::new(0.25).unwrap(), &lam, &McSettings::new(5000, 3)).unwrap();
    let many = martingale_check(
        &m,
        &x,
        25,
        PerturbationLevel::new(0.25).unwrap(),
        &lam,
        &McSettings::new(5000, 3).with_workers(3),
    )
    .unwrap();
    assert_eq!(one, many);
}
