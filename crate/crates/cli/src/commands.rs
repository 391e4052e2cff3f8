use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use euler_ldp::action::{self, limit_ode, minimize_action, ActionProblem, ActionValue};
use euler_ldp::kernel::AffineNoiseModel;
use euler_ldp::rare_event::{self, EventSpec, McSettings};
use euler_ldp::rng::stream;
use euler_ldp::scheme::{DualMeasure, SchemeRun};
use euler_ldp::{KernelModel, PerturbationLevel, Trajectory, Vector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{missing, ExperimentConfig, PathConfig, ProblemConfig};
use crate::{CliError, Common};

macro_rules! concat_help {
    ($extra:literal) => {
        concat!(
            "Config fields (JSON, unknown keys rejected):
  preset | model   shipped preset name, or an explicit model record
                   {dim, drift{type..}, sigma{type..}, base{type..}}
  x                start point (length = model dimension)
  seed             RNG seed (required)
  workers          parallel sampling cap (default 1; --workers overrides)
",
            $extra
        )
    };
}

pub const HELP_SIMULATE: &str = concat_help!(
    "  n                number of scheme steps (required)
  a                perturbation level (default 0)
  replicas         trajectories to write (default 1); replica i uses stream i
Writes trajectory.csv (or trajectory_<i>.csv) and config.resolved.json."
);
pub const HELP_ACTION: &str = concat_help!(
    "  a                perturbation level (default 0)
  path             {type: file, file} | {type: straight_line, to, segments}
                   | {type: limit_ode, steps}
Writes action.json and config.resolved.json."
);
pub const HELP_MINIMIZE: &str = concat_help!(
    "  a                perturbation level (default 0)
  problem          {terminal: {type: point, target, tolerance} |
                   {type: halfspace, normal, level}, knots (21),
                   max_iter (500), grad_tol (1e-7)}
Writes minimizer.csv, minimize_log.csv, minimize.json and config.resolved.json."
);
pub const HELP_MARTINGALE: &str = concat_help!(
    "  n                number of scheme steps (required)
  a                perturbation level (default 0)
  samples          Monte Carlo samples (required)
  dual             atoms [{t, alpha}] of the dual measure (default none)
  tolerances       {stderr_multiple (4)}
Writes martingale.json and config.resolved.json."
);
pub const HELP_RATE: &str = concat_help!(
    "  n_grid           list of step counts (required)
  samples          Monte Carlo samples per grid point (required)
  event            {type: terminal_halfspace, normal, level} (required)
  problem          minimizer settings {knots (21), max_iter, grad_tol}
  tolerances       {max_rate_gap (0.15)}
Writes rate.json, rate.csv and config.resolved.json."
);
pub const HELP_ODE: &str = concat_help!(
    "  n_grid           list of step counts (required)
  samples          Monte Carlo samples per grid point (required)
  eps              sup-distance threshold (required)
  tolerances       {max_ode_slope (-0.05)}
Writes ode.json, ode.csv and config.resolved.json."
);

struct Run {
    config: ExperimentConfig,
    model: AffineNoiseModel,
    out: PathBuf,
    base_dir: PathBuf,
}

fn setup(common: &Common) -> Result<Run, CliError> {
    let config = ExperimentConfig::load(&common.config)?.resolve(common.workers)?;
    let model = config.model_spec().build().map_err(|e| CliError::Config(format!("model: {e}")))?;
    fs::create_dir_all(&common.out)?;
    let base_dir = common
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let run = Run {
        config,
        model,
        out: common.out.clone(),
        base_dir,
    };
    write_json(&run.out.join("config.resolved.json"), &run.config)?;
    Ok(run)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    traj.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn level(a: f64) -> Result<PerturbationLevel, CliError> {
    Ok(PerturbationLevel::new(a)?)
}

fn mc(run: &Run, samples: usize) -> McSettings {
    McSettings::new(samples, run.config.seed).with_workers(run.config.workers())
}

/// Finite numbers stay numbers; infinities become the strings `"+inf"`/`"-inf"`.
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("+inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn action_json(v: &ActionValue) -> Value {
    json!({
        "value": number(v.value),
        "reason": v.reason.map(|r| match r {
            action::InfiniteReason::InitialCondition => "initial condition",
            action::InfiniteReason::DivergentSegment => "divergent segment",
        }),
        "segments": v.segments.iter().map(|&s| number(s)).collect::<Vec<_>>(),
    })
}

#[derive(Serialize)]
struct Assertion {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report_assertions(assertions: &[Assertion]) -> bool {
    for a in assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    assertions.iter().all(|a| a.passed)
}

pub fn simulate(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let n = run.config.need_n("simulate")?;
    let replicas = run.config.replicas.unwrap_or(1).max(1);
    let x = run.config.start();
    let scheme = SchemeRun::new(&run.model, &x, n, level(run.config.a)?, run.config.seed);
    for i in 0..replicas {
        let traj = scheme.simulate_with(&mut stream(run.config.seed, i as u64))?;
        let name = if replicas == 1 {
            "trajectory.csv".to_string()
        } else {
            format!("trajectory_{i}.csv")
        };
        write_trajectory(&run.out.join(&name), &traj)?;
        println!("{name}: {} knots, end {:?}", traj.n() + 1, traj.end().as_slice());
    }
    Ok(true)
}

pub fn action(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let x = run.config.start();
    let path = match run.config.path.as_ref().ok_or_else(|| missing("path", "action"))? {
        PathConfig::File { file } => {
            let p = run.base_dir.join(file);
            let f = File::open(&p).map_err(|e| CliError::Config(format!("path file {}: {e}", p.display())))?;
            Trajectory::read_csv(f).map_err(|e| CliError::Config(format!("path file {}: {e}", p.display())))?
        }
        PathConfig::StraightLine { to, segments } => {
            Trajectory::straight_line(&x, &Vector::from_column_slice(to), *segments)?
        }
        PathConfig::LimitOde { steps } => limit_ode(&run.model, &x, *steps)?,
    };
    let value = action::action(
        &run.model,
        &x,
        level(run.config.a)?,
        &path,
        &euler_ldp::conjugate::ConjugateSettings::default(),
    )?;
    let doc = action_json(&value);
    write_json(&run.out.join("action.json"), &doc)?;
    match value.reason {
        None => println!("action = {}", value.value),
        Some(_) => println!("action = +inf ({})", doc["reason"].as_str().unwrap_or_default()),
    }
    Ok(true)
}

pub fn minimize(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let problem_cfg = run.config.problem.clone().ok_or_else(|| missing("problem", "minimize"))?;
    let terminal = problem_cfg
        .terminal
        .as_ref()
        .ok_or_else(|| missing("problem.terminal", "minimize"))?
        .to_terminal();
    let problem = ActionProblem {
        model: &run.model,
        x: run.config.start(),
        terminal,
        knots: problem_cfg.knots,
        a: level(run.config.a)?,
        settings: problem_cfg.settings(),
    };
    let out = minimize_action(&problem)?;
    write_trajectory(&run.out.join("minimizer.csv"), &out.path)?;
    action::write_log_csv(&out.log, BufWriter::new(File::create(run.out.join("minimize_log.csv"))?))?;
    let doc = json!({
        "model": run.model.label(),
        "action": action_json(&out.value),
        "certificate": out.certificate,
        "log": out.log,
    });
    write_json(&run.out.join("minimize.json"), &doc)?;
    println!("minimized action = {}", out.value.value);
    if !out.certificate.stationary {
        eprintln!("warning: stationarity not certified (grad norm {:e})", out.certificate.grad_norm);
    }
    Ok(true)
}

pub fn verify_martingale(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let n = run.config.need_n("verify-martingale")?;
    let samples = run.config.need_samples("verify-martingale")?;
    let lambda = match &run.config.dual {
        Some(atoms) => DualMeasure::from_records(run.model.dim(), atoms)?,
        None => DualMeasure::zero(run.model.dim()),
    };
    let k = run.config.tolerances().stderr_multiple;
    let x = run.config.start();
    let report = rare_event::martingale_check(&run.model, &x, n, level(run.config.a)?, &lambda, &mc(&run, samples))?;
    let assertions = vec![Assertion {
        name: "martingale mean",
        passed: report.within(k),
        detail: format!("mean {} stderr {:e}, need |mean - 1| <= {k} stderr", report.mean, report.stderr),
    }];
    let ok = report_assertions(&assertions);
    write_json(
        &run.out.join("martingale.json"),
        &json!({
            "model": run.model.label(),
            "n": n,
            "a": run.config.a,
            "dual": lambda.to_records(),
            "samples": samples,
            "seed": run.config.seed,
            "workers": run.config.workers(),
            "mean": report.mean,
            "stderr": report.stderr,
            "assertions": assertions,
            "passed": ok,
        }),
    )?;
    Ok(ok)
}

pub fn verify_rate(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let grid = run.config.need_n_grid("verify-rate")?;
    let samples = run.config.need_samples("verify-rate")?;
    let (normal, lvl) = run.config.need_halfspace("verify-rate")?;
    let problem = run.config.problem.clone().unwrap_or_else(ProblemConfig::default);
    let x = run.config.start();
    let report = rare_event::verify_rate(
        &run.model,
        &x,
        &normal,
        lvl,
        &grid,
        &mc(&run, samples),
        problem.knots,
        &problem.settings(),
    )?;
    let max_gap = run.config.tolerances().max_rate_gap;
    let final_gap = report.final_gap();
    let assertions = vec![
        Assertion {
            name: "rate gap at largest n",
            passed: final_gap.is_some_and(|g| g <= max_gap),
            detail: format!(
                "relative gap {} (limit {max_gap}), predicted rate {}",
                final_gap.map_or("n/a".into(), |g| g.to_string()),
                report.predicted_rate
            ),
        },
        Assertion {
            name: "gap trend",
            passed: report.trend_ok,
            detail: format!("flagged grid positions {:?}", report.flagged),
        },
    ];
    let ok = report_assertions(&assertions);
    let event = EventSpec::TerminalHalfSpace { normal, level: lvl }.summary();
    write_json(
        &run.out.join("rate.json"),
        &json!({
            "model": run.model.label(),
            "event": event,
            "report": report,
            "assertions": assertions,
            "passed": ok,
        }),
    )?;
    let mut csv = BufWriter::new(File::create(run.out.join("rate.csv"))?);
    writeln!(csv, "n,samples,p_hat,stderr,empirical_rate,predicted_rate,relative_gap,method")?;
    for p in &report.points {
        let e = &p.estimate;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            e.n,
            e.samples,
            e.p_hat,
            e.stderr,
            opt(e.empirical_rate),
            opt(e.predicted_rate),
            opt(p.relative_gap),
            serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
        )?;
    }
    Ok(ok)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn verify_ode(common: &Common) -> Result<bool, CliError> {
    let run = setup(common)?;
    let grid = run.config.need_n_grid("verify-ode")?;
    let samples = run.config.need_samples("verify-ode")?;
    let eps = run.config.eps.ok_or_else(|| missing("eps", "verify-ode"))?;
    let x = run.config.start();
    let report = rare_event::verify_ode_convergence(&run.model, &x, eps, &grid, &mc(&run, samples))?;
    let max_slope = run.config.tolerances().max_ode_slope;
    let assertions = vec![
        Assertion {
            name: "q_n strictly decreasing",
            passed: report.strictly_decreasing,
            detail: format!(
                "q = {:?}",
                report.points.iter().map(|p| p.q_hat).collect::<Vec<_>>()
            ),
        },
        Assertion {
            name: "fitted log-slope",
            passed: report.slope.is_some_and(|s| s <= max_slope),
            detail: format!(
                "slope {} (limit {max_slope})",
                report.slope.map_or("n/a".into(), |s| s.to_string())
            ),
        },
    ];
    let ok = report_assertions(&assertions);
    write_json(
        &run.out.join("ode.json"),
        &json!({
            "model": run.model.label(),
            "samples": samples,
            "seed": run.config.seed,
            "workers": run.config.workers(),
            "report": report,
            "assertions": assertions,
            "passed": ok,
        }),
    )?;
    let mut csv = BufWriter::new(File::create(run.out.join("ode.csv"))?);
    writeln!(csv, "n,q_hat,stderr,hits,censored")?;
    for p in &report.points {
        writeln!(csv, "{},{},{},{},{}", p.n, p.q_hat, p.stderr, p.hits, p.censored)?;
    }
    Ok(ok)
}
