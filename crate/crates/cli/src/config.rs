//! JSON experiment configuration.

use std::path::Path;

use euler_ldp::action::{MinimizeSettings, Terminal};
use euler_ldp::kernel::preset::{self, ModelSpec};
use euler_ldp::scheme::AtomRecord;
use euler_ldp::Vector;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One run. Unknown keys are rejected; `seed` is always required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Shipped preset name; exclusive with `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub x: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Trajectories written by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventConfig>,
    /// Atoms of the dual measure for `verify-martingale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<Vec<AtomRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    TerminalHalfspace { normal: Vec<f64>, level: f64 },
}

/// Path handed to `action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    /// CSV with header `t,x1..xd` on a uniform grid; relative to the config file.
    File { file: String },
    StraightLine { to: Vec<f64>, segments: usize },
    LimitOde { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalConfig {
    Point {
        target: Vec<f64>,
        #[serde(default = "default_point_tolerance")]
        tolerance: f64,
    },
    Halfspace {
        normal: Vec<f64>,
        level: f64,
    },
}

fn default_point_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<TerminalConfig>,
    #[serde(default = "default_knots")]
    pub knots: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
}

fn default_knots() -> usize {
    21
}

fn default_max_iter() -> usize {
    MinimizeSettings::default().max_iter
}

fn default_grad_tol() -> f64 {
    MinimizeSettings::default().grad_tol
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            terminal: None,
            knots: default_knots(),
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
        }
    }
}

impl ProblemConfig {
    pub fn settings(&self) -> MinimizeSettings {
        MinimizeSettings {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            ..MinimizeSettings::default()
        }
    }
}

/// Pass thresholds of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_stderr_multiple")]
    pub stderr_multiple: f64,
    #[serde(default = "default_max_rate_gap")]
    pub max_rate_gap: f64,
    #[serde(default = "default_max_ode_slope")]
    pub max_ode_slope: f64,
}

fn default_stderr_multiple() -> f64 {
    4.0
}
fn default_max_rate_gap() -> f64 {
    0.15
}
fn default_max_ode_slope() -> f64 {
    -0.05
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stderr_multiple: default_stderr_multiple(),
            max_rate_gap: default_max_rate_gap(),
            max_ode_slope: default_max_ode_slope(),
        }
    }
}

pub fn missing(field: &str, command: &str) -> CliError {
    CliError::Config(format!("missing field `{field}` (required by {command})"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Replaces `preset` by the explicit model record and fills defaults.
    pub fn resolve(mut self, workers: Option<usize>) -> Result<Self, CliError> {
        let spec = match (self.preset.take(), self.model.take()) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either `preset` or `model`, not both".into())),
            (None, None) => return Err(CliError::Config("missing field `model` (or `preset`)".into())),
            (None, Some(m)) => m,
            (Some(name), None) => preset::by_name(&name).ok_or_else(|| {
                let known: Vec<_> = preset::shipped().into_iter().map(|(n, _)| n).collect();
                CliError::Config(format!("unknown preset `{name}`; known: {}", known.join(", ")))
            })?,
        };
        if self.x.len() != spec.dim {
            return Err(CliError::Config(format!(
                "field `x` has length {}, model dimension is {}",
                self.x.len(),
                spec.dim
            )));
        }
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(CliError::Config("field `a` must be finite and >= 0".into()));
        }
        self.model = Some(spec);
        self.workers = Some(workers.or(self.workers).unwrap_or(1).max(1));
        self.tolerances = Some(self.tolerances.unwrap_or_default());
        Ok(self)
    }

    pub fn model_spec(&self) -> &ModelSpec {
        self.model.as_ref().expect("resolved config carries a model")
    }

    pub fn start(&self) -> Vector {
        Vector::from_column_slice(&self.x)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.clone().unwrap_or_default()
    }

    pub fn need_n(&self, command: &str) -> Result<usize, CliError> {
        match self.n {
            Some(0) => Err(CliError::Config("field `n` must be at least 1".into())),
            Some(n) => Ok(n),
            None => Err(missing("n", command)),
        }
    }

    pub fn need_n_grid(&self, command: &str) -> Result<Vec<usize>, CliError> {
        match &self.n_grid {
            Some(g) if g.is_empty() || g.contains(&0) => {
                Err(CliError::Config("field `n_grid` must be a nonempty list of positive integers".into()))
            }
            Some(g) => Ok(g.clone()),
            None => Err(missing("n_grid", command)),
        }
    }

    pub fn need_samples(&self, command: &str) -> Result<usize, CliError> {
        match self.samples {
            Some(0) => Err(CliError::Config("field `samples` must be at least 1".into())),
            Some(s) => Ok(s),
            None => Err(missing("samples", command)),
        }
    }

    pub fn need_halfspace(&self, command: &str) -> Result<(Vector, f64), CliError> {
        match &self.event {
            Some(EventConfig::TerminalHalfspace { normal, level }) => Ok((Vector::from_column_slice(normal), *level)),
            None => Err(missing("event", command)),
        }
    }
}

impl TerminalConfig {
    pub fn to_terminal(&self) -> Terminal {
        match self {
            TerminalConfig::Point { target, tolerance } => Terminal::Point {
                target: Vector::from_column_slice(target),
                tolerance: *tolerance,
            },
            TerminalConfig::Halfspace { normal, level } => Terminal::HalfSpace {
                normal: Vector::from_column_slice(normal),
                level: *level,
            },
        }
    }
}
