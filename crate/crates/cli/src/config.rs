use std::fmt;
use std::path::{Path, PathBuf};

use conical::action::ActionOptions;
use conical::monodromy::SolverOptions;
use conical::quadrature::QuadratureBudget;
use conical::{Configuration, OrderData};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Input of every subcommand. Complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free marked points; `0`, `1` and `∞` are implicit.
    #[serde(default)]
    pub points: Vec<Complex64>,
    /// Orders of all points: free points, then `0`, `1`, `∞`.
    pub orders: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub budget: QuadratureBudget,
    #[serde(default)]
    pub epsilon_ladder: Option<Vec<f64>>,
    /// Finite-difference step in moduli space.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub checks: CheckTolerances,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub output: OutputPaths,
    /// Leaves wall times out of reports so that identical inputs produce
    /// identical output.
    #[serde(default)]
    pub deterministic: bool,
}

fn default_fd_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub target: f64,
    pub max_iter: usize,
    /// Step of the finite-difference Jacobian.
    pub jacobian_step: f64,
    pub ode_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            target: d.target,
            max_iter: d.max_iter,
            jacobian_step: d.fd_step,
            ode_tol: d.ode_tol,
        }
    }
}

/// Pass thresholds for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    pub theorem1: f64,
    pub theorem2: f64,
    pub potential: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            theorem1: 1e-3,
            theorem2: 1e-2,
            potential: 5e-2,
        }
    }
}

/// Straight segment of `z_1` values, `steps + 1` samples including both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub start: Complex64,
    pub end: Complex64,
    pub steps: usize,
}

impl SweepGrid {
    pub fn samples(&self) -> Vec<Complex64> {
        (0..=self.steps)
            .map(|k| self.start + (self.end - self.start) * (k as f64 / self.steps as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// JSON report; stdout when absent.
    pub report: Option<PathBuf>,
    /// CSV table of `sweep`.
    pub table: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = e.inner();
            ConfigError::Parse(format!(
                "line {} column {}, field `{}`: {inner}",
                inner.line(),
                inner.column(),
                e.path()
            ))
        })
    }

    /// Checks every tolerance and the ε-ladder, then builds the core inputs.
    pub fn validate(&self) -> Result<(Configuration, OrderData), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        let s = &self.solver;
        for (name, v) in [
            ("solver.tol", s.tol),
            ("solver.target", s.target),
            ("solver.jacobian_step", s.jacobian_step),
            ("solver.ode_tol", s.ode_tol),
            ("fd_step", self.fd_step),
            ("checks.theorem1", self.checks.theorem1),
            ("checks.theorem2", self.checks.theorem2),
            ("checks.potential", self.checks.potential),
            ("budget.radial_step", self.budget.radial_step),
            ("budget.radial_extent", self.budget.radial_extent),
            ("budget.refine", self.budget.refine),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if s.max_iter == 0 || self.budget.gauss < 2 || self.budget.sigma < 2 || self.budget.max_cells == 0 {
            return Err(invalid(
                "solver.max_iter, budget.gauss, budget.sigma and budget.max_cells must be positive (orders at least 2)"
                    .into(),
            ));
        }
        if let Some(eps) = &self.epsilon_ladder {
            if eps.len() < 2 {
                return Err(invalid("epsilon_ladder needs at least two values".into()));
            }
            if eps.iter().any(|e| !(*e > 0.0)) {
                return Err(invalid("epsilon_ladder values must be positive".into()));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("epsilon_ladder must be strictly decreasing".into()));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.steps == 0 {
                return Err(invalid("sweep.steps must be positive".into()));
            }
        }
        let orders = OrderData::new(&self.orders).map_err(|e| invalid(e.to_string()))?;
        let config = Configuration::new(self.points.clone()).map_err(|e| invalid(e.to_string()))?;
        if orders.n() != config.n() {
            return Err(invalid(format!(
                "{} orders given for {} points",
                orders.n(),
                config.n()
            )));
        }
        Ok((config, orders))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            target: self.solver.target,
            max_iter: self.solver.max_iter,
            fd_step: self.solver.jacobian_step,
            ode_tol: self.solver.ode_tol,
            ..SolverOptions::default()
        }
    }

    pub fn action_options(&self) -> ActionOptions {
        ActionOptions {
            budget: self.budget,
            epsilon_ladder: self.epsilon_ladder.clone(),
        }
    }
}

/// Parses `--budget`: a preset name or an inline JSON object of budget fields.
pub fn parse_budget(text: &str) -> Result<QuadratureBudget, ConfigError> {
    match text {
        "default" => Ok(QuadratureBudget::default()),
        "refined" => Ok(QuadratureBudget::default().refined()),
        "fine" => Ok(QuadratureBudget::default().refined().refined()),
        _ => serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse(format!("--budget: {e} (expected default, refined, fine or a JSON object)"))),
    }
}

/// Parses `--epsilon-ladder 1e-2,5e-3,2.5e-3`.
pub fn parse_ladder(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError::Parse(format!("--epsilon-ladder: `{s}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "points": [[0.3, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7] }"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.fd_step, 1e-3);
        assert_eq!(c.budget, QuadratureBudget::default());
        assert!(!c.deterministic);
        c.validate().unwrap();
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text = "{\n  \"points\": [[0.3, 0.0]],\n  \"orders\": [0.7, \"x\", 0.7, 0.7]\n}";
        let msg = RunConfig::parse(text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("orders"), "{msg}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{ "orders": [0.8, 0.8, 0.8], "colour": 1 }"#;
        assert!(matches!(RunConfig::parse(text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn ladder_must_decrease() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.epsilon_ladder = Some(vec![1e-2, 1e-2]);
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        c.epsilon_ladder = Some(vec![1e-2, 5e-3]);
        c.validate().unwrap();
    }

    #[test]
    fn tolerances_must_be_positive() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.solver.ode_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.fd_step = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn order_count_checked() {
        let c = RunConfig::parse(r#"{ "points": [[0.3, 0.0]], "orders": [0.8, 0.8, 0.8] }"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_ladder("1e-2, 5e-3").unwrap(), vec![1e-2, 5e-3]);
        assert!(parse_ladder("1e-2,x").is_err());
        assert_eq!(parse_budget("refined").unwrap(), QuadratureBudget::default().refined());
        assert_eq!(parse_budget(r#"{"gauss": 16}"#).unwrap().gauss, 16);
        assert!(parse_budget("huge").is_err());
    }

    #[test]
    fn sweep_samples_include_ends() {
        let s = SweepGrid {
            start: Complex64::new(0.1, 0.0),
            end: Complex64::new(0.9, 0.0),
            steps: 4,
        };
        let z = s.samples();
        assert_eq!(z.len(), 5);
        assert!((z[2] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }
}
