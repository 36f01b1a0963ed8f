use std::time::Instant;

use conical::action::{ActionValue, Theorem1Report};
use conical::kahler::{GramMatrix, MetricMatrix, PotentialReport, Theorem2Report};
use conical::monodromy::{Signature, SolveReport};
use conical::{Configuration, OrderData};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Output of every subcommand, echoing the input configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accessories: Option<AccessoryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram: Option<GramMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    /// Wall times per stage in seconds; empty in deterministic mode.
    pub timings: Vec<Timing>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            accessories: None,
            action: None,
            gram: None,
            metric: None,
            verification: None,
            sweep: None,
            timings: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time unless the run is deterministic.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        if !self.config.deterministic {
            self.timings.push(Timing {
                stage: stage.to_string(),
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Accessory values at every point with the residuals that certify them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessoryReport {
    /// Values at the free points, then `0`, `1`, `∞`.
    pub values: Vec<Complex64>,
    /// Reality residual of the monodromy traces.
    pub residual_norm: f64,
    /// Residuals of the three linear relations.
    pub relation_residuals: [f64; 3],
    pub iterations: usize,
    pub condition: f64,
    pub signature: Signature,
    pub form_residual: f64,
    /// Set for three points, where all values are fixed by the orders.
    pub solver_skipped: bool,
}

impl AccessoryReport {
    pub fn new(config: &Configuration, orders: &OrderData, r: &SolveReport) -> Self {
        let a = &r.accessory;
        let mut values = a.free.clone();
        values.extend([a.at_zero, a.at_one, a.at_infinity]);
        Self {
            values,
            residual_norm: r.residual_norm,
            relation_residuals: a.relation_residuals(config, orders),
            iterations: r.iterations,
            condition: r.condition,
            signature: r.form.signature,
            form_residual: r.form.residual,
            solver_skipped: config.n() == 3,
        }
    }
}

/// A check with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check<T> {
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub details: T,
}

impl<T> Check<T> {
    pub fn new(residual: f64, tolerance: f64, details: T) -> Self {
        Self {
            passed: residual < tolerance,
            residual,
            tolerance,
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Verification {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Check<Theorem1Report>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Check<Theorem2Report>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Check<PotentialReport>>,
    /// Reason the checks were not run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl Verification {
    pub fn all_passed(&self) -> bool {
        self.theorem1.as_ref().is_none_or(|c| c.passed)
            && self.theorem2.as_ref().is_none_or(|c| c.passed)
            && self.potential.as_ref().is_none_or(|c| c.passed)
    }
}

/// One sample of a sweep over `z_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub z1_re: f64,
    pub z1_im: f64,
    pub c1_re: Option<f64>,
    pub c1_im: Option<f64>,
    pub residual: Option<f64>,
    pub action: Option<f64>,
    pub action_error: Option<f64>,
    pub g11: Option<f64>,
    pub g11_error: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn failed(z: Complex64, error: String) -> Self {
        Self {
            z1_re: z.re,
            z1_im: z.im,
            c1_re: None,
            c1_im: None,
            residual: None,
            action: None,
            action_error: None,
            g11: None,
            g11_error: None,
            error: Some(error),
        }
    }
}
