//! The regularized Liouville action and its gradient check.
//!
//! `S^ε` is the energy `∬ (|φ_z|² + e^φ) dx dy` over the sphere with
//! `ε`-disks removed around the finite points and `|z| > 1/ε` removed,
//! plus contour and counterterms. Its limit is evaluated in two independent
//! ways: from the identity
//! `S = ∬ e^φ (1 − φ/2) − π Σ_{i<n} α_i ψ_i + π (2 − α_n) ψ_n`, with `ψ_i`
//! the regular value of `φ + 2α_i log|z − z_i|` at the point, and by
//! extrapolating `S^ε` along an ε-ladder.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldEvaluator, FieldGrid};
use crate::linalg::pairwise_sum;
use crate::model::{Configuration, OrderData};
use crate::monodromy::{solve_accessory, SolverOptions};
use crate::quadrature::{disk_integral, gauss_legendre, integrate, Integrand, QuadratureBudget};

/// Trapezoid nodes on the ε-circles.
pub const CONTOUR_NODES: usize = 256;

/// Default ε-ladder.
pub const DEFAULT_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Components: `e^φ`, `e^φ (1 − φ/2)`, `|φ_z|²` with the leading `a²/|ζ|²`
/// removed inside charts.
struct ActionDensity<'a> {
    ev: &'a FieldEvaluator,
    grid: &'a FieldGrid,
}

impl Integrand for ActionDensity<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn power(&self, k: usize) -> f64 {
        let a = self.ev.chart(k).alpha;
        (2.0 - 2.0 * a).min(1.0)
    }

    fn background(&self, cell: usize, z: Complex64, out: &mut [f64]) {
        let (e, phi, phi_z) = self.grid.eval(self.ev, cell, z);
        out[0] = e;
        out[1] = e * (1.0 - phi / 2.0);
        out[2] = phi_z.norm_sqr();
    }

    fn chart(&self, k: usize, log_t: f64, dir: Complex64, out: &mut [f64]) {
        let cv = self.ev.chart_eval(k, log_t, dir);
        let area = cv.scaled_area_density();
        let a = cv.leading();
        out[0] = area;
        out[1] = area * (1.0 - cv.phi() / 2.0);
        out[2] = 2.0 * a * cv.reg.re + cv.reg.norm_sqr();
    }
}

/// `∬ e^φ` with its error estimate.
pub fn total_area(ev: &FieldEvaluator, budget: &QuadratureBudget) -> Result<(f64, f64)> {
    let grid = FieldGrid::new(ev, budget)?;
    let r = integrate(&ActionDensity { ev, grid: &grid }, &grid.domain, budget)?;
    Ok((r.values[0], r.errors[0]))
}

/// `∫₀^{2π} log R(θ) dθ` for the star-shaped region bounded by the triangle
/// sides of chart `k`, `R` being the chart radius of the boundary.
fn boundary_log_moment(grid: &FieldGrid, k: usize) -> f64 {
    let (x, w) = gauss_legendre(64);
    let dom = &grid.domain;
    let infinity = k == dom.infinity();
    let half = if infinity { dom.box_half } else { dom.squares[k].half };
    let unit = [
        Complex64::new(1.0, -1.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-1.0, 1.0),
        Complex64::new(-1.0, -1.0),
    ];
    let mut parts = Vec::new();
    for q in 0..4 {
        let a = unit[q] * half;
        let d = 0.5 * (unit[(q + 1) % 4] * half - a);
        for (s, ws) in x.iter().zip(&w) {
            let bz = a + (s + 1.0) * d;
            let (b, db) = if infinity {
                let inv = bz.inv();
                (inv, -d * inv * inv)
            } else {
                (bz, d)
            };
            let jac = (b.conj() * db).im.abs();
            parts.push(ws * jac / b.norm_sqr() * b.norm().ln());
        }
    }
    pairwise_sum(&parts)
}

/// `∫₀^{2π} φ` on the circle `|ζ| = r` of chart `k`.
fn circle_mean_phi(ev: &FieldEvaluator, k: usize, r: f64) -> f64 {
    let m = CONTOUR_NODES;
    let v: Vec<f64> = (0..m)
        .map(|j| {
            let dir = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            ev.chart_eval(k, r.ln(), dir).phi()
        })
        .collect();
    pairwise_sum(&v) * 2.0 * PI / m as f64
}

/// One evaluation of `S^ε` with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonValue {
    pub epsilon: f64,
    pub value: f64,
    pub area: f64,
    pub energy: f64,
    pub contours: f64,
    pub counterterms: f64,
    pub error_estimate: f64,
}

fn check_metric_grade(ev: &FieldEvaluator) -> Result<()> {
    if !ev.tensor().orders().is_metric_grade() {
        return Err(Error::InvalidOrders("orders must lie in (0, 1)".into()));
    }
    Ok(())
}

fn epsilon_from_grid(ev: &FieldEvaluator, grid: &FieldGrid, eps: f64, budget: &QuadratureBudget) -> Result<EpsilonValue> {
    let n = ev.tensor().n();
    let dens = ActionDensity { ev, grid };
    for k in 0..n {
        let lim = if k == n - 1 {
            1.0 / grid.domain.box_half
        } else {
            grid.domain.squares[k].half.min(ev.clearance() / 2.0)
        };
        if !(eps > 0.0) || eps >= lim {
            return Err(Error::InvalidConfiguration(format!(
                "ε = {eps} does not fit inside the region around point {k} (limit {lim})"
            )));
        }
    }
    let full = integrate(&dens, &grid.domain, budget)?;
    let mut area = full.values[0];
    let mut energy = full.values[2];
    let mut err = full.errors[0] + full.errors[2];
    let mut contours = 0.0;
    let mut counter = 0.0;
    for k in 0..n {
        let disk = disk_integral(&dens, k, eps, budget);
        area -= disk.values[0];
        energy -= disk.values[2];
        err += disk.errors[0] + disk.errors[2];
        let a = ev.chart(k).alpha;
        let lead = if k == n - 1 { 2.0 - a } else { a };
        // analytic part a²/t² outside the ε-disk
        energy += lead * lead * (boundary_log_moment(grid, k) - 2.0 * PI * eps.ln());
        let circ = circle_mean_phi(ev, k, eps);
        contours += if k == n - 1 { lead * circ } else { -lead * circ };
        counter -= 2.0 * PI * lead * lead * eps.ln();
    }
    Ok(EpsilonValue {
        epsilon: eps,
        value: area + energy + contours + counter,
        area,
        energy,
        contours,
        counterterms: counter,
        error_estimate: err,
    })
}

/// `S^ε` for one ε.
pub fn action_epsilon(ev: &FieldEvaluator, eps: f64, budget: &QuadratureBudget) -> Result<EpsilonValue> {
    check_metric_grade(ev)?;
    let grid = FieldGrid::new(ev, budget)?;
    epsilon_from_grid(ev, &grid, eps, budget)
}

/// Richardson extrapolation of an ε-ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub samples: Vec<EpsilonValue>,
    /// Correction exponents used, in the order they are eliminated.
    pub exponents: Vec<f64>,
    /// `extrapolants[j]` uses the last `j + 1` samples.
    pub extrapolants: Vec<f64>,
    pub value: f64,
    /// At least the difference of the last two extrapolants.
    pub error_estimate: f64,
}

/// Known remainder exponents `2k(1 − α_i)` and `2`, ascending.
pub fn remainder_exponents(orders: &OrderData, count: usize) -> Vec<f64> {
    let mut e: Vec<f64> = Vec::new();
    for &a in orders.alphas() {
        for k in 1..=count {
            e.push(2.0 * k as f64 * (1.0 - a));
        }
    }
    e.push(2.0);
    e.sort_by(|a, b| a.total_cmp(b));
    e.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    e.truncate(count);
    e
}

fn richardson(eps: &[f64], vals: &[f64], exps: &[f64]) -> Result<f64> {
    let m = eps.len();
    let a = DMatrix::from_fn(m, m, |i, j| if j == 0 { 1.0 } else { eps[i].powf(exps[j - 1]) });
    let b = DVector::from_column_slice(vals);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Extrapolation("singular extrapolation system".into()))?;
    Ok(x[0])
}

/// Evaluates `S^ε` along the ladder and extrapolates `ε → 0`.
pub fn ladder(ev: &FieldEvaluator, epsilons: &[f64], budget: &QuadratureBudget) -> Result<LadderDiagnostics> {
    check_metric_grade(ev)?;
    if epsilons.len() < 2 || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Extrapolation("ε-ladder must be strictly decreasing with ≥ 2 entries".into()));
    }
    let grid = FieldGrid::new(ev, budget)?;
    let samples = epsilons
        .par_iter()
        .map(|&e| epsilon_from_grid(ev, &grid, e, budget))
        .collect::<Result<Vec<_>>>()?;
    let exps = remainder_exponents(ev.tensor().orders(), epsilons.len() - 1);
    let m = samples.len();
    let mut extrapolants = Vec::with_capacity(m);
    for j in 0..m {
        let tail = &samples[m - 1 - j..];
        let e: Vec<f64> = tail.iter().map(|s| s.epsilon).collect();
        let v: Vec<f64> = tail.iter().map(|s| s.value).collect();
        extrapolants.push(richardson(&e, &v, &exps[..j])?);
    }
    let value = extrapolants[m - 1];
    if !value.is_finite() {
        return Err(Error::Extrapolation("non-finite extrapolant".into()));
    }
    let quad = samples.iter().map(|s| s.error_estimate).fold(0.0, f64::max);
    let error_estimate = (extrapolants[m - 1] - extrapolants[m - 2]).abs() + quad;
    Ok(LadderDiagnostics {
        samples,
        exponents: exps,
        extrapolants,
        value,
        error_estimate,
    })
}

/// Options for [`action`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct ActionOptions {
    pub budget: QuadratureBudget,
    /// Also evaluate the ε-ladder when set.
    pub epsilon_ladder: Option<Vec<f64>>,
}


/// The regularized action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub error_estimate: f64,
    pub area: f64,
    pub area_error: f64,
    /// Regular values `ψ_i` of the field at each singular point.
    pub regular_values: Vec<f64>,
    pub ladder: Option<LadderDiagnostics>,
}

/// Evaluates the action for a solved field.
pub fn action_of(ev: &FieldEvaluator, opts: &ActionOptions) -> Result<ActionValue> {
    check_metric_grade(ev)?;
    let budget = &opts.budget;
    let grid = FieldGrid::new(ev, budget)?;
    let r = integrate(&ActionDensity { ev, grid: &grid }, &grid.domain, budget)?;
    let n = ev.tensor().n();
    let psi: Vec<f64> = ev.charts().iter().map(|c| c.regular_value()).collect();
    let mut terms = vec![r.values[1]];
    for k in 0..n {
        let a = ev.chart(k).alpha;
        terms.push(if k == n - 1 { PI * (2.0 - a) * psi[k] } else { -PI * a * psi[k] });
    }
    let value = pairwise_sum(&terms);
    let ladder = match &opts.epsilon_ladder {
        Some(eps) => Some(ladder(ev, eps, budget)?),
        None => None,
    };
    let error_estimate = r.errors[1] + 1e-13 * value.abs();
    Ok(ActionValue {
        value,
        error_estimate,
        area: r.values[0],
        area_error: r.errors[0],
        regular_values: psi,
        ladder,
    })
}

/// Solves the accessory problem for `config` and evaluates the action.
pub fn action(
    config: &Configuration,
    orders: &OrderData,
    solver: &SolverOptions,
    opts: &ActionOptions,
) -> Result<ActionValue> {
    let (_, ev) = FieldEvaluator::solve(config, orders, solver)?;
    action_of(&ev, opts)
}

/// Writes the convergence table `epsilon,value,extrapolant`.
pub fn write_ladder_csv<W: Write>(diag: &LadderDiagnostics, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "epsilon,value,extrapolant")?;
    let m = diag.samples.len();
    for (i, s) in diag.samples.iter().enumerate() {
        // extrapolant from samples i.. of the ladder
        let ex = diag.extrapolants[m - 1 - i];
        writeln!(out, "{:e},{:.15e},{:.15e}", s.epsilon, s.value, ex)?;
    }
    Ok(())
}

/// Accessory parameter versus the action gradient for one free point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub index: usize,
    pub c: Complex64,
    pub ds_dz: Complex64,
    /// Propagated quadrature error of the difference quotient.
    pub ds_dz_error: f64,
    /// `|∂S/∂z − 2πc|`.
    pub mismatch_plus: f64,
    /// `|∂S/∂z + 2πc|`.
    pub mismatch_minus: f64,
    /// Relative versions (absolute when `|c| < 1e-8`).
    pub relative_plus: f64,
    pub relative_minus: f64,
}

/// Finite-difference check of `∂S/∂z_i = ±2π c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub fd_step: f64,
    pub action: ActionValue,
    pub entries: Vec<GradientEntry>,
    /// `+1` or `−1`: the sign `s` in `∂S/∂z = s · 2πc` that fits best.
    pub sign: f64,
    /// Largest relative mismatch under the pinned sign.
    pub max_relative: f64,
}

/// Solves and evaluates the action at `config` with `z_i` moved by `dz`,
/// starting the solve from `guess`.
fn shifted_action(
    config: &Configuration,
    orders: &OrderData,
    i: usize,
    dz: Complex64,
    guess: &[Complex64],
    solver: &SolverOptions,
    opts: &ActionOptions,
) -> Result<ActionValue> {
    let cfg = config.with_free_point(i, config.free_points()[i] + dz)?;
    let report = solve_accessory(&cfg, orders, guess, solver)?;
    let ev = FieldEvaluator::from_solve(&cfg, orders, &report)?;
    action_of(&ev, opts)
}

/// Compares `2π c_i` with the central difference of the action.
pub fn verify_theorem1(
    config: &Configuration,
    orders: &OrderData,
    fd_step: f64,
    solver: &SolverOptions,
    opts: &ActionOptions,
) -> Result<Theorem1Report> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidConfiguration("fd_step must be positive".into()));
    }
    let (report, ev) = FieldEvaluator::solve(config, orders, solver)?;
    let centre = action_of(&ev, opts)?;
    let guess = report.accessory.free.clone();
    let h = fd_step;
    let shifts = [
        Complex64::new(h, 0.0),
        Complex64::new(-h, 0.0),
        Complex64::new(0.0, h),
        Complex64::new(0.0, -h),
    ];
    let m = config.n() - 3;
    let jobs: Vec<(usize, Complex64)> = (0..m).flat_map(|i| shifts.iter().map(move |&s| (i, s))).collect();
    let values = jobs
        .par_iter()
        .map(|&(i, s)| shifted_action(config, orders, i, s, &guess, solver, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(m);
    for i in 0..m {
        let v = &values[4 * i..4 * i + 4];
        let ds = (Complex64::new(v[0].value - v[1].value, 0.0)
            - Complex64::new(0.0, v[2].value - v[3].value))
            / (4.0 * h);
        let ds_err = v.iter().map(|a| a.error_estimate).sum::<f64>() / (4.0 * h);
        let c = report.accessory.free[i];
        let two_pi_c = 2.0 * PI * c;
        let plus = (ds - two_pi_c).norm();
        let minus = (ds + two_pi_c).norm();
        let scale = if c.norm() < 1e-8 { 1.0 } else { two_pi_c.norm() };
        entries.push(GradientEntry {
            index: i,
            c,
            ds_dz: ds,
            ds_dz_error: ds_err,
            mismatch_plus: plus,
            mismatch_minus: minus,
            relative_plus: plus / scale,
            relative_minus: minus / scale,
        });
    }
    let plus: f64 = entries.iter().map(|e| e.relative_plus).fold(0.0, f64::max);
    let minus: f64 = entries.iter().map(|e| e.relative_minus).fold(0.0, f64::max);
    let (sign, max_relative) = if plus <= minus { (1.0, plus) } else { (-1.0, minus) };
    Ok(Theorem1Report {
        fd_step,
        action: centre,
        entries,
        sign,
        max_relative,
    })
}
