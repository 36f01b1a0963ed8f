//! Monodromy of the Fuchsian equation, unitarizability residuals, invariant
//! Hermitian forms and the accessory-parameter solver.
//!
//! Convention: a loop continues the base frame `Y` to `Y·M`, so a row vector
//! of solutions transforms as `u ↦ u M` and an invariant form satisfies
//! `M H M* = H`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldEvaluator;
use crate::linalg::Mat2;
use crate::model::{AccessoryVector, Configuration, OrderData, StressTensor};
use crate::ode::{
    circle_polygon, default_clearance, plan_path_around, segment_distance, transport,
    FrameTransport, PathPolyline, DEFAULT_TOL,
};

/// Polygon resolution used for loops around a singular point.
pub const LOOP_SEGMENTS: usize = 32;

/// Closed loops from a common base point, one per singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    pub base_point: Complex64,
    pub clearance: f64,
    /// `loops[i]` encircles only point `i`; the last one encircles infinity.
    pub loops: Vec<PathPolyline>,
    /// Finite indices in the order whose product with the infinity loop is
    /// the identity, followed by the infinity index.
    pub loop_order: Vec<usize>,
}

impl LoopGeometry {
    /// Builds loops from an automatically chosen base point.
    pub fn new(config: &Configuration, clearance: Option<f64>) -> Result<Self> {
        let clearance = clearance.unwrap_or_else(|| default_clearance(config));
        let base = default_base_point(config, clearance);
        Self::with_base(config, base, clearance)
    }

    /// Builds loops from a given base point.
    pub fn with_base(config: &Configuration, base: Complex64, clearance: f64) -> Result<Self> {
        let pts = config.finite_points();
        let n = config.n();
        for p in &pts {
            if (base - p).norm() < clearance {
                return Err(Error::Path(format!(
                    "base point {base} is within clearance of {p}"
                )));
            }
        }
        let r_loop = clearance / (std::f64::consts::PI / LOOP_SEGMENTS as f64).cos() * (1.0 + 1e-12);
        let mut loops = Vec::with_capacity(n);
        for &z in &pts {
            let dir = (base - z) / (base - z).norm();
            let start = z + dir * r_loop;
            let spoke = plan_path_around(base, start, &pts, clearance)?;
            let circle = PathPolyline {
                vertices: circle_polygon(z, start, LOOP_SEGMENTS, true),
                clearance,
            };
            loops.push(spoke.then(&circle).then(&spoke.reversed()));
        }
        let centre = centroid(&pts);
        let far = centre.norm() + pts.iter().map(|p| (p - centre).norm()).fold(0.0, f64::max);
        let mut dir = base - centre;
        if dir.norm() == 0.0 {
            dir = Complex64::new(0.0, -1.0);
        }
        let dir = dir / dir.norm();
        let r_out = 3.0 * (far + (base - centre).norm()).max(1.0);
        let outer = centre + dir * r_out;
        let spoke = plan_path_around(base, outer, &pts, clearance)?;
        let segments = 64;
        let circle = PathPolyline {
            vertices: circle_polygon(centre, outer, segments, false),
            clearance,
        };
        loops.push(spoke.then(&circle).then(&spoke.reversed()));

        let mut order: Vec<usize> = (0..n - 1).collect();
        let toward = centre - base;
        let angle = |i: usize| ((pts[i] - base) / toward).arg();
        order.sort_by(|&a, &b| angle(b).total_cmp(&angle(a)));
        order.push(n - 1);
        Ok(Self {
            base_point: base,
            clearance,
            loops,
            loop_order: order,
        })
    }
}

fn centroid(pts: &[Complex64]) -> Complex64 {
    pts.iter().sum::<Complex64>() / pts.len() as f64
}

/// Deterministic base point outside the marked points from which straight
/// spokes to every loop start are unobstructed (when such a direction exists
/// among the candidates).
pub fn default_base_point(config: &Configuration, clearance: f64) -> Complex64 {
    let pts = config.finite_points();
    let centre = centroid(&pts);
    let spread = pts.iter().map(|p| (p - centre).norm()).fold(0.0, f64::max);
    let radius = spread + config.min_distance();
    let candidates = 24;
    let mut best = (f64::NEG_INFINITY, centre + Complex64::new(0.0, -radius));
    for k in 0..candidates {
        let th = -std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / candidates as f64;
        let b = centre + Complex64::from_polar(radius, th);
        let mut margin = f64::INFINITY;
        for (i, &z) in pts.iter().enumerate() {
            for (j, &q) in pts.iter().enumerate() {
                if i != j {
                    margin = margin.min(segment_distance(b, z, q));
                }
            }
        }
        if margin >= 1.5 * clearance {
            return b;
        }
        if margin > best.0 {
            best = (margin, b);
        }
    }
    best.1
}

/// Monodromy matrix of the loop around point `i` from `base`, with the
/// standard frame at `base`.
pub fn loop_monodromy(tensor: &StressTensor, i: usize, base: Complex64) -> Result<Mat2> {
    let clearance = default_clearance(tensor.config());
    let geo = LoopGeometry::with_base(tensor.config(), base, clearance)?;
    let loop_path = geo
        .loops
        .get(i)
        .ok_or_else(|| Error::Dimension(format!("no singular point {i}")))?;
    loop_matrix(tensor, loop_path, DEFAULT_TOL)
}

fn loop_matrix(tensor: &StressTensor, path: &PathPolyline, tol: f64) -> Result<Mat2> {
    let start = FrameTransport::standard(path.start());
    let end = transport(tensor, &start, path, tol)?;
    let inv = start.frame.inverse().expect("standard frame is invertible");
    Ok(inv * end.frame)
}

/// Monodromy generators of all singular points from a common base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyRep {
    pub base_point: Complex64,
    pub generators: Vec<Mat2>,
    pub loop_order: Vec<usize>,
}

impl MonodromyRep {
    pub fn compute(tensor: &StressTensor, geo: &LoopGeometry, tol: f64) -> Result<Self> {
        let generators = geo
            .loops
            .par_iter()
            .map(|l| loop_matrix(tensor, l, tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base_point: geo.base_point,
            generators,
            loop_order: geo.loop_order.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    /// Ordered product of all generators.
    pub fn ordered_product(&self) -> Mat2 {
        self.loop_order
            .iter()
            .fold(Mat2::identity(), |acc, &i| acc * self.generators[i])
    }

    /// Distance of the ordered product from `±I`.
    pub fn product_residual(&self) -> f64 {
        let p = self.ordered_product();
        (p - Mat2::identity())
            .max_abs()
            .min((p + Mat2::identity()).max_abs())
    }

    /// Maximum `|det γ_i − 1|`.
    pub fn determinant_residual(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| (g.det() - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// Fixed points of the Möbius map `w ↦ (g₁₁w + g₂₁)/(g₁₂w + g₂₂)` of
    /// generator `i` (acting on `w = u₁/u₂` after a change of basis by `conj`).
    pub fn fixed_points(&self, i: usize, conj: &Mat2) -> Option<(Complex64, Complex64)> {
        let inv = conj.inverse()?;
        let g = inv * self.generators[i] * *conj;
        mobius_fixed_points(&g)
    }
}

/// Fixed points of `w ↦ (g₁₁w + g₂₁)/(g₁₂w + g₂₂)`.
pub fn mobius_fixed_points(g: &Mat2) -> Option<(Complex64, Complex64)> {
    let a = g.get(0, 1);
    let b = g.get(1, 1) - g.get(0, 0);
    let c = -g.get(1, 0);
    if a.norm() < 1e-300 {
        return None;
    }
    let disc = (b * b - 4.0 * a * c).sqrt();
    Some(((-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)))
}

/// Möbius action of a row-convention matrix on `w = v₁/v₂`.
pub fn mobius_apply(g: &Mat2, w: Complex64) -> Complex64 {
    (g.get(0, 0) * w + g.get(1, 0)) / (g.get(0, 1) * w + g.get(1, 1))
}

/// Which trace pairs enter the reality residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PairSet {
    /// Pairs `(i, j)` of finite points with `i < j ≤ i + 2`.
    #[default]
    Consecutive,
    /// All pairs of finite points.
    All,
}

impl PairSet {
    pub fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        let m = n - 1;
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if matches!(self, PairSet::All) || j <= i + 2 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// `Im tr(γ_i γ_j)` over the chosen pairs of finite points.
pub fn reality_residual(rep: &MonodromyRep, pairs: PairSet) -> Vec<f64> {
    pairs
        .pairs(rep.n())
        .into_iter()
        .map(|(i, j)| (rep.generators[i] * rep.generators[j]).trace().im)
        .collect()
}

/// Signature of a Hermitian form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signature {
    /// Definite: the compact real form.
    PositivePositive,
    /// Indefinite `(1, 1)`: the hyperbolic real form.
    PositiveNegative,
    Degenerate,
}

/// An invariant Hermitian form of the monodromy group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermitianForm {
    pub h: Mat2,
    pub signature: Signature,
    pub eigenvalues: [f64; 2],
    /// Maximum `‖γ H γ* − H‖` over the generators.
    pub residual: f64,
}

/// Eigenvalues of a Hermitian 2×2 matrix, ascending.
pub fn hermitian_eigenvalues(h: &Mat2) -> [f64; 2] {
    let a = h.get(0, 0).re;
    let d = h.get(1, 1).re;
    let b = h.get(0, 1);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - rad, mean + rad]
}

/// Signature with eigenvalue threshold `1e-10`.
pub fn signature_of(h: &Mat2) -> Signature {
    let [lo, hi] = hermitian_eigenvalues(h);
    let thr = 1e-10;
    if lo.abs() < thr || hi.abs() < thr {
        Signature::Degenerate
    } else if (lo > 0.0) == (hi > 0.0) {
        Signature::PositivePositive
    } else {
        Signature::PositiveNegative
    }
}

fn hermitian_from(x: &[f64]) -> Mat2 {
    Mat2::new(
        Complex64::new(x[0], 0.0),
        Complex64::new(x[2], x[3]),
        Complex64::new(x[2], -x[3]),
        Complex64::new(x[1], 0.0),
    )
}

/// Solves `γ H γ* = H` for all generators in the real 4-dimensional space of
/// Hermitian matrices.
pub fn invariant_form(rep: &MonodromyRep) -> Result<HermitianForm> {
    let rows = 4 * rep.n();
    let mut a = DMatrix::<f64>::zeros(rows, 4);
    for (gi, g) in rep.generators.iter().enumerate() {
        for k in 0..4 {
            let mut e = [0.0; 4];
            e[k] = 1.0;
            let basis = hermitian_from(&e);
            let out = *g * basis * g.adjoint() - basis;
            a[(4 * gi, k)] = out.get(0, 0).re;
            a[(4 * gi + 1, k)] = out.get(1, 1).re;
            a[(4 * gi + 2, k)] = out.get(0, 1).re;
            a[(4 * gi + 3, k)] = out.get(0, 1).im;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s = &svd.singular_values;
    let s_max = s.max();
    let null_thr = 1e-6 * s_max.max(1e-300);
    let dim = s.iter().filter(|&&x| x <= null_thr).count();
    if dim != 1 {
        return Err(Error::Reducible(dim));
    }
    let (k_min, _) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("four singular values");
    let x: Vec<f64> = (0..4).map(|j| v_t[(k_min, j)]).collect();
    let mut h = hermitian_from(&x);
    let nrm = h.norm();
    h = h.scale(Complex64::new(1.0 / nrm, 0.0));
    if h.get(0, 0).re < 0.0 {
        h = -h;
    }
    let residual = form_residual(rep, &h);
    Ok(HermitianForm {
        h,
        signature: signature_of(&h),
        eigenvalues: hermitian_eigenvalues(&h),
        residual,
    })
}

/// Maximum `‖γ H γ* − H‖` over all generators.
pub fn form_residual(rep: &MonodromyRep, h: &Mat2) -> f64 {
    rep.generators
        .iter()
        .map(|g| (*g * *h * g.adjoint() - *h).norm())
        .fold(0.0, f64::max)
}

/// Options of the accessory solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Success threshold on the residual 2-norm.
    pub tol: f64,
    /// Residual level at which iteration stops early.
    pub target: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub ode_tol: f64,
    pub pairs: PairSet,
    pub clearance: Option<f64>,
    pub base_point: Option<Complex64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            target: 1e-12,
            max_iter: 60,
            fd_step: 1e-6,
            ode_tol: DEFAULT_TOL,
            pairs: PairSet::Consecutive,
            clearance: None,
            base_point: None,
        }
    }
}

/// Outcome of an accessory solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub accessory: AccessoryVector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub form: HermitianForm,
    /// Ratio of extreme singular values of the final Jacobian.
    pub condition: f64,
    pub rep: MonodromyRep,
    pub geometry: LoopGeometry,
}

impl SolveReport {
    pub fn tensor(&self, config: &Configuration, orders: &OrderData) -> Result<StressTensor> {
        StressTensor::new(config.clone(), orders.clone(), self.accessory.clone())
    }
}

struct Problem<'a> {
    config: &'a Configuration,
    orders: &'a OrderData,
    geo: LoopGeometry,
    opts: &'a SolverOptions,
}

impl Problem<'_> {
    fn unpack(x: &[f64]) -> Vec<Complex64> {
        x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
    }

    fn rep(&self, x: &[f64]) -> Result<MonodromyRep> {
        let t = StressTensor::from_free(self.config, self.orders, &Self::unpack(x))?;
        MonodromyRep::compute(&t, &self.geo, self.opts.ode_tol)
    }

    fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        let rep = self.rep(x)?;
        Ok(DVector::from_vec(reality_residual(&rep, self.opts.pairs)))
    }

    fn jacobian(&self, x: &[f64], m: usize) -> Result<DMatrix<f64>> {
        let h = self.opts.fd_step;
        let cols = (0..x.len())
            .into_par_iter()
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let rp = self.residual(&xp)?;
                let rm = self.residual(&xm)?;
                Ok((rp - rm) / (2.0 * h))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut jac = DMatrix::zeros(m, x.len());
        for (j, c) in cols.iter().enumerate() {
            jac.set_column(j, c);
        }
        Ok(jac)
    }
}

fn condition_number(j: &DMatrix<f64>) -> f64 {
    if j.ncols() == 0 {
        return 1.0;
    }
    let s = j.singular_values();
    let lo = s.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        s.max() / lo
    }
}

/// Finds accessory parameters making the monodromy conjugate into `SU(1,1)`
/// by damped least squares on the reality residual.
pub fn solve_accessory(
    config: &Configuration,
    orders: &OrderData,
    guess: &[Complex64],
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if orders.n() != config.n() {
        return Err(Error::Dimension(format!(
            "{} orders for {} points",
            orders.n(),
            config.n()
        )));
    }
    if guess.len() != config.n() - 3 {
        return Err(Error::Dimension(format!(
            "guess has {} entries, expected {}",
            guess.len(),
            config.n() - 3
        )));
    }
    let clearance = opts.clearance.unwrap_or_else(|| default_clearance(config));
    let geo = match opts.base_point {
        Some(b) => LoopGeometry::with_base(config, b, clearance)?,
        None => LoopGeometry::new(config, Some(clearance))?,
    };
    let prob = Problem {
        config,
        orders,
        geo,
        opts,
    };
    let mut x: Vec<f64> = guess.iter().flat_map(|c| [c.re, c.im]).collect();
    let mut r = prob.residual(&x)?;
    let m = r.len();
    let mut norm = r.norm();
    let mut iterations = 0;
    let mut lambda = 1e-3;
    let mut jac = DMatrix::zeros(m, x.len());
    if !x.is_empty() {
        while iterations < opts.max_iter && norm > opts.target {
            iterations += 1;
            jac = prob.jacobian(&x, m)?;
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * &r;
            let scale = jtj.diagonal().max().max(1e-300);
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for k in 0..a.nrows() {
                    a[(k, k)] += lambda * scale;
                }
                let Some(step) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                match prob.residual(&xt) {
                    Ok(rt) if rt.norm() < norm => {
                        let small_step = step.norm() < 1e-15 * (1.0 + DVector::from_vec(x.clone()).norm());
                        x = xt;
                        r = rt;
                        norm = r.norm();
                        lambda = (lambda / 5.0).max(1e-12);
                        improved = !small_step;
                        break;
                    }
                    _ => lambda *= 4.0,
                }
            }
            if !improved {
                break;
            }
        }
    }
    if norm > opts.tol {
        return Err(Error::NoConvergence(format!(
            "reality residual {norm:.3e} after {iterations} iterations"
        )));
    }
    let rep = prob.rep(&x)?;
    let form = invariant_form(&rep)?;
    if form.signature != Signature::PositiveNegative {
        return Err(Error::WrongBranch);
    }
    let free = Problem::unpack(&x);
    let accessory = AccessoryVector::complete(config, orders, &free)?;
    let condition = if x.is_empty() { 1.0 } else { condition_number(&jac) };
    // a unitary representation may still come from a developing map that
    // leaves the disk; the local forms detect this
    let tensor = StressTensor::new(config.clone(), orders.clone(), accessory.clone())?;
    match FieldEvaluator::new(tensor, prob.geo.clone(), &form) {
        Err(Error::Branch(_)) => return Err(Error::WrongBranch),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    Ok(SolveReport {
        accessory,
        residual_norm: norm,
        iterations,
        form,
        condition,
        rep,
        geometry: prob.geo,
    })
}

/// Solves at `target` by continuation from a solved configuration `start`
/// along the straight segment between them, halving the step on failure.
pub fn solve_by_continuation(
    orders: &OrderData,
    start: &Configuration,
    start_solution: &[Complex64],
    target: &Configuration,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let a = start.free_points().to_vec();
    let b = target.free_points().to_vec();
    if a.len() != b.len() {
        return Err(Error::Dimension("configurations differ in size".into()));
    }
    let at = |s: f64| -> Result<Configuration> {
        if s >= 1.0 {
            return Ok(target.clone());
        }
        Configuration::new(a.iter().zip(&b).map(|(p, q)| p + (q - p) * s).collect())
    };
    let mut s: f64 = 0.0;
    let mut ds: f64 = 0.25;
    let mut prev: Vec<Complex64> = start_solution.to_vec();
    let mut prev_prev: Option<(f64, Vec<Complex64>)> = None;
    let span = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (q - p).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    loop {
        // keep each move well inside the current point separation
        let limit = 0.2 * at(s)?.min_distance() / span;
        let s_next = (s + ds.min(limit)).min(1.0);
        let cfg = at(s_next)?;
        let guess: Vec<Complex64> = match &prev_prev {
            Some((sp, pp)) => prev
                .iter()
                .zip(pp)
                .map(|(c1, c0)| c1 + (c1 - c0) * ((s_next - s) / (s - sp)))
                .collect(),
            None => prev.clone(),
        };
        match solve_accessory(&cfg, orders, &guess, opts) {
            Ok(rep) => {
                if s_next >= 1.0 {
                    return Ok(rep);
                }
                prev_prev = Some((s, prev.clone()));
                prev = rep.accessory.free.clone();
                s = s_next;
                ds = (ds * 1.5).min(0.25);
            }
            Err(e) => {
                ds /= 2.0;
                if ds < 1.0 / 4096.0 {
                    return Err(Error::NoConvergence(format!(
                        "continuation stalled at s = {s}: {e}"
                    )));
                }
            }
        }
    }
}

/// Reference configuration with `m` free points placed symmetrically about
/// `Re z = 1/2`, used as a continuation start.
pub fn reference_configuration(m: usize) -> Result<Configuration> {
    let h = 3f64.sqrt() / 2.0;
    let free = (0..m)
        .map(|j| {
            if m == 1 {
                Complex64::new(0.5, 0.0)
            } else {
                let level = (j / 2 + 1) as f64;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(0.5, sign * h * level)
            }
        })
        .collect();
    Configuration::new(free)
}

/// Solves from the zero guess, falling back to continuation from
/// [`reference_configuration`].
pub fn solve_auto(config: &Configuration, orders: &OrderData, opts: &SolverOptions) -> Result<SolveReport> {
    let zero = vec![Complex64::new(0.0, 0.0); config.n() - 3];
    match solve_accessory(config, orders, &zero, opts) {
        Ok(r) => Ok(r),
        Err(e) if config.n() >= 4 => {
            let sym = reference_configuration(config.n() - 3)?;
            let base = solve_accessory(&sym, orders, &zero, opts).map_err(|_| e.clone())?;
            solve_by_continuation(orders, &sym, &base.accessory.free, config, opts)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pair_sets() {
        assert_eq!(PairSet::Consecutive.pairs(4), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(PairSet::Consecutive.pairs(3), vec![(0, 1)]);
        assert_eq!(PairSet::All.pairs(5).len(), 6);
        assert_eq!(PairSet::Consecutive.pairs(5).len(), 5);
    }

    #[test]
    fn signatures() {
        assert_eq!(signature_of(&Mat2::real(1.0, 0.0, 0.0, -1.0)), Signature::PositiveNegative);
        assert_eq!(signature_of(&Mat2::real(1.0, 0.0, 0.0, 2.0)), Signature::PositivePositive);
        assert_eq!(signature_of(&Mat2::real(1.0, 0.0, 0.0, 0.0)), Signature::Degenerate);
    }

    #[test]
    fn triple_traces_and_product() {
        let o = OrderData::new(&[0.8, 0.8, 0.8]).unwrap();
        let cfg = Configuration::triple();
        let t = StressTensor::from_free(&cfg, &o, &[]).unwrap();
        let geo = LoopGeometry::new(&cfg, None).unwrap();
        let rep = MonodromyRep::compute(&t, &geo, DEFAULT_TOL).unwrap();
        let expect = 2.0 * (0.2 * std::f64::consts::PI).cos();
        for g in &rep.generators {
            assert!((g.trace().norm() - expect).abs() < 1e-9);
        }
        assert!(rep.determinant_residual() < 1e-10);
        assert!(rep.product_residual() < 1e-8, "{}", rep.product_residual());
        let res = reality_residual(&rep, PairSet::All);
        assert!(res.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn triple_solve_is_immediate() {
        let o = OrderData::new(&[0.8, 0.8, 0.8]).unwrap();
        let r = solve_accessory(&Configuration::triple(), &o, &[], &SolverOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.form.signature, Signature::PositiveNegative);
        assert!(r.form.residual < 1e-8);
    }

    #[test]
    fn mobius_fixed_points_are_fixed() {
        let g = Mat2::new(c(0.8, 0.3), c(0.2, -0.1), c(0.5, 0.4), c(1.1, -0.2));
        let (a, b) = mobius_fixed_points(&g).unwrap();
        assert!((mobius_apply(&g, a) - a).norm() < 1e-12);
        assert!((mobius_apply(&g, b) - b).norm() < 1e-12);
    }
}
