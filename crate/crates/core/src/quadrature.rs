//! Integration over the sphere of densities with power-law singularities.
//!
//! The plane is split into a square around every finite singular point, the
//! exterior of a large box (handled in the chart `ζ = 1/z`) and a background
//! of rectangles refined until each is far from every singular point
//! relative to its size. Squares and the exterior are cut into triangles
//! with a vertex at the singular point; in polar-like coordinates
//! `ζ = τ B(σ)` the radial variable is graded as `τ = x^{1/p}` and
//! integrated with a tanh-sinh rule, so that a density behaving like
//! `|ζ|^{p−2}` becomes smooth.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

/// Resolution parameters for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureBudget {
    /// Gauss–Legendre order per background rectangle side.
    pub gauss: usize,
    /// Gauss–Legendre order along triangle sides.
    pub sigma: usize,
    /// Step of the tanh-sinh radial rule.
    pub radial_step: f64,
    /// Truncation of the tanh-sinh variable.
    pub radial_extent: f64,
    /// Background rectangles must satisfy `distance ≥ refine · diameter`.
    pub refine: f64,
    /// Maximum number of background rectangles.
    pub max_cells: usize,
}

impl Default for QuadratureBudget {
    fn default() -> Self {
        Self {
            gauss: 12,
            sigma: 24,
            radial_step: 1.0 / 8.0,
            radial_extent: 3.5,
            refine: 1.0,
            max_cells: 20_000,
        }
    }
}

impl QuadratureBudget {
    /// A budget with roughly twice the resolution in every direction.
    pub fn refined(&self) -> Self {
        Self {
            gauss: self.gauss + 4,
            sigma: self.sigma * 3 / 2,
            radial_step: self.radial_step / 2.0,
            radial_extent: self.radial_extent,
            refine: self.refine * 1.5,
            max_cells: self.max_cells * 4,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// One node of the graded radial rule on `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialNode {
    pub log_x: f64,
    /// Weight for `∫ g(x) dx / x`, i.e. `h · x'(s) / x`.
    pub weight: f64,
    /// Whether the node belongs to the rule with twice the step.
    pub coarse: bool,
}

/// Tanh-sinh nodes for `∫₀¹ g(x) dx/x` with `g(x) = O(x)` at the origin.
pub fn radial_rule(step: f64, extent: f64) -> Vec<RadialNode> {
    let k = (extent / step).round() as i64;
    (-k..=k)
        .map(|j| {
            let s = j as f64 * step;
            let v = PI * s.sinh();
            RadialNode {
                log_x: -softplus(-v),
                weight: step * PI * s.cosh() * (-softplus(v)).exp(),
                coarse: j % 2 == 0,
            }
        })
        .collect()
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v + (-v).exp()
    } else {
        v.exp().ln_1p()
    }
}

/// A density to be integrated over the sphere.
///
/// `chart` returns the density times `|ζ|²` in the chart of singular point
/// `k` (index `points.len()` is infinity, with `ζ = 1/z` and the density
/// taken with respect to `dA_ζ`); it must be `O(|ζ|^p)` with `p = power(k)`.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;
    fn power(&self, k: usize) -> f64;
    fn background(&self, cell: usize, z: Complex64, out: &mut [f64]);
    fn chart(&self, k: usize, log_t: f64, dir: Complex64, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn centre(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    pub fn distance(&self, p: Complex64) -> f64 {
        let dx = (self.x0 - p.re).max(p.re - self.x1).max(0.0);
        let dy = (self.y0 - p.im).max(p.im - self.y1).max(0.0);
        dx.hypot(dy)
    }

    fn split(&self, four: bool) -> Vec<Rect> {
        let (w, h) = (self.x1 - self.x0, self.y1 - self.y0);
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        if four {
            vec![
                Rect { x0: self.x0, x1: xm, y0: self.y0, y1: ym },
                Rect { x0: xm, x1: self.x1, y0: self.y0, y1: ym },
                Rect { x0: self.x0, x1: xm, y0: ym, y1: self.y1 },
                Rect { x0: xm, x1: self.x1, y0: ym, y1: self.y1 },
            ]
        } else if w >= h {
            vec![
                Rect { x0: self.x0, x1: xm, ..*self },
                Rect { x0: xm, x1: self.x1, ..*self },
            ]
        } else {
            vec![
                Rect { y0: self.y0, y1: ym, ..*self },
                Rect { y0: ym, y1: self.y1, ..*self },
            ]
        }
    }
}

/// Square around a finite singular point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub index: usize,
    pub centre: Complex64,
    pub half: f64,
}

/// Decomposition of the sphere into squares, background rectangles and the
/// exterior of the box `[−L, L]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub points: Vec<Complex64>,
    pub box_half: f64,
    pub squares: Vec<Square>,
    pub cells: Vec<Rect>,
}

/// Fraction of the nearest-neighbour distance used as square half-width.
pub const SQUARE_FRACTION: f64 = 0.25;

impl Domain {
    pub fn new(points: &[Complex64], budget: &QuadratureBudget) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfiguration("no singular points".into()));
        }
        let box_half = 4.0 * points.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let squares: Vec<Square> = points
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let d = points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, q)| (p - q).norm())
                    .fold(f64::INFINITY, f64::min);
                Square {
                    index: k,
                    centre: p,
                    half: SQUARE_FRACTION * d.min(box_half),
                }
            })
            .collect();
        let mut xs = vec![-box_half, box_half];
        let mut ys = vec![-box_half, box_half];
        for s in &squares {
            xs.extend([s.centre.re - s.half, s.centre.re + s.half]);
            ys.extend([s.centre.im - s.half, s.centre.im + s.half]);
        }
        let dedup = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * box_half);
        };
        dedup(&mut xs);
        dedup(&mut ys);
        let mut stack = Vec::new();
        for i in 0..xs.len() - 1 {
            for j in 0..ys.len() - 1 {
                let r = Rect { x0: xs[i], x1: xs[i + 1], y0: ys[j], y1: ys[j + 1] };
                let c = r.centre();
                let inside = squares
                    .iter()
                    .any(|s| (c.re - s.centre.re).abs() < s.half && (c.im - s.centre.im).abs() < s.half);
                if !inside {
                    stack.push(r);
                }
            }
        }
        let mut cells = Vec::new();
        while let Some(r) = stack.pop() {
            let (w, h) = (r.x1 - r.x0, r.y1 - r.y0);
            let dist = points.iter().map(|&p| r.distance(p)).fold(f64::INFINITY, f64::min);
            if w > 2.0 * h || h > 2.0 * w {
                stack.extend(r.split(false));
            } else if dist < budget.refine * r.diameter() {
                stack.extend(r.split(true));
            } else {
                cells.push(r);
            }
            if cells.len() + stack.len() > budget.max_cells {
                return Err(Error::Budget(format!(
                    "background needs more than {} cells",
                    budget.max_cells
                )));
            }
        }
        cells.sort_by(|a, b| {
            (a.y0, a.x0)
                .partial_cmp(&(b.y0, b.x0))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(Self {
            points: points.to_vec(),
            box_half,
            squares,
            cells,
        })
    }

    /// Chart index of infinity.
    pub fn infinity(&self) -> usize {
        self.points.len()
    }

    /// Triangle sides `(k, a, b)`: for finite `k` the corners relative to
    /// the point, for infinity the corners of the box in `z`.
    fn sides(&self) -> Vec<(usize, Complex64, Complex64)> {
        let unit = [
            Complex64::new(1.0, -1.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(-1.0, -1.0),
        ];
        let mut out = Vec::new();
        for s in &self.squares {
            for q in 0..4 {
                out.push((s.index, unit[q] * s.half, unit[(q + 1) % 4] * s.half));
            }
        }
        for q in 0..4 {
            out.push((self.infinity(), unit[q] * self.box_half, unit[(q + 1) % 4] * self.box_half));
        }
        out
    }
}

/// Integral values with per-component error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub evaluations: usize,
    pub cells: usize,
}

struct Piece {
    value: Vec<f64>,
    error: Vec<f64>,
    evals: usize,
}

fn reduce(pieces: Vec<Piece>, dim: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let mut values = Vec::with_capacity(dim);
    let mut errors = Vec::with_capacity(dim);
    for c in 0..dim {
        let v: Vec<f64> = pieces.iter().map(|p| p.value[c]).collect();
        let e: Vec<f64> = pieces.iter().map(|p| p.error[c].abs()).collect();
        values.push(pairwise_sum(&v));
        errors.push(pairwise_sum(&e));
    }
    (values, errors, pieces.iter().map(|p| p.evals).sum())
}

fn cell_rule(f: &dyn Integrand, idx: usize, r: &Rect, x: &[f64], w: &[f64], buf: &mut [f64], acc: &mut [f64]) {
    let hx = 0.5 * (r.x1 - r.x0);
    let hy = 0.5 * (r.y1 - r.y0);
    let c = r.centre();
    acc.iter_mut().for_each(|a| *a = 0.0);
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in x.iter().enumerate() {
            let z = Complex64::new(c.re + hx * xi, c.im + hy * yj);
            f.background(idx, z, buf);
            let ww = w[i] * w[j] * hx * hy;
            for (a, b) in acc.iter_mut().zip(buf.iter()) {
                *a += ww * b;
            }
        }
    }
}

/// Contribution of one triangle at one set of side nodes.
#[allow(clippy::too_many_arguments)]
fn triangle_rule(
    f: &dyn Integrand,
    k: usize,
    infinity: bool,
    a: Complex64,
    b: Complex64,
    sig: (&[f64], &[f64]),
    radial: &[RadialNode],
    buf: &mut [f64],
    fine: &mut [f64],
    coarse: &mut [f64],
) {
    let p = f.power(k);
    fine.iter_mut().for_each(|v| *v = 0.0);
    coarse.iter_mut().for_each(|v| *v = 0.0);
    let d = 0.5 * (b - a);
    for (s, ws) in sig.0.iter().zip(sig.1) {
        let bz = a + (s + 1.0) * d;
        let (bb, db) = if infinity {
            let inv = bz.inv();
            (inv, -d * inv * inv)
        } else {
            (bz, d)
        };
        let jac = (bb.conj() * db).im.abs();
        let norm = bb.norm();
        let dir = bb / norm;
        let ln_b = norm.ln();
        let outer = ws * jac / (norm * norm) / p;
        for node in radial {
            let log_t = node.log_x / p + ln_b;
            f.chart(k, log_t, dir, buf);
            let wf = outer * node.weight;
            for (v, x) in fine.iter_mut().zip(buf.iter()) {
                *v += wf * x;
            }
            if node.coarse {
                for (v, x) in coarse.iter_mut().zip(buf.iter()) {
                    *v += 2.0 * wf * x;
                }
            }
        }
    }
}

/// Integrates `f` over the sphere.
pub fn integrate(f: &dyn Integrand, domain: &Domain, budget: &QuadratureBudget) -> Result<QuadResult> {
    let dim = f.dim();
    let (gx, gw) = gauss_legendre(budget.gauss);
    let (lx, lw) = gauss_legendre(budget.gauss.saturating_sub(4).max(2));
    let (sx, sw) = gauss_legendre(budget.sigma);
    let (tx, tw) = gauss_legendre((budget.sigma * 2 / 3).max(2));
    let radial = radial_rule(budget.radial_step, budget.radial_extent);
    let cells: Vec<Piece> = domain
        .cells
        .par_iter()
        .enumerate()
        .map(|(idx, r)| {
            let mut buf = vec![0.0; dim];
            let mut hi = vec![0.0; dim];
            let mut lo = vec![0.0; dim];
            cell_rule(f, idx, r, &gx, &gw, &mut buf, &mut hi);
            cell_rule(f, idx, r, &lx, &lw, &mut buf, &mut lo);
            let error = hi.iter().zip(&lo).map(|(a, b)| (a - b).abs()).collect();
            Piece {
                value: hi,
                error,
                evals: gx.len() * gx.len() + lx.len() * lx.len(),
            }
        })
        .collect();
    let inf = domain.infinity();
    let tris: Vec<Piece> = domain
        .sides()
        .into_par_iter()
        .map(|(k, a, b)| {
            let mut buf = vec![0.0; dim];
            let mut fine = vec![0.0; dim];
            let mut coarse = vec![0.0; dim];
            let mut alt = vec![0.0; dim];
            let mut scratch = vec![0.0; dim];
            triangle_rule(f, k, k == inf, a, b, (&sx, &sw), &radial, &mut buf, &mut fine, &mut coarse);
            triangle_rule(f, k, k == inf, a, b, (&tx, &tw), &radial, &mut buf, &mut alt, &mut scratch);
            let error = (0..dim)
                .map(|c| (fine[c] - coarse[c]).abs() + (fine[c] - alt[c]).abs())
                .collect();
            Piece {
                value: fine,
                error,
                evals: (sx.len() + tx.len()) * radial.len(),
            }
        })
        .collect();
    let mut pieces = cells;
    pieces.extend(tris);
    let (values, errors, evaluations) = reduce(pieces, dim);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("non-finite quadrature value".into()));
    }
    Ok(QuadResult {
        values,
        errors,
        evaluations,
        cells: domain.cells.len(),
    })
}

/// Integrates the chart density of point `k` over `|ζ| < radius`.
pub fn disk_integral(f: &dyn Integrand, k: usize, radius: f64, budget: &QuadratureBudget) -> QuadResult {
    let dim = f.dim();
    let p = f.power(k);
    let m = 2 * budget.sigma.max(8);
    let radial = radial_rule(budget.radial_step, budget.radial_extent);
    let mut buf = vec![0.0; dim];
    let mut fine = vec![vec![0.0; m]; dim];
    let mut coarse = vec![vec![0.0; m]; dim];
    let ln_r = radius.ln();
    for j in 0..m {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
        for node in &radial {
            f.chart(k, node.log_x / p + ln_r, dir, &mut buf);
            for c in 0..dim {
                let v = node.weight / p * buf[c];
                fine[c][j] += v;
                if node.coarse {
                    coarse[c][j] += 2.0 * v;
                }
            }
        }
    }
    let dt = 2.0 * PI / m as f64;
    let mut values = Vec::with_capacity(dim);
    let mut errors = Vec::with_capacity(dim);
    for c in 0..dim {
        let all = pairwise_sum(&fine[c]) * dt;
        let half: Vec<f64> = fine[c].iter().step_by(2).copied().collect();
        let half = pairwise_sum(&half) * 2.0 * dt;
        let rc = pairwise_sum(&coarse[c]) * dt;
        values.push(all);
        errors.push((all - half).abs() + (all - rc).abs());
    }
    QuadResult {
        values,
        errors,
        evaluations: m * radial.len(),
        cells: 0,
    }
}
