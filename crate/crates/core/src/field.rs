//! The hyperbolic metric `e^φ |dz|²` reconstructed from a unitarizable frame.
//!
//! With an invariant form `H` of signature `(1, 1)` and a solution row `u`,
//! `e^{-φ/2} = −u H u* / (2 |W| √(−det H))` and `φ_z = −2 u' H u* / (u H u*)`.
//! Near each singular point the same expression is evaluated through the
//! Frobenius basis, in which the invariant form is diagonal; this keeps the
//! evaluation accurate down to the singular point and lets quadrature carry
//! `log |ζ|` instead of `|ζ|`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_pair, hermitian_quad, Mat2};
use crate::model::{Configuration, OrderData, StressTensor};
use crate::monodromy::{
    mobius_fixed_points, solve_auto, HermitianForm, LoopGeometry, MonodromyRep, SolveReport, SolverOptions,
};
use crate::ode::{
    chart_radius, circle_polygon, plan_path, transport, transport_segment, Chart, FrameTransport,
    FrobeniusSeed, PathPolyline, TaylorPatch, DEFAULT_TOL,
};
use crate::quadrature::{Domain, QuadratureBudget};

/// Fraction of the chart radius covered by the Frobenius series.
pub const FINITE_CHART_FRACTION: f64 = 0.36;
/// Fraction of the chart radius at infinity covered by the series.
pub const INFINITY_CHART_FRACTION: f64 = 0.3;

/// Pointwise field data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub z: Complex64,
    pub e_phi: f64,
    pub phi: f64,
    pub phi_z: Complex64,
    /// Developing map in the disk gauge, when available.
    pub w: Option<Complex64>,
}

/// Field data in a local chart, with the radius carried as `log t`.
///
/// For a finite point `log_e = log e^{-φ/2}` and `φ_z = (−α + reg)/ζ`.
/// For infinity (`ζ = 1/z`) `log_e` refers to the chart metric
/// `e^{φ̃} |dζ|²`, `φ = φ̃ + 4 log t`, and `∂φ/∂ζ = (2 − α + reg)/ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartValue {
    pub index: usize,
    pub infinity: bool,
    pub alpha: f64,
    pub log_t: f64,
    pub dir: Complex64,
    pub log_e: f64,
    pub reg: Complex64,
}

impl ChartValue {
    pub fn zeta(&self) -> Complex64 {
        self.dir * self.log_t.exp()
    }

    /// True `φ` at the point.
    pub fn phi(&self) -> f64 {
        let chart = -2.0 * self.log_e;
        if self.infinity {
            chart + 4.0 * self.log_t
        } else {
            chart
        }
    }

    /// `t² e^{φ}` for finite points, `t² e^{φ̃}` at infinity: the
    /// `t²`-scaled area density in the chart.
    pub fn scaled_area_density(&self) -> f64 {
        (2.0 * self.log_t - 2.0 * self.log_e).exp()
    }

    /// The leading coefficient `a` of `φ_ζ ≈ a/ζ` in the chart.
    pub fn leading(&self) -> f64 {
        if self.infinity {
            2.0 - self.alpha
        } else {
            -self.alpha
        }
    }
}

/// Frobenius data at one singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub index: usize,
    pub alpha: f64,
    pub seed: FrobeniusSeed,
    /// `Y = Φ P` at the seed point.
    pub p: Mat2,
    /// Invariant form in the Frobenius basis, `P H P*`.
    pub g: Mat2,
    pub lambda: f64,
    pub log_lambda: f64,
    pub kappa: f64,
    /// Relative size of the off-diagonal part of `g`.
    pub defect: f64,
    /// Largest `|ζ|` at which the chart is used.
    pub eval_radius: f64,
}

impl ChartData {
    /// `φ` at the point minus its logarithmic part, at the point itself:
    /// the regular value `lim (φ + 2α log|ζ|)` of the chart metric.
    pub fn regular_value(&self) -> f64 {
        -2.0 * self.log_lambda
    }
}

/// Reconstructs `φ` from a solved accessory problem.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    tensor: StressTensor,
    base: FrameTransport,
    geometry: LoopGeometry,
    h: Mat2,
    scale: f64,
    conj: Mat2,
    charts: Vec<ChartData>,
    tol: f64,
}

impl FieldEvaluator {
    /// Builds the evaluator from the loop geometry and invariant form used
    /// to certify the tensor's accessory parameters.
    pub fn new(tensor: StressTensor, geometry: LoopGeometry, form: &HermitianForm) -> Result<Self> {
        Self::with_tolerance(tensor, geometry, form, DEFAULT_TOL)
    }

    pub fn with_tolerance(
        tensor: StressTensor,
        geometry: LoopGeometry,
        form: &HermitianForm,
        tol: f64,
    ) -> Result<Self> {
        let base = FrameTransport::standard(geometry.base_point);
        let mut h = form.h;
        let q = hermitian_quad(base.values(), &h);
        if q == 0.0 {
            return Err(Error::Branch("invariant form is null at the base point".into()));
        }
        if q > 0.0 {
            h = -h;
        }
        let det_h = h.det().re;
        if det_h >= 0.0 {
            return Err(Error::Branch("invariant form is not of signature (1,1)".into()));
        }
        let scale = 1.0 / (2.0 * base.wronskian.norm() * (-det_h).sqrt());
        let conj = conjugator(&h, &base)?;
        let mut ev = Self {
            tensor,
            base,
            geometry,
            h,
            scale,
            conj,
            charts: Vec::new(),
            tol,
        };
        let charts = (0..ev.tensor.n())
            .into_par_iter()
            .map(|k| ev.build_chart(k))
            .collect::<Result<Vec<_>>>()?;
        ev.charts = charts;
        Ok(ev)
    }

    /// Builds the evaluator for the result of an accessory solve.
    pub fn from_solve(config: &Configuration, orders: &OrderData, report: &SolveReport) -> Result<Self> {
        let tensor = report.tensor(config, orders)?;
        Self::new(tensor, report.geometry.clone(), &report.form)
    }

    /// Solves the accessory problem and reconstructs the field.
    pub fn solve(config: &Configuration, orders: &OrderData, opts: &SolverOptions) -> Result<(SolveReport, Self)> {
        let report = solve_auto(config, orders, opts)?;
        let ev = Self::from_solve(config, orders, &report)?;
        Ok((report, ev))
    }

    pub fn tensor(&self) -> &StressTensor {
        &self.tensor
    }

    pub fn geometry(&self) -> &LoopGeometry {
        &self.geometry
    }

    pub fn base_point(&self) -> Complex64 {
        self.base.base_point
    }

    pub fn base_frame(&self) -> &FrameTransport {
        &self.base
    }

    /// Invariant form, sign-normalized so that `−u H u* > 0`.
    pub fn form(&self) -> &Mat2 {
        &self.h
    }

    /// The conjugator `C` with `C J C* = H`, `J = diag(1, −1)`.
    pub fn conjugator(&self) -> &Mat2 {
        &self.conj
    }

    pub fn charts(&self) -> &[ChartData] {
        &self.charts
    }

    pub fn chart(&self, k: usize) -> &ChartData {
        &self.charts[k]
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn clearance(&self) -> f64 {
        self.geometry.clearance
    }

    fn build_chart(&self, k: usize) -> Result<ChartData> {
        let n = self.tensor.n();
        let alpha = self.tensor.orders().alpha(k);
        let radius = chart_radius(&self.tensor, k);
        let (series_radius, seed_r) = if k == n - 1 {
            (INFINITY_CHART_FRACTION * radius, 0.25 * radius)
        } else {
            (FINITE_CHART_FRACTION * radius, self.clearance() / 2.0)
        };
        let seed = FrobeniusSeed::build(&self.tensor, k, series_radius)?;
        let zeta_s = Complex64::new(seed_r, 0.0);
        let z_s = seed.chart.to_z(zeta_s);
        let config = self.tensor.config();
        let frame = match seed.chart {
            Chart::Finite(zk) => {
                let entry = zk + Complex64::new(self.clearance(), 0.0);
                let path = plan_path(self.base.base_point, entry, config, self.clearance())?;
                let f = transport(&self.tensor, &self.base, &path, self.tol)?;
                let (y, _) = transport_segment(&self.tensor, f.frame, entry, z_s, self.tol)?;
                y
            }
            Chart::Infinity => {
                let path = plan_path(self.base.base_point, z_s, config, self.clearance())?;
                transport(&self.tensor, &self.base, &path, self.tol)?.frame
            }
        };
        let y_chart = seed.chart.frame_to_chart(z_s, &frame);
        let phi = seed.chart_frame(zeta_s);
        let p = phi.inverse().ok_or_else(|| Error::Branch("singular Frobenius frame".into()))? * y_chart;
        let g = p * self.h * p.adjoint();
        let gpp = g.get(0, 0).re;
        let gmm = g.get(1, 1).re;
        let det_g = g.det().re;
        let defect = g.get(0, 1).norm() / (gpp.abs() * gmm.abs()).sqrt();
        if !(gmm < 0.0) || !(det_g < 0.0) {
            return Err(Error::Branch(format!(
                "local form at point {k} has the wrong sign pattern"
            )));
        }
        let lambda = -gmm / (2.0 * seed.wronskian().abs() * (-det_g).sqrt());
        let eval_radius = if k == n - 1 {
            series_radius
        } else {
            series_radius.min(FINITE_CHART_FRACTION * radius)
        };
        Ok(ChartData {
            index: k,
            alpha,
            seed,
            p,
            g,
            lambda,
            log_lambda: lambda.ln(),
            kappa: gpp / gmm,
            defect,
            eval_radius,
        })
    }

    /// Evaluates the field in chart `k` at `ζ = e^{log_t} dir`.
    pub fn chart_eval(&self, k: usize, log_t: f64, dir: Complex64) -> ChartValue {
        let ch = &self.charts[k];
        let zeta = dir * log_t.exp();
        let parts = ch.seed.eval_parts(zeta);
        let a = ch.alpha;
        let s = ch.kappa * ((2.0 - 2.0 * a) * log_t).exp();
        let pm2 = parts.p_minus.norm_sqr();
        let pp2 = parts.p_plus.norm_sqr();
        let d = pm2 + s * pp2;
        let num = zeta * parts.dp_minus * parts.p_minus.conj()
            + s * ((1.0 - a) * pp2 + zeta * parts.dp_plus * parts.p_plus.conj());
        ChartValue {
            index: k,
            infinity: matches!(ch.seed.chart, Chart::Infinity),
            alpha: a,
            log_t,
            dir,
            log_e: ch.log_lambda + a * log_t + d.ln(),
            reg: -2.0 * num / d,
        }
    }

    /// Index of a chart whose evaluation disk contains `z`.
    pub fn chart_containing(&self, z: Complex64) -> Option<(usize, Complex64)> {
        for ch in &self.charts {
            let zeta = ch.seed.chart.to_zeta(z);
            if zeta.norm() < ch.eval_radius {
                return Some((ch.index, zeta));
            }
        }
        None
    }

    /// Field from a frame at a point.
    pub fn frame_field(&self, frame: &FrameTransport) -> Result<FieldValue> {
        let u = frame.values();
        let du = frame.derivatives();
        let q = hermitian_quad(u, &self.h);
        let e = -q * self.scale;
        if !(e > 0.0) {
            return Err(Error::Branch(format!(
                "metric density is not positive at {}",
                frame.base_point
            )));
        }
        let phi_z = -2.0 * hermitian_pair(du, &self.h, u) / q;
        let v = self.conj.left_mul(u);
        Ok(FieldValue {
            z: frame.base_point,
            e_phi: e.powi(-2),
            phi: -2.0 * e.ln(),
            phi_z,
            w: Some(v[0] / v[1]),
        })
    }

    /// Frame at `z` continued from the base point.
    pub fn frame_at(&self, z: Complex64) -> Result<FrameTransport> {
        let rho = self.tensor.singular_distance(z);
        if rho == 0.0 {
            return Err(Error::Pole(z));
        }
        let clearance = self.clearance().min(0.9 * rho);
        let path = plan_path(self.base.base_point, z, self.tensor.config(), clearance)?;
        transport(&self.tensor, &self.base, &path, self.tol)
    }

    /// `e^φ` and `φ_z` at `z`.
    pub fn field_at(&self, z: Complex64) -> Result<FieldValue> {
        if self.tensor.singular_distance(z) == 0.0 {
            return Err(Error::Pole(z));
        }
        let value = match self.chart_containing(z) {
            Some((k, zeta)) => self.chart_field(k, zeta),
            None => self.frame_field(&self.frame_at(z)?)?,
        };
        if let Some(w) = value.w {
            if w.norm() >= 1.0 {
                return Err(Error::Branch(format!("|w| = {} ≥ 1 at {z}", w.norm())));
            }
        }
        Ok(value)
    }

    fn chart_field(&self, k: usize, zeta: Complex64) -> FieldValue {
        let cv = self.chart_eval(k, zeta.norm().ln(), zeta / zeta.norm());
        let ch = &self.charts[k];
        let z = ch.seed.chart.to_z(zeta);
        let phi = cv.phi();
        let phi_z = if cv.infinity {
            let phi_zeta = (cv.leading() + cv.reg) / zeta;
            -zeta * zeta * phi_zeta
        } else {
            (cv.leading() + cv.reg) / zeta
        };
        let f = ch.seed.chart_frame(zeta);
        let v = self.conj.left_mul(ch.p.left_mul(f.row(0)));
        FieldValue {
            z,
            e_phi: (-phi).exp().recip(),
            phi,
            phi_z,
            w: Some(v[0] / v[1]),
        }
    }

    /// Generators conjugated by `C`; these preserve `J = diag(1, −1)`.
    pub fn conjugated(&self, rep: &MonodromyRep) -> Vec<Mat2> {
        let inv = self.conj.inverse().expect("conjugator is invertible");
        rep.generators.iter().map(|g| inv * *g * self.conj).collect()
    }

    /// Maximum `‖γ̃ J γ̃* − J‖` over the conjugated generators.
    pub fn conjugation_residual(&self, rep: &MonodromyRep) -> f64 {
        let j = Mat2::real(1.0, 0.0, 0.0, -1.0);
        self.conjugated(rep)
            .iter()
            .map(|g| (*g * j * g.adjoint() - j).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum defect of diagonality of the local invariant forms.
    pub fn chart_defect(&self) -> f64 {
        self.charts.iter().map(|c| c.defect).fold(0.0, f64::max)
    }

    /// Writes `x,y,e_phi` rows for a rectangular grid.
    pub fn dump_grid<W: Write>(
        &self,
        out: &mut W,
        re: (f64, f64),
        im: (f64, f64),
        steps: usize,
    ) -> std::io::Result<()> {
        writeln!(out, "x,y,e_phi")?;
        let steps = steps.max(2);
        let pts: Vec<Complex64> = (0..steps)
            .flat_map(|i| {
                (0..steps).map(move |j| {
                    Complex64::new(
                        re.0 + (re.1 - re.0) * i as f64 / (steps - 1) as f64,
                        im.0 + (im.1 - im.0) * j as f64 / (steps - 1) as f64,
                    )
                })
            })
            .collect();
        let vals: Vec<Option<f64>> = pts
            .par_iter()
            .map(|&z| self.field_at(z).ok().map(|f| f.e_phi))
            .collect();
        for (z, v) in pts.iter().zip(vals) {
            match v {
                Some(e) => writeln!(out, "{},{},{:e}", z.re, z.im, e)?,
                None => writeln!(out, "{},{},", z.re, z.im)?,
            }
        }
        Ok(())
    }
}

/// Background patches for quadrature over a [`Domain`].
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub domain: Domain,
    pub patches: Vec<TaylorPatch>,
}

impl FieldGrid {
    /// Builds the domain for the evaluator's singular points and one Taylor
    /// patch per background rectangle.
    pub fn new(ev: &FieldEvaluator, budget: &QuadratureBudget) -> Result<Self> {
        let n = ev.tensor().n();
        let domain = Domain::new(&ev.tensor().points()[..n - 1], budget)?;
        let patches = domain
            .cells
            .par_iter()
            .map(|r| {
                let frame = ev.frame_at(r.centre())?;
                TaylorPatch::new(ev.tensor(), &frame, 0.5 * r.diameter() * (1.0 + 1e-9), PATCH_TOL)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain, patches })
    }

    /// `(e^φ, φ, φ_z)` at a point of background cell `cell`.
    pub fn eval(&self, ev: &FieldEvaluator, cell: usize, z: Complex64) -> (f64, f64, Complex64) {
        let (u, du) = self.patches[cell].eval(z);
        let q = hermitian_quad(u, &ev.h);
        let e = -q * ev.scale;
        let phi_z = -2.0 * hermitian_pair(du, &ev.h, u) / q;
        (e.powi(-2), -2.0 * e.ln(), phi_z)
    }
}

/// Truncation tolerance of background patches.
pub const PATCH_TOL: f64 = 1e-15;

/// `C` with `C J C* = H` fixing `w(b) = 0` and `w'(b) > 0`.
fn conjugator(h: &Mat2, base: &FrameTransport) -> Result<Mat2> {
    let k = h.inverse().ok_or_else(|| Error::Branch("invariant form is singular".into()))?;
    let u = base.values();
    let pair = |a: [Complex64; 2], b: [Complex64; 2]| -> Complex64 {
        // a* K b for column vectors
        let kb = k.apply(b);
        a[0].conj() * kb[0] + a[1].conj() * kb[1]
    };
    let mut c1 = [u[1], -u[0]];
    let n1 = pair(c1, c1).re;
    if !(n1 > 0.0) {
        return Err(Error::Branch("base point lies off the disk sheet".into()));
    }
    let phase = if c1[0].norm() > 0.0 { c1[0].conj() / c1[0].norm() } else { c1[1].conj() / c1[1].norm() };
    let s1 = phase / n1.sqrt();
    c1 = [c1[0] * s1, c1[1] * s1];
    let kc1 = k.apply(c1);
    let mut c2 = [kc1[1].conj(), -kc1[0].conj()];
    let n2 = pair(c2, c2).re;
    if !(n2 < 0.0) {
        return Err(Error::Branch("complement is not negative for the form".into()));
    }
    let s2 = 1.0 / (-n2).sqrt();
    c2 = [c2[0] * s2, c2[1] * s2];
    let mut c = Mat2::from_cols(c1, c2);
    let v2 = u[0] * c2[0] + u[1] * c2[1];
    let wp = base.wronskian * c.det() / (v2 * v2);
    let chi = wp.arg();
    let rot = Complex64::from_polar(1.0, chi);
    c = Mat2::from_cols(c1, [c2[0] * rot, c2[1] * rot]);
    Ok(c)
}

/// Result of comparing an accessory parameter with the developing-map
/// expansion coefficients at a singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub index: usize,
    pub radius: f64,
    pub a0: Complex64,
    pub a1: Complex64,
    pub c_from_expansion: Complex64,
    pub c_solved: Complex64,
    /// Relative error, or absolute error when `|c| < 1e-8`.
    pub error: f64,
    pub fixed_point: Complex64,
}

/// Extracts the leading coefficients of `σ(w(z)) ζ^{α−1}` on a circle around
/// point `i` and compares `h/(1−α) · a¹/a⁰` with the solved parameter.
///
/// The frame is continued around the circle; the leading two Fourier modes
/// of the periodic function `σ(w) ζ^{α−1}` are exactly `a⁰` and `a¹ ζ`.
pub fn lemma3_check(ev: &FieldEvaluator, i: usize) -> Result<Lemma3Report> {
    let t = ev.tensor();
    let n = t.n();
    if i >= n {
        return Err(Error::Dimension(format!("no singular point {i}")));
    }
    let alpha = t.orders().alpha(i);
    let h = t.orders().weight(i);
    let samples = 64;
    let (radius, centre, pts): (f64, Option<Complex64>, Vec<Complex64>) = match t.config().point(i) {
        Some(zi) => {
            let r = 0.5 * ev.clearance();
            let pts = circle_polygon(zi, zi + r, samples, true);
            (r, Some(zi), pts)
        }
        None => {
            let r = 0.5 * chart_radius(t, i);
            let pts = (0..=samples)
                .map(|j| Complex64::from_polar(r, 2.0 * PI * j as f64 / samples as f64).inv())
                .collect();
            (r, None, pts)
        }
    };
    let start = pts[0];
    let frame0 = match centre {
        Some(zi) => {
            let entry = zi + Complex64::new(ev.clearance(), 0.0);
            let path = plan_path(ev.base_point(), entry, t.config(), ev.clearance())?;
            let f = transport(t, ev.base_frame(), &path, ev.tolerance())?;
            let (y, _) = transport_segment(t, f.frame, entry, start, ev.tolerance())?;
            FrameTransport {
                base_point: start,
                frame: y,
                wronskian: f.wronskian,
            }
        }
        None => {
            let path = plan_path(ev.base_point(), start, t.config(), ev.clearance())?;
            transport(t, ev.base_frame(), &path, ev.tolerance())?
        }
    };
    let c = *ev.conjugator();
    let w_of = |y: &Mat2| {
        let v = c.left_mul(y.row(0));
        v[0] / v[1]
    };
    let mut ws = Vec::with_capacity(samples);
    let mut y = frame0.frame;
    for j in 0..samples {
        ws.push(w_of(&y));
        let path = PathPolyline {
            vertices: vec![pts[j], pts[j + 1]],
            clearance: radius * (PI / samples as f64).cos(),
        };
        let f = transport(t, &FrameTransport::new(pts[j], y), &path, ev.tolerance())?;
        y = f.frame;
    }
    let m = frame0.frame.inverse().expect("frame is invertible") * y;
    let g = c.inverse().expect("conjugator is invertible") * m * c;
    let (f1, f2) = mobius_fixed_points(&g)
        .ok_or_else(|| Error::IllConditioned("local monodromy has no finite fixed points".into()))?;
    let wi = if f1.norm() < f2.norm() { f1 } else { f2 };
    if wi.norm() >= 1.0 {
        return Err(Error::IllConditioned("no fixed point inside the disk".into()));
    }
    let mut a0 = Complex64::new(0.0, 0.0);
    let mut a1 = Complex64::new(0.0, 0.0);
    for (j, w) in ws.iter().enumerate() {
        let th = 2.0 * PI * j as f64 / samples as f64;
        let sigma = (w - wi) / (1.0 - wi.conj() * w);
        let gval = sigma * radius.powf(alpha - 1.0) * Complex64::from_polar(1.0, (alpha - 1.0) * th);
        a0 += gval;
        a1 += gval * Complex64::from_polar(1.0, -th);
    }
    a0 /= samples as f64;
    a1 /= samples as f64 * radius;
    if a0.norm() < 1e-14 {
        return Err(Error::IllConditioned("vanishing leading coefficient".into()));
    }
    let c_est = h / (1.0 - alpha) * a1 / a0;
    let c_solved = t.accessory().get(i);
    let err = if c_solved.norm() < 1e-8 {
        (c_est - c_solved).norm()
    } else {
        (c_est - c_solved).norm() / c_solved.norm()
    };
    Ok(Lemma3Report {
        index: i,
        radius,
        a0,
        a1,
        c_from_expansion: c_est,
        c_solved,
        error: err,
        fixed_point: wi,
    })
}

/// Behaviour of `φ_z` on shrinking circles around a singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub index: usize,
    pub radii: Vec<f64>,
    /// Circle means of the regular part `φ_z + α/ζ` (finite points) or
    /// `−(φ_z + (2−α)ζ)/ζ²` (infinity).
    pub means: Vec<Complex64>,
    /// The expected limit `c/α` (or `c/α` of the chart at infinity).
    pub limit: Complex64,
    /// `|mean − limit|` per radius.
    pub limit_errors: Vec<f64>,
    /// Magnitude of the first angular mode of the remainder per radius.
    pub remainder: Vec<f64>,
    /// Fitted power of the remainder magnitude against the radius.
    pub fitted_exponent: f64,
    /// The predicted power `2(1−α) − 1`.
    pub expected_exponent: f64,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
}

/// Samples `φ_z` on circles of the given radii (defaults to a geometric
/// sequence inside the chart) and fits the remainder exponent.
pub fn asymptotic_report(ev: &FieldEvaluator, i: usize, radii: Option<&[f64]>) -> Result<AsymptoticReport> {
    let n = ev.tensor().n();
    if i >= n {
        return Err(Error::Dimension(format!("no singular point {i}")));
    }
    let ch = ev.chart(i);
    let radii: Vec<f64> = match radii {
        Some(r) => r.to_vec(),
        None => (0..7).map(|j| ch.eval_radius * 1e-2 * 10f64.powi(-j)).collect(),
    };
    if radii.len() < 2 {
        return Err(Error::IllConditioned("need at least two radii".into()));
    }
    for &r in &radii {
        if !(r > 0.0) || r >= ch.eval_radius {
            return Err(Error::IllConditioned(format!(
                "radius {r} outside the chart disk (0, {})",
                ch.eval_radius
            )));
        }
    }
    let alpha = ch.alpha;
    let c = ev.tensor().accessory().get(i);
    let limit = c / alpha;
    let samples = 64;
    let mut means = Vec::new();
    let mut errors = Vec::new();
    let mut modes = Vec::new();
    for &r in &radii {
        let mut mean = Complex64::new(0.0, 0.0);
        let mut vals = Vec::with_capacity(samples);
        for j in 0..samples {
            let th = 2.0 * PI * (j as f64 + 0.5) / samples as f64;
            let dir = Complex64::from_polar(1.0, th);
            let cv = ev.chart_eval(i, r.ln(), dir);
            let zeta = cv.zeta();
            // finite: φ_z + α/ζ = reg/ζ; infinity: −(φ_z + (2−α)ζ)/ζ² = reg/ζ
            let v = cv.reg / zeta;
            vals.push((th, v));
            mean += v;
        }
        mean /= samples as f64;
        let mut mode = Complex64::new(0.0, 0.0);
        for (th, v) in &vals {
            mode += (v - limit) * Complex64::from_polar(1.0, *th);
        }
        mode /= samples as f64;
        means.push(mean);
        errors.push((mean - limit).norm());
        modes.push(mode.norm());
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = modes.iter().map(|m| m.max(1e-300).ln()).collect();
    let (slope, resid) = fit_line(&xs, &ys);
    Ok(AsymptoticReport {
        index: i,
        radii,
        means,
        limit,
        limit_errors: errors,
        remainder: modes,
        fitted_exponent: slope,
        expected_exponent: 2.0 * (1.0 - alpha) - 1.0,
        fit_residual: resid,
    })
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let resid = (x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - my - slope * (a - mx);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, resid)
}
