//! Analytic continuation of solutions of `u'' + T u / 2 = 0`.
//!
//! Frames are 2×2 matrices whose first row holds `(u₁, u₂)` and second row
//! `(u₁', u₂')`. Continuation uses Taylor-series steps: at each point the
//! local power series of both solutions is generated from the Taylor
//! coefficients of `T` and summed until the tail falls below tolerance. The
//! step never exceeds half the distance to the nearest singular point, so the
//! series converge geometrically.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{Configuration, StressTensor};

/// Default relative tolerance of a transport.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Hard cap on series length.
pub const MAX_TERMS: usize = 200;
/// Fraction of the distance to the nearest singular point used per step.
pub const STEP_FRACTION: f64 = 0.5;
/// Truncation threshold for Frobenius series.
pub const SERIES_TOL: f64 = 1e-16;
/// Maximum angular width of one polygon edge on a detour arc.
pub const ARC_STEP: f64 = std::f64::consts::PI / 8.0;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A fundamental matrix of solutions at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransport {
    pub base_point: Complex64,
    pub frame: Mat2,
    pub wronskian: Complex64,
}

impl FrameTransport {
    pub fn new(base_point: Complex64, frame: Mat2) -> Self {
        Self {
            base_point,
            frame,
            wronskian: frame.det(),
        }
    }

    /// The reference frame `u₁ = 1, u₂ = 0, u₁' = 0, u₂' = 2i`, Wronskian `2i`.
    pub fn standard(base_point: Complex64) -> Self {
        Self::new(
            base_point,
            Mat2::diag(Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)),
        )
    }

    /// Row of solution values.
    pub fn values(&self) -> [Complex64; 2] {
        self.frame.row(0)
    }

    /// Row of first derivatives.
    pub fn derivatives(&self) -> [Complex64; 2] {
        self.frame.row(1)
    }

    /// Wronskian recomputed from the current frame.
    pub fn current_wronskian(&self) -> Complex64 {
        self.frame.det()
    }

    /// Relative drift of the Wronskian since construction.
    pub fn wronskian_drift(&self) -> f64 {
        (self.frame.det() - self.wronskian).norm() / self.wronskian.norm()
    }

    /// Right-multiplies the frame by a constant matrix (change of basis).
    pub fn rebased(&self, m: &Mat2) -> Self {
        Self::new(self.base_point, self.frame * *m)
    }
}

/// A polyline path that keeps a fixed distance from the singular points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    pub vertices: Vec<Complex64>,
    pub clearance: f64,
}

impl PathPolyline {
    pub fn start(&self) -> Complex64 {
        self.vertices[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// The path traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self {
            vertices: v,
            clearance: self.clearance,
        }
    }

    /// Concatenation; the second path must start where this one ends.
    pub fn then(&self, other: &PathPolyline) -> Self {
        let mut v = self.vertices.clone();
        let skip = usize::from((other.start() - self.end()).norm() == 0.0);
        v.extend(other.vertices.iter().skip(skip));
        Self {
            vertices: v,
            clearance: self.clearance.min(other.clearance),
        }
    }

    /// Minimum distance of the path to a set of points.
    pub fn min_distance(&self, points: &[Complex64]) -> f64 {
        let mut d = f64::INFINITY;
        for p in points {
            if self.vertices.len() == 1 {
                d = d.min((self.vertices[0] - p).norm());
            }
            for w in self.vertices.windows(2) {
                d = d.min(segment_distance(w[0], w[1], *p));
            }
        }
        d
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * d.conj()).re / l2;
    let s = s.clamp(0.0, 1.0);
    (a + d * s - p).norm()
}

/// Default clearance: 0.4 times the minimum pairwise distance of the finite
/// singular points.
pub fn default_clearance(config: &Configuration) -> f64 {
    0.4 * config.min_distance()
}

/// Plans a path from `from` to `to` avoiding the finite singular points of
/// `config` by at least `clearance`.
pub fn plan_path(
    from: Complex64,
    to: Complex64,
    config: &Configuration,
    clearance: f64,
) -> Result<PathPolyline> {
    plan_path_around(from, to, &config.finite_points(), clearance)
}

/// Same as [`plan_path`] with an explicit obstacle list.
///
/// Obstructing points are bypassed counterclockwise along a polygonal arc
/// whose edges stay at least `clearance` away.
pub fn plan_path_around(
    from: Complex64,
    to: Complex64,
    obstacles: &[Complex64],
    clearance: f64,
) -> Result<PathPolyline> {
    if !(clearance > 0.0) {
        return Err(Error::Path(format!("clearance {clearance} must be positive")));
    }
    let slack = 1.0 - 1e-9;
    for p in obstacles {
        for (name, e) in [("start", from), ("end", to)] {
            if (e - p).norm() < clearance * slack {
                return Err(Error::Path(format!(
                    "{name} point {e} is within clearance {clearance} of singular point {p}"
                )));
            }
        }
    }
    let mut vertices = vec![from];
    let d = to - from;
    let len = d.norm();
    if len == 0.0 {
        return Ok(PathPolyline {
            vertices,
            clearance,
        });
    }
    let u = d / len;
    let radius = clearance / (ARC_STEP / 2.0).cos() * (1.0 + 1e-12);

    struct Obstruction {
        centre: Complex64,
        s_in: f64,
        s_out: f64,
    }
    let mut obs = Vec::new();
    for &p in obstacles {
        if segment_distance(from, to, p) >= clearance * slack {
            continue;
        }
        let rel = (p - from) * u.conj();
        let (s0, q) = (rel.re, rel.im);
        let h = (radius * radius - q * q).max(0.0).sqrt();
        obs.push(Obstruction {
            centre: p,
            s_in: s0 - h,
            s_out: s0 + h,
        });
    }
    obs.sort_by(|a, b| a.s_in.total_cmp(&b.s_in));
    for o in &obs {
        let entry = if o.s_in > 0.0 {
            from + u * o.s_in
        } else {
            // start lies inside the detour circle: move radially onto it
            o.centre + (from - o.centre) / (from - o.centre).norm() * radius
        };
        let exit = if o.s_out < len {
            from + u * o.s_out
        } else {
            o.centre + (to - o.centre) / (to - o.centre).norm() * radius
        };
        push_vertex(&mut vertices, entry);
        let th_in = (entry - o.centre).arg();
        let th_out = (exit - o.centre).arg();
        let mut sweep = (th_out - th_in).rem_euclid(2.0 * std::f64::consts::PI);
        if sweep == 0.0 {
            sweep = 2.0 * std::f64::consts::PI;
        }
        let steps = (sweep / ARC_STEP).ceil().max(1.0) as usize;
        let dth = sweep / steps as f64;
        for k in 1..steps {
            let th = th_in + dth * k as f64;
            push_vertex(&mut vertices, o.centre + Complex64::from_polar(radius, th));
        }
        push_vertex(&mut vertices, exit);
    }
    push_vertex(&mut vertices, to);
    let path = PathPolyline {
        vertices,
        clearance,
    };
    if path.min_distance(obstacles) < clearance * slack {
        return Err(Error::Path(format!(
            "could not route from {from} to {to} with clearance {clearance}"
        )));
    }
    Ok(path)
}

fn push_vertex(v: &mut Vec<Complex64>, z: Complex64) {
    if v.last().is_none_or(|l| (l - z).norm() > 1e-15 * (1.0 + z.norm())) {
        v.push(z);
    }
}

/// A closed regular polygon around `centre`, starting and ending at
/// `start`, traversed counterclockwise when `ccw` is true.
pub fn circle_polygon(centre: Complex64, start: Complex64, segments: usize, ccw: bool) -> Vec<Complex64> {
    let r = (start - centre).norm();
    let th0 = (start - centre).arg();
    let sgn = if ccw { 1.0 } else { -1.0 };
    let mut v = Vec::with_capacity(segments + 1);
    v.push(start);
    for k in 1..segments {
        let th = th0 + sgn * 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
        v.push(centre + Complex64::from_polar(r, th));
    }
    v.push(start);
    v
}

/// Power series of the two solutions around a regular point.
#[derive(Debug, Clone)]
pub struct TaylorPatch {
    pub centre: Complex64,
    pub radius: f64,
    /// Coefficient rows: `coeffs[k]` holds the `t^k` coefficient of `(u₁, u₂)`.
    pub coeffs: Vec<[Complex64; 2]>,
}

impl TaylorPatch {
    /// Builds the series at `frame.base_point`, long enough to be accurate to
    /// `tol` on the disk of the given radius.
    pub fn new(tensor: &StressTensor, frame: &FrameTransport, radius: f64, tol: f64) -> Result<Self> {
        let z0 = frame.base_point;
        let rho = tensor.singular_distance(z0);
        if radius >= rho {
            return Err(Error::Path(format!(
                "patch radius {radius} reaches a singular point at distance {rho}"
            )));
        }
        let coeffs = local_series(tensor, z0, frame.values(), frame.derivatives(), radius, tol)?;
        Ok(Self {
            centre: z0,
            radius,
            coeffs,
        })
    }

    /// Values and first derivatives at `z`.
    pub fn eval(&self, z: Complex64) -> ([Complex64; 2], [Complex64; 2]) {
        let t = z - self.centre;
        let k_max = self.coeffs.len();
        let mut u = [CZERO; 2];
        let mut d = [CZERO; 2];
        for k in (0..k_max).rev() {
            let c = self.coeffs[k];
            for j in 0..2 {
                u[j] = u[j] * t + c[j];
            }
        }
        for k in (1..k_max).rev() {
            let c = self.coeffs[k];
            for j in 0..2 {
                d[j] = d[j] * t + c[j] * (k as f64);
            }
        }
        (u, d)
    }

    /// Derivatives of order `0..=order` of both solutions at `z`.
    pub fn derivatives(&self, z: Complex64, order: usize) -> Vec<[Complex64; 2]> {
        let t = z - self.centre;
        let k_max = self.coeffs.len();
        let mut out = vec![[CZERO; 2]; order + 1];
        for (m, o) in out.iter_mut().enumerate() {
            let mut acc = [CZERO; 2];
            for k in (m..k_max).rev() {
                let mut f = 1.0;
                for q in 0..m {
                    f *= (k - q) as f64;
                }
                for j in 0..2 {
                    acc[j] = acc[j] * t + self.coeffs[k][j] * f;
                }
            }
            *o = acc;
        }
        out
    }

    /// Frame at `z`.
    pub fn frame_at(&self, z: Complex64) -> FrameTransport {
        let (u, du) = self.eval(z);
        FrameTransport::new(z, Mat2::new(u[0], u[1], du[0], du[1]))
    }
}

/// Generates the local series of two solutions with given values and first
/// derivatives at `z0`, truncated once terms at radius `s` drop below `tol`
/// relative to each column's size.
fn local_series(
    tensor: &StressTensor,
    z0: Complex64,
    u0: [Complex64; 2],
    u1: [Complex64; 2],
    s: f64,
    tol: f64,
) -> Result<Vec<[Complex64; 2]>> {
    let mut tau = tensor.taylor_coefficients(z0, 64);
    let mut c: Vec<[Complex64; 2]> = Vec::with_capacity(64);
    c.push(u0);
    c.push(u1);
    let scale = [
        (u0[0].norm() + u1[0].norm() * s).max(f64::MIN_POSITIVE),
        (u0[1].norm() + u1[1].norm() * s).max(f64::MIN_POSITIVE),
    ];
    let mut small_run = 0;
    let mut pw = s; // s^k for the current k
    for k in 0.. {
        let next = k + 2;
        if next >= MAX_TERMS {
            return Err(Error::Path(format!(
                "Taylor series at {z0} did not converge within {MAX_TERMS} terms"
            )));
        }
        if k >= tau.len() {
            tau = tensor.taylor_coefficients(z0, (2 * tau.len()).min(MAX_TERMS));
        }
        let mut acc = [CZERO; 2];
        for j in 0..=k {
            let t = tau[j];
            let u = c[k - j];
            acc[0] += t * u[0];
            acc[1] += t * u[1];
        }
        let denom = -0.5 / ((next * (next - 1)) as f64);
        let val = [acc[0] * denom, acc[1] * denom];
        c.push(val);
        pw *= s;
        let pw_next = pw * s; // s^{next}
        let mut small = true;
        for j in 0..2 {
            let term = val[j].norm() * pw_next * (next as f64 + 1.0);
            if term > 1e-2 * tol * scale[j] {
                small = false;
            }
        }
        if small {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    Ok(c)
}

/// Continues a frame along a path, with local tolerance `tol`.
pub fn transport(
    tensor: &StressTensor,
    frame: &FrameTransport,
    path: &PathPolyline,
    tol: f64,
) -> Result<FrameTransport> {
    if (path.start() - frame.base_point).norm() > 1e-12 * (1.0 + frame.base_point.norm()) {
        return Err(Error::Path(format!(
            "path starts at {} but frame is at {}",
            path.start(),
            frame.base_point
        )));
    }
    let mut z = frame.base_point;
    let mut y = frame.frame;
    for w in path.vertices.windows(2) {
        let (y_new, z_new) = transport_segment(tensor, y, z, w[1], tol)?;
        y = y_new;
        z = z_new;
    }
    Ok(FrameTransport {
        base_point: z,
        frame: y,
        wronskian: frame.wronskian,
    })
}

/// Continues along a straight segment, returning the frame at `to`.
pub fn transport_segment(
    tensor: &StressTensor,
    y: Mat2,
    from: Complex64,
    to: Complex64,
    tol: f64,
) -> Result<(Mat2, Complex64)> {
    let mut z = from;
    let mut y = y;
    let min_step = 1e-13 * (1.0 + from.norm().max(to.norm()));
    loop {
        let rem = to - z;
        let rem_len = rem.norm();
        if rem_len == 0.0 {
            break;
        }
        let rho = tensor.singular_distance(z);
        let s = rem_len.min(STEP_FRACTION * rho);
        if s < min_step && s < rem_len {
            return Err(Error::Path(format!(
                "step size underflow at {z} (distance {rho} to a singular point)"
            )));
        }
        let dt = if s >= rem_len { rem } else { rem * (s / rem_len) };
        let coeffs = local_series(tensor, z, y.row(0), y.row(1), s, tol)?;
        let mut u = [CZERO; 2];
        let mut du = [CZERO; 2];
        for k in (0..coeffs.len()).rev() {
            for j in 0..2 {
                u[j] = u[j] * dt + coeffs[k][j];
            }
        }
        for k in (1..coeffs.len()).rev() {
            for j in 0..2 {
                du[j] = du[j] * dt + coeffs[k][j] * (k as f64);
            }
        }
        y = Mat2::new(u[0], u[1], du[0], du[1]);
        z = if s >= rem_len { to } else { z + dt };
    }
    Ok((y, to))
}

/// Local coordinate around a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// `ζ = z − centre`.
    Finite(Complex64),
    /// `ζ = 1/z`.
    Infinity,
}

impl Chart {
    pub fn to_zeta(&self, z: Complex64) -> Complex64 {
        match self {
            Chart::Finite(c) => z - c,
            Chart::Infinity => z.inv(),
        }
    }

    pub fn to_z(&self, zeta: Complex64) -> Complex64 {
        match self {
            Chart::Finite(c) => c + zeta,
            Chart::Infinity => zeta.inv(),
        }
    }

    /// Converts a `z`-frame at `z` into the chart frame of `v = ζ u` (∞) or
    /// `u` itself (finite).
    pub fn frame_to_chart(&self, z: Complex64, y: &Mat2) -> Mat2 {
        match self {
            Chart::Finite(_) => *y,
            Chart::Infinity => {
                let zeta = z.inv();
                Mat2::new(zeta, CZERO, Complex64::new(1.0, 0.0), -z) * *y
            }
        }
    }

    /// Inverse of [`Chart::frame_to_chart`].
    pub fn frame_from_chart(&self, zeta: Complex64, y: &Mat2) -> Mat2 {
        match self {
            Chart::Finite(_) => *y,
            Chart::Infinity => {
                let z = zeta.inv();
                Mat2::new(z, CZERO, Complex64::new(1.0, 0.0), -zeta) * *y
            }
        }
    }
}

/// Local exponents `(ρ₊, ρ₋) = (1 − α/2, α/2)`.
pub fn exponents(alpha: f64) -> (f64, f64) {
    (1.0 - alpha / 2.0, alpha / 2.0)
}

/// Frobenius solutions `ζ^{ρ±} p±(ζ)` at a singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusSeed {
    pub index: usize,
    pub alpha: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    /// Radius up to which the truncated series meet [`SERIES_TOL`].
    pub radius: f64,
    pub chart: Chart,
}

impl FrobeniusSeed {
    /// Builds both series for point `index`, accurate up to `|ζ| = radius`.
    pub fn build(tensor: &StressTensor, index: usize, radius: f64) -> Result<Self> {
        let n = tensor.n();
        if index >= n {
            return Err(Error::Dimension(format!("no singular point {index}")));
        }
        let alpha = tensor.orders().alpha(index);
        let diff = 1.0 - alpha;
        if (diff - diff.round()).abs() < 1e-12 && diff.round() >= 0.0 {
            return Err(Error::ResonantExponents { index, alpha });
        }
        let chart_radius = chart_radius(tensor, index);
        if !(radius > 0.0) || radius >= chart_radius {
            return Err(Error::SeriesRadius { index, radius });
        }
        let chart = match tensor.config().point(index) {
            Some(p) => Chart::Finite(p),
            None => Chart::Infinity,
        };
        let (rp, rm) = exponents(alpha);
        let mut count = 64;
        loop {
            let tau = tensor.local_coefficients(index, count);
            let plus = frobenius_coefficients(&tau, rp, radius);
            let minus = frobenius_coefficients(&tau, rm, radius);
            match (plus, minus) {
                (Some(p), Some(m)) => {
                    return Ok(Self {
                        index,
                        alpha,
                        rho_plus: rp,
                        rho_minus: rm,
                        plus: p,
                        minus: m,
                        radius,
                        chart,
                    })
                }
                _ if count >= MAX_TERMS => return Err(Error::SeriesRadius { index, radius }),
                _ => count = (2 * count).min(MAX_TERMS),
            }
        }
    }

    /// Wronskian of `(f₊, f₋)` in the chart coordinate, `ρ₋ − ρ₊ = α − 1`.
    pub fn wronskian(&self) -> f64 {
        self.rho_minus - self.rho_plus
    }

    /// Evaluates `p±` and `p±'` at `ζ`.
    pub fn eval_parts(&self, zeta: Complex64) -> SeriesParts {
        let (p, dp) = horner(&self.plus, zeta);
        let (m, dm) = horner(&self.minus, zeta);
        SeriesParts {
            p_plus: p,
            dp_plus: dp,
            p_minus: m,
            dp_minus: dm,
        }
    }

    /// Chart frame `[[f₊, f₋], [f₊', f₋']]` at `ζ` using the principal branch.
    pub fn chart_frame(&self, zeta: Complex64) -> Mat2 {
        let s = self.eval_parts(zeta);
        let zp = zeta.powf(self.rho_plus);
        let zm = zeta.powf(self.rho_minus);
        let inv = zeta.inv();
        Mat2::new(
            zp * s.p_plus,
            zm * s.p_minus,
            zp * (s.p_plus * self.rho_plus * inv + s.dp_plus),
            zm * (s.p_minus * self.rho_minus * inv + s.dp_minus),
        )
    }

    /// The `z`-plane frame at the point with chart coordinate `ζ`.
    pub fn z_frame(&self, zeta: Complex64) -> FrameTransport {
        let y = self.chart.frame_from_chart(zeta, &self.chart_frame(zeta));
        FrameTransport::new(self.chart.to_z(zeta), y)
    }

    /// Residual of the chart ODE `f'' + T̃ f / 2` for both columns at `ζ`,
    /// relative to `|f|/|ζ|²`.
    pub fn ode_residual(&self, tensor: &StressTensor, zeta: Complex64) -> f64 {
        let tau = tensor.local_coefficients(self.index, 200);
        let mut t_loc = CZERO; // ζ² T̃
        let mut pw = Complex64::new(1.0, 0.0);
        for a in &tau {
            t_loc += a * pw;
            pw *= zeta;
        }
        let mut worst: f64 = 0.0;
        for (coeffs, rho) in [(&self.plus, self.rho_plus), (&self.minus, self.rho_minus)] {
            // ζ² f'' = ζ^ρ Σ a_m (m+ρ)(m+ρ−1) ζ^m
            let mut f = CZERO;
            let mut f2 = CZERO;
            let mut pw = Complex64::new(1.0, 0.0);
            for (m, a) in coeffs.iter().enumerate() {
                let e = m as f64 + rho;
                f += a * pw;
                f2 += a * pw * (e * (e - 1.0));
                pw *= zeta;
            }
            let res = f2 + 0.5 * t_loc * f;
            worst = worst.max(res.norm() / f.norm());
        }
        worst
    }
}

/// Series values `p±(ζ)` and derivatives `p±'(ζ)`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesParts {
    pub p_plus: Complex64,
    pub dp_plus: Complex64,
    pub p_minus: Complex64,
    pub dp_minus: Complex64,
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = CZERO;
    let mut dp = CZERO;
    for k in (0..c.len()).rev() {
        dp = dp * z + p;
        p = p * z + c[k];
    }
    (p, dp)
}

/// Coefficients `a_m` of `p(ζ) = Σ a_m ζ^m` with `a_0 = 1`; `None` if the
/// available `τ` coefficients run out before the tail is below tolerance.
fn frobenius_coefficients(tau: &[Complex64], rho: f64, radius: f64) -> Option<Vec<Complex64>> {
    let mut a = vec![Complex64::new(1.0, 0.0)];
    let shift = 2.0 * rho - 1.0;
    let mut small_run = 0;
    let mut pw = 1.0;
    for m in 1..tau.len() {
        let mut acc = CZERO;
        for j in 1..=m {
            acc += tau[j] * a[m - j];
        }
        let mf = m as f64;
        let am = acc * (-0.5 / (mf * (mf + shift)));
        a.push(am);
        pw *= radius;
        if am.norm() * pw * (mf + 1.0) < SERIES_TOL {
            small_run += 1;
            if small_run >= 3 {
                return Some(a);
            }
        } else {
            small_run = 0;
        }
    }
    None
}

/// Radius of convergence of the Frobenius series at point `index`.
pub fn chart_radius(tensor: &StressTensor, index: usize) -> f64 {
    match tensor.config().point(index) {
        Some(p) => tensor
            .points()
            .iter()
            .filter(|q| (**q - p).norm() > 0.0)
            .map(|q| (q - p).norm())
            .fold(f64::INFINITY, f64::min),
        None => {
            let m = tensor.points().iter().map(|q| q.norm()).fold(0.0, f64::max);
            1.0 / m
        }
    }
}

/// Frame at `z_i + r` (or at `z = 1/r` for infinity) whose columns are the
/// two Frobenius solutions `ζ^{ρ±}(1 + O(ζ))`.
pub fn frobenius_seed(tensor: &StressTensor, index: usize, r: f64) -> Result<FrameTransport> {
    let half = chart_radius(tensor, index) / 2.0;
    if !(r > 0.0) || r >= half {
        return Err(Error::SeriesRadius { index, radius: r });
    }
    let seed = FrobeniusSeed::build(tensor, index, r)?;
    Ok(seed.z_frame(Complex64::new(r, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OrderData;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quad() -> StressTensor {
        let o = OrderData::new(&[0.7; 4]).unwrap();
        let cfg = Configuration::new(vec![c(0.3, 0.2)]).unwrap();
        StressTensor::from_free(&cfg, &o, &[c(0.4, -0.2)]).unwrap()
    }

    #[test]
    fn exponents_solve_indicial_equation() {
        for a in [0.8, 0.5, 0.3, -0.5] {
            let (p, m) = exponents(a);
            let h = a * (2.0 - a);
            assert!((p * (p - 1.0) + h / 4.0).abs() < 1e-15);
            assert!((m * (m - 1.0) + h / 4.0).abs() < 1e-15);
            assert!((p - m - (1.0 - a)).abs() < 1e-15);
        }
        assert_eq!(exponents(0.8), (0.6, 0.4));
    }

    #[test]
    fn straight_path_when_unobstructed() {
        let cfg = Configuration::triple();
        let p = plan_path(c(2.0, 0.0), c(3.0, 0.0), &cfg, 0.4).unwrap();
        assert_eq!(p.vertices.len(), 2);
    }

    #[test]
    fn detour_keeps_clearance() {
        let p = plan_path_around(c(-1.0, 0.0), c(2.0, 0.0), &[c(0.0, 0.0)], 0.5).unwrap();
        assert!(p.vertices.len() > 2);
        assert!(p.min_distance(&[c(0.0, 0.0)]) >= 0.5 * (1.0 - 1e-9));
        for v in &p.vertices {
            assert!(v.norm() >= 0.5 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn endpoint_inside_clearance_rejected() {
        let cfg = Configuration::new(vec![c(0.3, 0.2)]).unwrap();
        let r = plan_path(c(0.3, 0.25), c(2.0, 0.0), &cfg, 0.1);
        assert!(matches!(r, Err(Error::Path(_))));
    }

    #[test]
    fn zero_length_path_is_identity() {
        let t = quad();
        let f = FrameTransport::standard(c(2.0, 1.0));
        let p = PathPolyline {
            vertices: vec![c(2.0, 1.0)],
            clearance: 0.1,
        };
        let g = transport(&t, &f, &p, DEFAULT_TOL).unwrap();
        assert_eq!(f.frame, g.frame);
    }

    #[test]
    fn wronskian_conserved_and_reversible() {
        let t = quad();
        let cfg = t.config().clone();
        let f = FrameTransport::standard(c(0.5, -1.0));
        let clr = default_clearance(&cfg);
        let p = plan_path(c(0.5, -1.0), c(0.6, 1.3), &cfg, clr).unwrap();
        let g = transport(&t, &f, &p, DEFAULT_TOL).unwrap();
        assert!(g.wronskian_drift() < 1e-10);
        let back = transport(&t, &g, &p.reversed(), DEFAULT_TOL).unwrap();
        let rel = (back.frame - f.frame).norm() / f.frame.norm();
        assert!(rel < 10.0 * DEFAULT_TOL, "{rel}");
    }

    #[test]
    fn seeds_satisfy_ode() {
        let t = quad();
        for k in 0..4 {
            let r = chart_radius(&t, k) * 0.25;
            let s = FrobeniusSeed::build(&t, k, r).unwrap();
            assert!(s.ode_residual(&t, c(r, 0.0)) < 1e-12, "seed {k}");
            let y = s.chart_frame(c(r, 0.0));
            assert!((y.det() - s.wronskian()).norm() < 1e-12);
        }
    }

    #[test]
    fn seed_transport_consistency() {
        let t = quad();
        for k in 0..4 {
            let r = chart_radius(&t, k) * 0.2;
            let outer = frobenius_seed(&t, k, r).unwrap();
            let inner = frobenius_seed(&t, k, r / 2.0).unwrap();
            let path = PathPolyline {
                vertices: vec![outer.base_point, inner.base_point],
                clearance: r / 2.0,
            };
            let moved = transport(&t, &outer, &path, 1e-15).unwrap();
            let rel = (moved.frame - inner.frame).norm() / inner.frame.norm();
            assert!(rel < 1e-11, "point {k}: {rel}");
        }
    }

    #[test]
    fn resonant_orders_rejected() {
        let o = OrderData::new(&[0.0, 0.9, 0.9, 0.9]).unwrap();
        let cfg = Configuration::new(vec![c(0.3, 0.2)]).unwrap();
        let t = StressTensor::from_free(&cfg, &o, &[c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            FrobeniusSeed::build(&t, 0, 0.05),
            Err(Error::ResonantExponents { .. })
        ));
    }

    #[test]
    fn patch_matches_transport() {
        let t = quad();
        let cfg = t.config().clone();
        let f = FrameTransport::standard(c(1.5, 1.5));
        let patch = TaylorPatch::new(&t, &f, 0.5, 1e-15).unwrap();
        let target = c(1.8, 1.2);
        let via = transport(
            &t,
            &f,
            &plan_path(f.base_point, target, &cfg, 0.1).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        let pf = patch.frame_at(target);
        assert!((pf.frame - via.frame).norm() / via.frame.norm() < 1e-12);
    }
}
