//! Configurations of marked points, conical orders, accessory parameters and
//! the meromorphic stress-energy tensor `T(z)`.
//!
//! Points are indexed from zero: the free points `z_0 .. z_{n-4}` come first,
//! followed by the fixed points `0`, `1` and `∞` (indices `n-3`, `n-2`, `n-1`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this are treated as a collision.
pub const COLLISION_DISTANCE: f64 = 1e-9;

/// Validated conical orders together with their conformal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderData {
    alphas: Vec<f64>,
    weights: Vec<f64>,
    metric_grade: bool,
}

impl OrderData {
    /// Validates a list of orders. Requires `n >= 3`, every order `< 1` and a
    /// total order `> 2`.
    pub fn new(alphas: &[f64]) -> Result<Self> {
        if alphas.len() < 3 {
            return Err(Error::InvalidOrders(format!(
                "need at least 3 orders, got {}",
                alphas.len()
            )));
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::InvalidOrders(format!("order {i} is not finite")));
            }
            if a >= 1.0 {
                return Err(Error::InvalidOrders(format!(
                    "order {i} = {a} must be < 1"
                )));
            }
        }
        let total: f64 = alphas.iter().sum();
        if total <= 2.0 {
            return Err(Error::InvalidOrders(format!(
                "sum of orders = {total} must exceed 2"
            )));
        }
        let weights = alphas.iter().map(|a| a * (2.0 - a)).collect();
        let metric_grade = alphas.iter().all(|&a| a > 0.0);
        Ok(Self {
            alphas: alphas.to_vec(),
            weights,
            metric_grade,
        })
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// True when every order lies in `(0, 1)`.
    pub fn is_metric_grade(&self) -> bool {
        self.metric_grade
    }

    /// Total hyperbolic area `2π(Σα − 2)`.
    pub fn gauss_bonnet_area(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.alphas.iter().sum::<f64>() - 2.0)
    }
}

/// The marked points with `0`, `1`, `∞` fixed and `n − 3` free points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    free: Vec<Complex64>,
}

impl Configuration {
    pub fn new(free: Vec<Complex64>) -> Result<Self> {
        let fixed = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        for (i, z) in free.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidConfiguration(format!(
                    "free point {i} is not finite"
                )));
            }
            for f in fixed {
                if (z - f).norm() < COLLISION_DISTANCE {
                    return Err(Error::InvalidConfiguration(format!(
                        "free point {i} = {z} collides with {f}"
                    )));
                }
            }
            for (j, w) in free.iter().enumerate().take(i) {
                if (z - w).norm() < COLLISION_DISTANCE {
                    return Err(Error::InvalidConfiguration(format!(
                        "free points {j} and {i} collide at {z}"
                    )));
                }
            }
        }
        Ok(Self { free })
    }

    /// The configuration with no free points (`n = 3`).
    pub fn triple() -> Self {
        Self { free: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.free.len() + 3
    }

    pub fn free_points(&self) -> &[Complex64] {
        &self.free
    }

    /// All finite marked points in index order: free points, then 0 and 1.
    pub fn finite_points(&self) -> Vec<Complex64> {
        let mut pts = self.free.clone();
        pts.push(Complex64::new(0.0, 0.0));
        pts.push(Complex64::new(1.0, 0.0));
        pts
    }

    /// The point with index `i`, or `None` for the point at infinity.
    pub fn point(&self, i: usize) -> Option<Complex64> {
        let m = self.free.len();
        match i {
            _ if i < m => Some(self.free[i]),
            _ if i == m => Some(Complex64::new(0.0, 0.0)),
            _ if i == m + 1 => Some(Complex64::new(1.0, 0.0)),
            _ => None,
        }
    }

    /// Minimum pairwise distance between finite marked points.
    pub fn min_distance(&self) -> f64 {
        min_pairwise_distance(&self.finite_points())
    }

    /// Replaces free point `i`.
    pub fn with_free_point(&self, i: usize, z: Complex64) -> Result<Self> {
        let mut free = self.free.clone();
        if i >= free.len() {
            return Err(Error::Dimension(format!("no free point {i}")));
        }
        free[i] = z;
        Self::new(free)
    }

    /// The mirror configuration `z ↦ z̄`.
    pub fn conjugate(&self) -> Self {
        Self {
            free: self.free.iter().map(|z| z.conj()).collect(),
        }
    }
}

pub(crate) fn min_pairwise_distance(pts: &[Complex64]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..pts.len() {
        for j in 0..i {
            d = d.min((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Accessory parameters: the free values plus the three dependent ones fixed
/// by the behaviour of `T` at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessoryVector {
    pub free: Vec<Complex64>,
    pub at_zero: Complex64,
    pub at_one: Complex64,
    pub at_infinity: Complex64,
}

impl AccessoryVector {
    /// Solves the three linear relations
    /// `Σ c_i = 0`, `Σ (h_i + 2 c_i z_i) = h_n`, `Σ (h_i z_i + c_i z_i²) = c_n`
    /// (sums over finite points) for the values at `0`, `1` and `∞`.
    pub fn complete(
        config: &Configuration,
        orders: &OrderData,
        free: &[Complex64],
    ) -> Result<Self> {
        let n = config.n();
        if orders.n() != n {
            return Err(Error::Dimension(format!(
                "{} orders for {} points",
                orders.n(),
                n
            )));
        }
        if free.len() != n - 3 {
            return Err(Error::Dimension(format!(
                "expected {} free accessory parameters, got {}",
                n - 3,
                free.len()
            )));
        }
        let h = orders.weights();
        let zs = config.free_points();
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut hz = Complex64::new(0.0, 0.0);
        for (i, (&c, &z)) in free.iter().zip(zs).enumerate() {
            s0 += c;
            s1 += c * z;
            s2 += c * z * z;
            hz += h[i] * z;
        }
        let h_finite: f64 = h[..n - 1].iter().sum();
        let h_one = h[n - 2];
        let h_inf = h[n - 1];
        let at_one = Complex64::new((h_inf - h_finite) / 2.0, 0.0) - s1;
        let at_zero = -s0 - at_one;
        let at_infinity = hz + h_one + s2 + at_one;
        Ok(Self {
            free: free.to_vec(),
            at_zero,
            at_one,
            at_infinity,
        })
    }

    /// Accessory values at the finite points in index order.
    pub fn finite(&self) -> Vec<Complex64> {
        let mut c = self.free.clone();
        c.push(self.at_zero);
        c.push(self.at_one);
        c
    }

    /// Value at point index `i` (the last index is infinity).
    pub fn get(&self, i: usize) -> Complex64 {
        let m = self.free.len();
        match i {
            _ if i < m => self.free[i],
            _ if i == m => self.at_zero,
            _ if i == m + 1 => self.at_one,
            _ => self.at_infinity,
        }
    }

    /// Residuals of the three linear relations.
    pub fn relation_residuals(&self, config: &Configuration, orders: &OrderData) -> [f64; 3] {
        let pts = config.finite_points();
        let c = self.finite();
        let h = orders.weights();
        let n = config.n();
        let mut r0 = Complex64::new(0.0, 0.0);
        let mut r1 = Complex64::new(-h[n - 1], 0.0);
        let mut r2 = -self.at_infinity;
        for i in 0..n - 1 {
            r0 += c[i];
            r1 += h[i] + 2.0 * c[i] * pts[i];
            r2 += h[i] * pts[i] + c[i] * pts[i] * pts[i];
        }
        [r0.norm(), r1.norm(), r2.norm()]
    }
}

/// `T(z) = Σ_i ( h_i / (2 (z − z_i)²) + c_i / (z − z_i) )` over finite points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressTensor {
    config: Configuration,
    orders: OrderData,
    accessory: AccessoryVector,
    points: Vec<Complex64>,
    half_weights: Vec<f64>,
    residues: Vec<Complex64>,
}

impl StressTensor {
    pub fn new(
        config: Configuration,
        orders: OrderData,
        accessory: AccessoryVector,
    ) -> Result<Self> {
        if orders.n() != config.n() || accessory.free.len() != config.n() - 3 {
            return Err(Error::Dimension(
                "orders, configuration and accessory vector disagree".into(),
            ));
        }
        let n = config.n();
        let points = config.finite_points();
        let half_weights = orders.weights()[..n - 1].iter().map(|h| h / 2.0).collect();
        let residues = accessory.finite();
        Ok(Self {
            config,
            orders,
            accessory,
            points,
            half_weights,
            residues,
        })
    }

    /// Builds the tensor from free accessory values, completing the rest.
    pub fn from_free(
        config: &Configuration,
        orders: &OrderData,
        free: &[Complex64],
    ) -> Result<Self> {
        let acc = AccessoryVector::complete(config, orders, free)?;
        Self::new(config.clone(), orders.clone(), acc)
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn orders(&self) -> &OrderData {
        &self.orders
    }

    pub fn accessory(&self) -> &AccessoryVector {
        &self.accessory
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    /// Finite singular points.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// `T(z)`; fails at a pole.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut t = Complex64::new(0.0, 0.0);
        for ((&p, &hh), &c) in self.points.iter().zip(&self.half_weights).zip(&self.residues) {
            let d = z - p;
            if d.norm() == 0.0 {
                return Err(Error::Pole(z));
            }
            let inv = d.inv();
            t += hh * inv * inv + c * inv;
        }
        Ok(t)
    }

    /// `T'(z)`; fails at a pole.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let mut t = Complex64::new(0.0, 0.0);
        for ((&p, &hh), &c) in self.points.iter().zip(&self.half_weights).zip(&self.residues) {
            let d = z - p;
            if d.norm() == 0.0 {
                return Err(Error::Pole(z));
            }
            let inv = d.inv();
            t -= 2.0 * hh * inv * inv * inv + c * inv * inv;
        }
        Ok(t)
    }

    /// Distance from `z` to the nearest finite singular point.
    pub fn singular_distance(&self, z: Complex64) -> f64 {
        self.points
            .iter()
            .map(|p| (z - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Taylor coefficients `T(z0 + t) = Σ_j τ_j t^j`, up to `count` terms.
    pub fn taylor_coefficients(&self, z0: Complex64, count: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for ((&p, &hh), &c) in self.points.iter().zip(&self.half_weights).zip(&self.residues) {
            let inv = (z0 - p).inv();
            let minus_inv = -inv;
            // pw = (-1)^j inv^(j+1)
            let mut pw = inv;
            for (j, o) in out.iter_mut().enumerate() {
                *o += (hh * (j as f64 + 1.0)) * pw * inv + c * pw;
                pw *= minus_inv;
            }
        }
        out
    }

    /// Laurent data of `ζ² T` in the local coordinate at point `k`,
    /// `ζ² T = Σ_m τ_m ζ^m` with `τ_0 = h_k / 2` and `τ_1 = c_k`.
    ///
    /// For the point at infinity the coordinate is `ζ = 1/z` and the
    /// transformed tensor is `T(1/ζ) / ζ⁴`.
    pub fn local_coefficients(&self, k: usize, count: usize) -> Vec<Complex64> {
        let n = self.n();
        let mut out = vec![Complex64::new(0.0, 0.0); count.max(2)];
        if k == n - 1 {
            let hn = self.orders.weight(n - 1);
            for ((&p, &hh), &c) in self.points.iter().zip(&self.half_weights).zip(&self.residues) {
                let mut pw = Complex64::new(1.0, 0.0);
                for (m, o) in out.iter_mut().enumerate() {
                    *o += hh * (m as f64 + 1.0) * pw + c * pw * p;
                    pw *= p;
                }
            }
            out[0] = Complex64::new(hn / 2.0, 0.0);
            out[1] = self.accessory.at_infinity;
        } else {
            let zk = self.points[k];
            out[0] = Complex64::new(self.half_weights[k], 0.0);
            out[1] = self.residues[k];
            for (i, ((&p, &hh), &c)) in self
                .points
                .iter()
                .zip(&self.half_weights)
                .zip(&self.residues)
                .enumerate()
            {
                if i == k {
                    continue;
                }
                let inv = (zk - p).inv();
                let minus_inv = -inv;
                let mut pw = inv;
                for (j, o) in out.iter_mut().skip(2).enumerate() {
                    *o += (hh * (j as f64 + 1.0)) * pw * inv + c * pw;
                    pw *= minus_inv;
                }
            }
        }
        out.truncate(count.max(2));
        out
    }
}
