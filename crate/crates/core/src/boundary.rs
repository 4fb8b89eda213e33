//! Periodic boundary parametrizations and corner grading.
//!
//! A polygon with `n` vertices is traversed affinely over `[s_k, s_{k+1}]`
//! with `s_k = k * 2pi / n`. The grading map `eta` flattens the curve at
//! every `s_k` so that all derivatives of order below `q` vanish there; the
//! graded curve is then sampled on a uniform grid, which is what the
//! trapezoidal Nyström discretization needs.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Orientation, Polygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("parameter {0} is outside [0, 2pi]")]
    DomainError(f64),
    #[error("grading exponent must be at least 2, got {0}")]
    InvalidExponent(u32),
    #[error("need an even node count of at least {required}, got {got}")]
    InsufficientNodes { required: usize, got: usize },
}

pub const DEFAULT_GRADING_EXPONENT: u32 = 3;

fn grading_poly(s: f64, q: f64) -> f64 {
    let x = (s - PI) / PI;
    (0.5 - 1.0 / q) * x * x * x + x / q + 0.5
}

fn grading_poly_derivative(s: f64, q: f64) -> f64 {
    let x = (s - PI) / PI;
    (3.0 * (0.5 - 1.0 / q) * x * x + 1.0 / q) / PI
}

fn sigma_unchecked(s: f64, q: u32) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= TAU {
        return TAU;
    }
    let qf = q as f64;
    let a = grading_poly(s, qf).powi(q as i32);
    let b = grading_poly(TAU - s, qf).powi(q as i32);
    TAU * a / (a + b)
}

fn sigma_derivative_unchecked(s: f64, q: u32) -> f64 {
    if s <= 0.0 || s >= TAU {
        return 0.0;
    }
    let qf = q as f64;
    let g = grading_poly(s, qf);
    let gb = grading_poly(TAU - s, qf);
    let dg = grading_poly_derivative(s, qf);
    let dgb = grading_poly_derivative(TAU - s, qf);
    let gq = g.powi(q as i32);
    let gbq = gb.powi(q as i32);
    let denom = gq + gbq;
    TAU * qf * g.powi(q as i32 - 1) * gb.powi(q as i32 - 1) * (dg * gb + g * dgb) / (denom * denom)
}

/// Sigmoidal grading `sigma: [0, 2pi] -> [0, 2pi]`.
pub fn sigma(s: f64, q: u32) -> Result<f64, BoundaryError> {
    check_sigma_args(s, q)?;
    Ok(sigma_unchecked(s, q))
}

pub fn sigma_derivative(s: f64, q: u32) -> Result<f64, BoundaryError> {
    check_sigma_args(s, q)?;
    Ok(sigma_derivative_unchecked(s, q))
}

/// Inverse of `sigma` by bisection.
pub fn sigma_inverse(y: f64, q: u32) -> Result<f64, BoundaryError> {
    check_sigma_args(y, q)?;
    let (mut lo, mut hi) = (0.0, TAU);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sigma_unchecked(mid, q) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_sigma_args(s: f64, q: u32) -> Result<(), BoundaryError> {
    if q < 2 {
        return Err(BoundaryError::InvalidExponent(q));
    }
    if !(0.0..=TAU).contains(&s) {
        return Err(BoundaryError::DomainError(s));
    }
    Ok(())
}

/// Piecewise-affine 2pi-periodic parametrization of a polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryParametrization {
    vertices: Vec<Complex64>,
    q: u32,
}

impl BoundaryParametrization {
    /// Vertices are traversed in the given order.
    pub fn new(vertices: Vec<Complex64>, q: u32) -> Result<Self, BoundaryError> {
        if q < 2 {
            return Err(BoundaryError::InvalidExponent(q));
        }
        Ok(BoundaryParametrization { vertices, q })
    }

    /// Traverses `p` with the requested orientation.
    pub fn oriented(p: &Polygon, orientation: Orientation, q: u32) -> Result<Self, BoundaryError> {
        let poly = match orientation {
            Orientation::CounterClockwise => p.to_ccw(),
            Orientation::Clockwise => p.to_cw(),
        };
        Self::new(poly.vertices().to_vec(), q)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn exponent(&self) -> u32 {
        self.q
    }

    pub fn vertex_parameter(&self, k: usize) -> f64 {
        k as f64 * TAU / self.vertices.len() as f64
    }

    /// Edge index and local offset `n (s - s_k)` in `[0, 2pi)`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.vertices.len();
        let s = s.rem_euclid(TAU);
        let mut x = s * n as f64 / TAU;
        // vertex parameters land exactly on their vertex
        let r = x.round();
        if (x - r).abs() <= 4.0 * f64::EPSILON * r.max(1.0) {
            x = r;
        }
        let k = (x.floor() as usize).min(n - 1);
        (k, (x - k as f64) * TAU)
    }

    pub fn gamma(&self, s: f64) -> Complex64 {
        let n = self.vertices.len();
        let (k, local) = self.locate(s);
        let a = self.vertices[k];
        let b = self.vertices[(k + 1) % n];
        a + (b - a) * (local / TAU)
    }

    /// Derivative on the open edge containing `s`.
    pub fn gamma_derivative(&self, s: f64) -> Complex64 {
        let n = self.vertices.len();
        let (k, _) = self.locate(s);
        (self.vertices[(k + 1) % n] - self.vertices[k]) * (n as f64 / TAU)
    }

    /// Grading map: fixes every `s_k` with vanishing derivative there.
    pub fn eta(&self, s: f64) -> f64 {
        let n = self.vertices.len() as f64;
        let wraps = (s / TAU).floor();
        let (k, local) = self.locate(s);
        let sk = self.vertex_parameter(k);
        wraps * TAU + sk + sigma_unchecked(local, self.q) / n
    }

    pub fn eta_derivative(&self, s: f64) -> f64 {
        let (_, local) = self.locate(s);
        sigma_derivative_unchecked(local, self.q)
    }

    pub fn smoothed(&self, tau: f64) -> Complex64 {
        self.gamma(self.eta(tau))
    }

    pub fn smoothed_derivative(&self, tau: f64) -> Complex64 {
        let n = self.vertices.len();
        let (k, local) = self.locate(tau);
        let edge = (self.vertices[(k + 1) % n] - self.vertices[k]) * (n as f64 / TAU);
        edge * sigma_derivative_unchecked(local, self.q)
    }
}

/// Parametrize a polygon in its stored orientation.
pub fn parametrize_polygon(p: &Polygon, q: u32) -> Result<BoundaryParametrization, BoundaryError> {
    BoundaryParametrization::new(p.vertices().to_vec(), q)
}

/// Grading map evaluated for `param`.
pub fn eta(s: f64, param: &BoundaryParametrization) -> f64 {
    param.eta(s)
}

/// A closed curve sampled on the uniform grid `tau_j = j * 2pi / m`.
///
/// `corners` holds the points where the underlying curve is not smooth
/// (polygon vertices, or their images), used for proximity warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedBoundary {
    pub points: Vec<Complex64>,
    pub derivatives: Vec<Complex64>,
    #[serde(default)]
    pub corners: Vec<Complex64>,
}

/// Uniform grid with `m` nodes on `[0, 2pi)`.
pub fn uniform_nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 * TAU / m as f64).collect()
}

/// Default node count for a polygon with `n` vertices.
pub fn default_node_count(n: usize) -> usize {
    let m = (16 * n).max(256);
    m + m % 2
}

/// Samples the graded curve `gamma(eta(tau))` on `m` uniform nodes.
pub fn smooth_boundary(param: &BoundaryParametrization, m: usize) -> Result<SmoothedBoundary, BoundaryError> {
    let required = 4 * param.vertex_count();
    if m < required || m % 2 != 0 {
        return Err(BoundaryError::InsufficientNodes { required, got: m });
    }
    let nodes = uniform_nodes(m);
    Ok(SmoothedBoundary {
        points: nodes.iter().map(|&t| param.smoothed(t)).collect(),
        derivatives: nodes.iter().map(|&t| param.smoothed_derivative(t)).collect(),
        corners: param.vertices().to_vec(),
    })
}

impl SmoothedBoundary {
    /// Samples an analytic closed curve given with its derivative.
    pub fn from_fn(m: usize, curve: impl Fn(f64) -> Complex64, derivative: impl Fn(f64) -> Complex64) -> Self {
        let nodes = uniform_nodes(m);
        SmoothedBoundary {
            points: nodes.iter().map(|&t| curve(t)).collect(),
            derivatives: nodes.iter().map(|&t| derivative(t)).collect(),
            corners: Vec::new(),
        }
    }

    /// Circle `center + radius e^{+-i tau}`.
    pub fn circle(m: usize, center: Complex64, radius: f64, orientation: Orientation) -> Self {
        let sign = match orientation {
            Orientation::CounterClockwise => 1.0,
            Orientation::Clockwise => -1.0,
        };
        Self::from_fn(
            m,
            |t| center + radius * Complex64::cis(sign * t),
            |t| Complex64::new(0.0, sign * radius) * Complex64::cis(sign * t),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Trapezoidal step `2pi / m`.
    pub fn step(&self) -> f64 {
        TAU / self.points.len() as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        uniform_nodes(self.points.len())
    }

    /// Trapezoidal approximation of the parameter integral of the curve.
    pub fn parameter_integral(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() * self.step()
    }

    /// Winding number of the sampled curve around `z`.
    pub fn winding_number(&self, z: Complex64) -> f64 {
        let h = self.step();
        let s: Complex64 = self
            .points
            .iter()
            .zip(&self.derivatives)
            .map(|(p, d)| d / (p - z))
            .sum();
        (s * h / Complex64::new(0.0, TAU)).re
    }

    pub fn orientation(&self) -> Orientation {
        let area: f64 = self
            .points
            .iter()
            .zip(&self.derivatives)
            .map(|(p, d)| p.re * d.im - p.im * d.re)
            .sum();
        if area > 0.0 {
            Orientation::CounterClockwise
        } else {
            Orientation::Clockwise
        }
    }

    pub fn min_distance(&self, z: Complex64) -> f64 {
        self.points.iter().map(|p| (p - z).norm_sqr()).fold(f64::INFINITY, f64::min).sqrt()
    }

    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = (self.points[0], self.points[0]);
        for p in &self.points {
            lo.re = lo.re.min(p.re);
            lo.im = lo.im.min(p.im);
            hi.re = hi.re.max(p.re);
            hi.im = hi.im.max(p.im);
        }
        (hi - lo).norm()
    }

    pub fn centroid(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() / self.points.len() as f64
    }

    /// Trigonometric interpolation of the sampled curve at parameter `x`.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        trig_interpolate(&self.points, x)
    }
}

/// Barycentric trigonometric interpolation on an even uniform grid.
pub fn trig_interpolate<T>(values: &[T], x: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + std::ops::Div<f64, Output = T> + Default,
{
    let m = values.len();
    debug_assert!(m % 2 == 0, "trigonometric barycentric form needs an even grid");
    let h = TAU / m as f64;
    let mut num = T::default();
    let mut den = 0.0;
    for (j, v) in values.iter().enumerate() {
        let d = 0.5 * (x - j as f64 * h);
        let t = d.tan();
        if t.abs() < 1e-14 {
            return *v;
        }
        let w = if j % 2 == 0 { 1.0 } else { -1.0 } / t;
        num = num + *v * w;
        den += w;
    }
    num / den
}

/// Spectral derivative of real periodic samples on a uniform grid (`m` even).
pub fn spectral_derivative(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let h = TAU / m as f64;
    (0..m)
        .map(|i| {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                if i == j {
                    continue;
                }
                let sign = if (i + m - j) % 2 == 0 { 1.0 } else { -1.0 };
                s += 0.5 * sign / (0.5 * (i as f64 - j as f64) * h).tan() * v;
            }
            s
        })
        .collect()
}
