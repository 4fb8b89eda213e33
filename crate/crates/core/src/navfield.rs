//! Koditschek-Rimon navigation function on a sphere world, its pullback
//! through the workspace map, and the gradient feedback law.
//!
//! Points and gradients in the plane are represented as `Complex64`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::koebe::SphereWorld;
use crate::render::ScalarGrid;
use crate::rhsolver::{PlanarMap, SolverError};

/// `beta` below `-BETA_TOLERANCE` counts as outside the free space.
pub const BETA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("sharpness k = {0} must be at least 2")]
    InvalidSharpness(u32),
    #[error("gain {0} must be positive and finite")]
    InvalidGain(f64),
    #[error("goal image is not in the open free space")]
    GoalOutsideFreeSpace,
    #[error("point ({re}, {im}) is outside the free space")]
    OutsideFreeSpace { re: f64, im: f64 },
    #[error(transparent)]
    Map(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavFunctionConfig {
    pub k: u32,
    pub goal: Complex64,
    pub world: SphereWorld,
}

impl NavFunctionConfig {
    pub fn new(k: u32, goal: Complex64, world: SphereWorld) -> Result<Self, NavError> {
        if k < 2 {
            return Err(NavError::InvalidSharpness(k));
        }
        if !world.contains(goal) {
            return Err(NavError::GoalOutsideFreeSpace);
        }
        Ok(NavFunctionConfig { k, goal, world })
    }
}

/// Aggregate obstacle function `(1 - |p|^2) prod_i (|p - q_i|^2 - rho_i^2)`.
pub fn beta_sphere(p: Complex64, sw: &SphereWorld) -> f64 {
    sw.circles
        .iter()
        .map(|c| (p - c.center).norm_sqr() - c.radius * c.radius)
        .fold(1.0 - p.norm_sqr(), |acc, b| acc * b)
}

/// Gradient of `beta_sphere` by the product rule.
pub fn grad_beta_sphere(p: Complex64, sw: &SphereWorld) -> Complex64 {
    let factors: Vec<f64> = std::iter::once(1.0 - p.norm_sqr())
        .chain(sw.circles.iter().map(|c| (p - c.center).norm_sqr() - c.radius * c.radius))
        .collect();
    let grads: Vec<Complex64> = std::iter::once(-2.0 * p).chain(sw.circles.iter().map(|c| 2.0 * (p - c.center))).collect();
    let mut g = Complex64::new(0.0, 0.0);
    for i in 0..factors.len() {
        let others: f64 = factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f).product();
        g += grads[i] * others;
    }
    g
}

fn checked_beta(p: Complex64, cfg: &NavFunctionConfig) -> Result<f64, NavError> {
    let b = beta_sphere(p, &cfg.world);
    let outside = p.norm() > 1.0 + BETA_TOLERANCE || cfg.world.circles.iter().any(|c| c.signed_distance(p) < -BETA_TOLERANCE);
    if outside || !b.is_finite() {
        return Err(NavError::OutsideFreeSpace { re: p.re, im: p.im });
    }
    Ok(b.max(0.0))
}

/// `phi = d / (d^k + beta)^(1/k)` with `d = |p - p_d|`.
pub fn phi_kr(p: Complex64, cfg: &NavFunctionConfig) -> Result<f64, NavError> {
    let beta = checked_beta(p, cfg)?;
    let d = (p - cfg.goal).norm();
    if d == 0.0 {
        return Ok(0.0);
    }
    let s = d.powi(cfg.k as i32) + beta;
    Ok((d / s.powf(1.0 / cfg.k as f64)).min(1.0))
}

/// `grad phi = S^(-1/k - 1) [beta grad d - (d / k) grad beta]`, `S = d^k + beta`.
///
/// Returns 0 at the goal. On the boundary `beta = 0` and the same formula
/// gives the outward normal direction.
pub fn grad_phi_kr(p: Complex64, cfg: &NavFunctionConfig) -> Result<Complex64, NavError> {
    let beta = checked_beta(p, cfg)?;
    let diff = p - cfg.goal;
    let d = diff.norm();
    if d == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let k = cfg.k as f64;
    let s = d.powi(cfg.k as i32) + beta;
    let gd = diff / d;
    let gb = grad_beta_sphere(p, &cfg.world);
    Ok(s.powf(-1.0 / k - 1.0) * (beta * gd - (d / k) * gb))
}

/// Grid-local minima of `phi_kr` on the sphere world, except those within
/// one grid cell of the goal. A non-empty result means `k` is below the
/// threshold for this sphere world.
pub fn spurious_minima(cfg: &NavFunctionConfig, spacing: f64) -> Vec<Complex64> {
    let grid = ScalarGrid::sample(Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0), spacing, |p| phi_kr(p, cfg).ok());
    grid.local_minima()
        .into_iter()
        .map(|(i, j)| grid.point(i, j))
        .filter(|p| (p.re - cfg.goal.re).abs() > spacing || (p.im - cfg.goal.im).abs() > spacing)
        .collect()
}

/// Real Jacobian `[[Re T', -Im T'], [Im T', Re T']]` of a holomorphic map.
pub fn jacobian_from_derivative(d: Complex64) -> Matrix2<f64> {
    Matrix2::new(d.re, -d.im, d.im, d.re)
}

pub fn jacobian(map: &dyn PlanarMap, x: Complex64) -> Result<Matrix2<f64>, NavError> {
    let (_, d) = map.eval_with_derivative(x)?;
    Ok(jacobian_from_derivative(d))
}

pub struct ControllerConfig<'a> {
    pub gain: f64,
    pub nav: NavFunctionConfig,
    pub map: &'a dyn PlanarMap,
}

impl<'a> ControllerConfig<'a> {
    pub fn new(gain: f64, nav: NavFunctionConfig, map: &'a dyn PlanarMap) -> Result<Self, NavError> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(NavError::InvalidGain(gain));
        }
        Ok(ControllerConfig { gain, nav, map })
    }

    /// Pulled-back value `phi(T(x))`.
    pub fn potential(&self, x: Complex64) -> Result<f64, NavError> {
        phi_kr(self.map.eval(x)?, &self.nav)
    }
}

/// Feedback `u = -K J_T^T grad phi(T(x))`; `J_T^T v` is `conj(T') v`.
pub fn control_input(x: Complex64, cc: &ControllerConfig<'_>) -> Result<Complex64, NavError> {
    let (w, d) = cc.map.eval_with_derivative(x)?;
    let g = grad_phi_kr(w, &cc.nav)?;
    Ok(-cc.gain * d.conj() * g)
}

/// Pulled-back potential and feedback together, sharing one map evaluation.
pub fn potential_and_control(x: Complex64, cc: &ControllerConfig<'_>) -> Result<(f64, Complex64), NavError> {
    let (w, d) = cc.map.eval_with_derivative(x)?;
    let v = phi_kr(w, &cc.nav)?;
    let g = grad_phi_kr(w, &cc.nav)?;
    Ok((v, -cc.gain * d.conj() * g))
}
