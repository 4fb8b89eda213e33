//! Closed-loop kinematic robot `x' = u(x)` under the pulled-back gradient law.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FreeSpaceClass, ValidatedWorkspace};
use crate::navfield::{potential_and_control, ControllerConfig, NavError};
use crate::rhsolver::VERTEX_EXCLUSION_FRACTION;

/// Allowed per-sample increase of the Lyapunov value.
pub const LYAPUNOV_JUMP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub max_time: f64,
    pub goal_radius: f64,
    pub gain: f64,
    pub k: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { dt: 1e-3, max_time: 200.0, goal_radius: 1e-3, gain: 1.0, k: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("start point ({re}, {im}) is not in the open free space")]
    InvalidStart { re: f64, im: f64 },
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nav(#[from] NavError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Converged,
    Timeout,
    CollisionDetected,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Complex64,
    pub u: Complex64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    /// Steps taken with the quartered step size near a vertex.
    pub near_vertex_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

enum Step {
    Ok(Complex64),
    Collision,
    Failure,
}

fn rk4(x: Complex64, k1: Complex64, h: f64, cc: &ControllerConfig<'_>, ws: &ValidatedWorkspace) -> Step {
    let field = |p: Complex64| -> Option<Complex64> {
        match ws.classify(p) {
            FreeSpaceClass::Interior => potential_and_control(p, cc).ok().map(|(_, u)| u),
            _ => None,
        }
    };
    let Some(k2) = field(x + 0.5 * h * k1) else { return Step::Collision };
    let Some(k3) = field(x + 0.5 * h * k2) else { return Step::Collision };
    let Some(k4) = field(x + h * k3) else { return Step::Collision };
    let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !(next.re.is_finite() && next.im.is_finite()) {
        return Step::Failure;
    }
    match ws.classify(next) {
        FreeSpaceClass::Interior => Step::Ok(next),
        _ => Step::Collision,
    }
}

/// Fixed-step classical Runge-Kutta integration from `x0` until the goal
/// ball, the time limit, or a step leaving the open free space.
///
/// Within `VERTEX_EXCLUSION_FRACTION * diameter` of a vertex a step is taken
/// as four quarter steps, so samples stay `dt` apart.
pub fn integrate(x0: Complex64, cc: &ControllerConfig<'_>, sc: &SimulationConfig, ws: &ValidatedWorkspace) -> Result<Trajectory, SimulationError> {
    if !(sc.dt > 0.0 && sc.dt.is_finite()) || !(sc.goal_radius > 0.0) || !(sc.max_time >= 0.0) {
        return Err(SimulationError::InvalidConfig(format!("dt = {}, max time = {}, goal radius = {}", sc.dt, sc.max_time, sc.goal_radius)));
    }
    if ws.classify(x0) != FreeSpaceClass::Interior {
        return Err(SimulationError::InvalidStart { re: x0.re, im: x0.im });
    }
    let goal = ws.goal();
    let eps_v = VERTEX_EXCLUSION_FRACTION * ws.diameter();
    let mut samples = Vec::new();
    let mut near_vertex_steps = 0;
    let (mut x, mut t) = (x0, 0.0);
    let outcome = loop {
        let (v, u) = match potential_and_control(x, cc) {
            Ok(r) => r,
            Err(_) => break Outcome::NumericalFailure,
        };
        if !(u.re.is_finite() && u.im.is_finite() && v.is_finite()) {
            break Outcome::NumericalFailure;
        }
        samples.push(Sample { t, x, u, v });
        if (x - goal).norm() < sc.goal_radius {
            break Outcome::Converged;
        }
        if t >= sc.max_time {
            break Outcome::Timeout;
        }
        let h = sc.dt.min(sc.max_time - t);
        let result = if ws.vertex_distance(x) < eps_v {
            near_vertex_steps += 1;
            let mut y = x;
            let mut k1 = u;
            let mut r = Step::Ok(y);
            for sub in 0..4 {
                if sub > 0 {
                    match potential_and_control(y, cc) {
                        Ok((_, uu)) => k1 = uu,
                        Err(_) => {
                            r = Step::Failure;
                            break;
                        }
                    }
                }
                r = rk4(y, k1, h / 4.0, cc, ws);
                match r {
                    Step::Ok(next) => y = next,
                    _ => break,
                }
            }
            r
        } else {
            rk4(x, u, h, cc, ws)
        };
        match result {
            Step::Ok(next) => {
                x = next;
                t = if h < sc.dt { sc.max_time } else { t + h };
            }
            Step::Collision => break Outcome::CollisionDetected,
            Step::Failure => break Outcome::NumericalFailure,
        }
    };
    Ok(Trajectory { samples, outcome, near_vertex_steps })
}

/// Integrates every start independently; a bad start yields its own error.
pub fn integrate_many(
    starts: &[Complex64],
    cc: &ControllerConfig<'_>,
    sc: &SimulationConfig,
    ws: &ValidatedWorkspace,
) -> Vec<Result<Trajectory, SimulationError>> {
    crate::par_map(starts.len(), |i| integrate(starts[i], cc, sc, ws))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Largest `V[i + 1] - V[i]`, or 0 when `V` never increases.
    pub max_increase: f64,
    pub passed: bool,
}

pub fn lyapunov_check(traj: &Trajectory) -> LyapunovReport {
    let max_increase = traj.samples.windows(2).map(|w| w[1].v - w[0].v).fold(0.0, f64::max);
    LyapunovReport { max_increase, passed: max_increase < LYAPUNOV_JUMP_TOLERANCE }
}

/// Minimum distance from the sampled states to the free-space boundary.
pub fn clearance(traj: &Trajectory, ws: &ValidatedWorkspace) -> f64 {
    traj.samples.iter().map(|s| ws.boundary_distance(s.x)).fold(f64::INFINITY, f64::min)
}

/// CSV with header `t,x,y,ux,uy,V` and 17 significant digits per value.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    writeln!(out, "t,x,y,ux,uy,V")?;
    for s in &traj.samples {
        // adding 0.0 turns -0.0 into 0.0
        let row = [s.t, s.x.re, s.x.im, s.u.re, s.u.im, s.v].map(|v| v + 0.0);
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", row[0], row[1], row[2], row[3], row[4], row[5])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::koebe::SphereWorld;
    use crate::navfield::NavFunctionConfig;
    use crate::rhsolver::{PlanarMap, SolverError};

    struct Identity;

    impl PlanarMap for Identity {
        fn eval(&self, z: Complex64) -> Result<Complex64, SolverError> {
            Ok(z)
        }
        fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64), SolverError> {
            Ok((z, Complex64::new(1.0, 0.0)))
        }
    }

    fn disk() -> ValidatedWorkspace {
        let n = 512;
        let outer = Polygon::new((0..n).map(|k| Complex64::cis(std::f64::consts::TAU * k as f64 / n as f64)).collect()).unwrap();
        ValidatedWorkspace::new(outer, vec![], Complex64::new(0.0, 0.0)).unwrap()
    }

    fn controller(k: u32) -> ControllerConfig<'static> {
        let nav = NavFunctionConfig::new(k, Complex64::new(0.0, 0.0), SphereWorld::default()).unwrap();
        ControllerConfig::new(1.0, nav, &Identity).unwrap()
    }

    #[test]
    fn start_at_goal_is_single_sample() {
        let ws = disk();
        let tr = integrate(Complex64::new(0.0, 0.0), &controller(6), &SimulationConfig::default(), &ws).unwrap();
        assert_eq!(tr.outcome, Outcome::Converged);
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(lyapunov_check(&tr).max_increase, 0.0);
        assert!((clearance(&tr, &ws) - ws.boundary_distance(Complex64::new(0.0, 0.0))).abs() < 1e-15);
    }

    #[test]
    fn radial_flow_on_disk() {
        let ws = disk();
        let tr = integrate(Complex64::new(0.5, 0.0), &controller(6), &SimulationConfig::default(), &ws).unwrap();
        assert_eq!(tr.outcome, Outcome::Converged);
        assert!(tr.samples.windows(2).all(|w| w[1].x.re < w[0].x.re && w[1].x.im == 0.0));
        assert!(tr.samples.windows(2).all(|w| ((w[1].t - w[0].t) - 1e-3).abs() < 1e-12));
        assert!(lyapunov_check(&tr).max_increase <= 1e-9);
        assert!((clearance(&tr, &ws) - ws.boundary_distance(Complex64::new(0.5, 0.0))).abs() < 1e-15);
    }

    #[test]
    fn invalid_start_and_config() {
        let ws = disk();
        let cc = controller(6);
        assert!(matches!(integrate(Complex64::new(2.0, 0.0), &cc, &SimulationConfig::default(), &ws), Err(SimulationError::InvalidStart { .. })));
        let bad = SimulationConfig { dt: 0.0, ..SimulationConfig::default() };
        assert!(matches!(integrate(Complex64::new(0.2, 0.0), &cc, &bad, &ws), Err(SimulationError::InvalidConfig(_))));
    }

    #[test]
    fn timeout_with_partial_last_step() {
        let ws = disk();
        let sc = SimulationConfig { max_time: 0.0105, ..SimulationConfig::default() };
        let tr = integrate(Complex64::new(0.5, 0.0), &controller(6), &sc, &ws).unwrap();
        assert_eq!(tr.outcome, Outcome::Timeout);
        assert_eq!(tr.last().t, 0.0105);
        assert_eq!(tr.samples.len(), 12);
    }

    #[test]
    fn csv_layout() {
        let ws = disk();
        let tr = integrate(Complex64::new(0.0, 0.0), &controller(6), &SimulationConfig::default(), &ws).unwrap();
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,y,ux,uy,V");
        assert_eq!(lines[1], "0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0");
    }
}
