//! Koebe-style iteration for multiply connected polygonal workspaces.
//!
//! Boundary 0 is the outer polygon, boundaries `1..=M` are the obstacles.
//! One iteration maps the exterior of every obstacle image in turn onto the
//! exterior of a circle and then the interior of the outer image onto the
//! unit disk with the goal image sent to 0.
//!
//! Each boundary keeps a working curve sampled on a uniform grid. Right after
//! its own solve the working curve is replaced by the exact image circle, so
//! later solves always see smooth, uniformly parametrized curves. The
//! original graded polygon nodes are tracked through every piece; their
//! images are the boundary values of the final map.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{default_node_count, smooth_boundary, trig_interpolate, BoundaryError, BoundaryParametrization, SmoothedBoundary, DEFAULT_GRADING_EXPONENT};
use crate::geometry::{Orientation, Polygon, ValidatedWorkspace};
use crate::rhsolver::{ConformalMapPiece, DomainKind, PlanarMap, RhSolution, RhSystem, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KoebeError {
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("boundary {boundary}: {source}")]
    Solver { boundary: usize, source: SolverError },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },
    #[error("obstacle {index} collapsed to radius {radius:e}")]
    DegenerateObstacleImage { index: usize, radius: f64 },
    #[error("points are collinear; no circle fits")]
    CollinearPoints,
    #[error("circle residual grew from {previous:e} to {current:e} at iteration {iteration}")]
    NonMonotoneCircleResidual { iteration: usize, previous: f64, current: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoebeConfig {
    /// Nodes per boundary; `None` picks `default_node_count` per polygon.
    pub nodes: Option<usize>,
    pub grading_exponent: u32,
    pub tol: f64,
    pub max_iterations: usize,
    /// Fail when the largest circle residual grows after the first iteration.
    pub strict: bool,
}

impl Default for KoebeConfig {
    fn default() -> Self {
        KoebeConfig { nodes: None, grading_exponent: DEFAULT_GRADING_EXPONENT, tol: 1e-12, max_iterations: 50, strict: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    /// Signed distance, negative inside.
    pub fn signed_distance(&self, p: Complex64) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// Unit disk with disjoint circular holes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SphereWorld {
    pub circles: Vec<Circle>,
}

impl SphereWorld {
    /// Smallest gap between two holes or between a hole and the unit circle.
    pub fn min_margin(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (i, a) in self.circles.iter().enumerate() {
            m = m.min(1.0 - a.center.norm() - a.radius);
            for b in &self.circles[i + 1..] {
                m = m.min((a.center - b.center).norm() - a.radius - b.radius);
            }
        }
        m
    }

    pub fn is_valid(&self) -> bool {
        self.circles.iter().all(|c| c.radius > 0.0) && self.min_margin() > 0.0
    }

    /// Whether `p` lies in the open free space.
    pub fn contains(&self, p: Complex64) -> bool {
        p.norm() < 1.0 && self.circles.iter().all(|c| c.signed_distance(p) > 0.0)
    }
}

/// Least-squares circle through `points`: algebraic fit refined by
/// Gauss-Newton on the geometric distances. Returns the circle and the
/// largest deviation `| |p - center| - radius |`.
pub fn circle_residual(points: &[Complex64]) -> Result<(Circle, f64), KoebeError> {
    if points.len() < 3 {
        return Err(KoebeError::CollinearPoints);
    }
    let mean = points.iter().sum::<Complex64>() / points.len() as f64;
    let scale = points.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(KoebeError::CollinearPoints);
    }
    // x^2 + y^2 + D x + E y + F = 0 in centred, scaled coordinates
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let q = (p - mean) / scale;
        let row = Vector3::new(q.re, q.im, 1.0);
        ata += row * row.transpose();
        atb += row * -q.norm_sqr();
    }
    let cond_ok = ata.determinant().abs() > 1e-14 * ata.norm().powi(3);
    let sol = ata.lu().solve(&atb).filter(|_| cond_ok).ok_or(KoebeError::CollinearPoints)?;
    let mut center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) || center.norm() > 1e6 {
        return Err(KoebeError::CollinearPoints);
    }
    let mut radius = r2.sqrt();
    for _ in 0..20 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for p in points {
            let q = (p - mean) / scale;
            let d = q - center;
            let n = d.norm();
            let row = Vector3::new(-d.re / n, -d.im / n, -1.0);
            jtj += row * row.transpose();
            jtr += row * (n - radius);
        }
        let Some(step) = jtj.lu().solve(&-jtr) else { break };
        center += Complex64::new(step[0], step[1]);
        radius += step[2];
        if step.norm() < 1e-15 {
            break;
        }
    }
    let circle = Circle { center: mean + center * scale, radius: radius * scale };
    let dev = points.iter().map(|p| circle.signed_distance(*p).abs()).fold(0.0, f64::max);
    Ok((circle, dev))
}

/// Images of the original graded nodes of one boundary under the final map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedBoundary {
    pub kind: DomainKind,
    pub original: SmoothedBoundary,
    pub images: Vec<Complex64>,
}

/// Composition of simply connected pieces, applied in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComposedMap {
    pub pieces: Vec<ConformalMapPiece>,
    pub iterations: usize,
    pub residual: f64,
}

impl PlanarMap for ComposedMap {
    fn eval(&self, z: Complex64) -> Result<Complex64, SolverError> {
        self.pieces.iter().try_fold(z, |w, p| p.eval(w))
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64), SolverError> {
        self.pieces.iter().try_fold((z, Complex64::new(1.0, 0.0)), |(w, d), p| {
            let (v, dv) = p.eval_with_derivative(w)?;
            Ok((v, d * dv))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sup-norm displacement of tracked node images over the iteration.
    pub residual: f64,
    /// Largest circle-fit deviation over all boundary images.
    pub circle_residual: f64,
}

/// Progress hooks for `solve_workspace_with`.
pub trait KoebeObserver {
    fn iteration(&mut self, _record: &IterationRecord) {}
    fn piece(&mut self, _iteration: usize, _boundary: usize, _system: &RhSystem, _solution: &RhSolution) {}
}

impl KoebeObserver for () {}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KoebeSolution {
    pub map: ComposedMap,
    pub sphere_world: SphereWorld,
    pub boundaries: Vec<TrackedBoundary>,
    pub goal_image: Complex64,
    pub history: Vec<IterationRecord>,
}

struct State {
    kind: DomainKind,
    original: SmoothedBoundary,
    working: SmoothedBoundary,
    /// Parameters of the tracked nodes on the working curve.
    xi: Vec<f64>,
    images: Vec<Complex64>,
    /// A point enclosed by the working curve of an obstacle.
    anchor: Complex64,
}

fn graded(p: &Polygon, orientation: Orientation, cfg: &KoebeConfig) -> Result<SmoothedBoundary, BoundaryError> {
    let param = BoundaryParametrization::oriented(p, orientation, cfg.grading_exponent)?;
    let m = cfg.nodes.unwrap_or_else(|| default_node_count(p.len()));
    smooth_boundary(&param, m)
}

/// Angle parameter of each node image on the image circle, unwrapped to
/// follow the grid, minus the grid itself.
fn parameter_shift(images: &[Complex64], center: Complex64, sign: f64) -> Vec<f64> {
    let m = images.len();
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0;
    for (l, z) in images.iter().enumerate() {
        let x = l as f64 * TAU / m as f64;
        let theta = sign * (z - center).arg();
        let mut d = theta - x;
        if l == 0 {
            d = (d + PI).rem_euclid(TAU) - PI;
        } else {
            d -= TAU * ((d - prev) / TAU).round();
        }
        out.push(d);
        prev = d;
    }
    out
}

impl State {
    fn apply(&mut self, piece: &ConformalMapPiece, boundary: usize) -> Result<(), KoebeError> {
        let err = |source| KoebeError::Solver { boundary, source };
        for (p, d) in self.working.points.iter_mut().zip(self.working.derivatives.iter_mut()) {
            let (v, dv) = piece.eval_with_derivative(*p).map_err(err)?;
            *p = v;
            *d *= dv;
        }
        for c in self.working.corners.iter_mut() {
            *c = piece.eval(*c).map_err(err)?;
        }
        for z in self.images.iter_mut() {
            *z = piece.eval(*z).map_err(err)?;
        }
        if self.kind == DomainKind::Unbounded {
            self.anchor = piece.eval(self.anchor).map_err(err)?;
        }
        Ok(())
    }

    /// Replaces the working curve by the image circle of `piece`, which was
    /// solved on this boundary.
    fn circularize(&mut self, piece: &ConformalMapPiece) {
        let m = self.working.len();
        let (center, radius, sign, orientation) = match self.kind {
            DomainKind::Bounded => (Complex64::new(0.0, 0.0), 1.0, 1.0, Orientation::CounterClockwise),
            DomainKind::Unbounded => (piece.image_center(), piece.image_radius(), -1.0, Orientation::Clockwise),
        };
        let shift = parameter_shift(&piece.node_images(), center, sign);
        let corner_params: Vec<f64> = self
            .working
            .corners
            .iter()
            .map(|c| {
                let theta = sign * (piece.eval(*c).unwrap_or(*c) - center).arg();
                theta.rem_euclid(TAU)
            })
            .collect();
        for (xi, z) in self.xi.iter_mut().zip(self.images.iter_mut()) {
            *xi += trig_interpolate(&shift, *xi);
            *z = center + radius * Complex64::cis(sign * *xi);
        }
        self.working = SmoothedBoundary::circle(m, center, radius, orientation);
        self.working.corners = corner_params.iter().map(|t| center + radius * Complex64::cis(sign * t)).collect();
        if self.kind == DomainKind::Unbounded {
            self.anchor = center;
        }
    }
}

pub fn solve_workspace(ws: &ValidatedWorkspace, cfg: &KoebeConfig) -> Result<KoebeSolution, KoebeError> {
    solve_workspace_with(ws, cfg, &mut ())
}

pub fn solve_workspace_with(ws: &ValidatedWorkspace, cfg: &KoebeConfig, observer: &mut dyn KoebeObserver) -> Result<KoebeSolution, KoebeError> {
    let mut states = Vec::with_capacity(ws.obstacles().len() + 1);
    let outer = graded(ws.outer(), Orientation::CounterClockwise, cfg)?;
    states.push(State {
        kind: DomainKind::Bounded,
        xi: outer.nodes(),
        images: outer.points.clone(),
        working: outer.clone(),
        original: outer,
        anchor: ws.goal(),
    });
    for p in ws.obstacles() {
        let b = graded(p, Orientation::Clockwise, cfg)?;
        states.push(State {
            kind: DomainKind::Unbounded,
            xi: b.nodes(),
            images: b.points.clone(),
            working: b.clone(),
            original: b,
            anchor: p.interior_point(),
        });
    }

    let mut goal = ws.goal();
    let mut pieces = Vec::new();
    let mut history: Vec<IterationRecord> = Vec::new();
    // obstacles first, then the outer boundary
    let order: Vec<usize> = (1..states.len()).chain(std::iter::once(0)).collect();
    let single = states.len() == 1;

    for iteration in 1..=cfg.max_iterations {
        let before: Vec<Vec<Complex64>> = states.iter().map(|s| s.images.clone()).collect();
        for &k in &order {
            let base = if k == 0 { goal } else { states[k].anchor };
            let (piece, sys, sol) =
                ConformalMapPiece::solve(&states[k].working, base, states[k].kind).map_err(|source| KoebeError::Solver { boundary: k, source })?;
            observer.piece(iteration, k, &sys, &sol);
            for (j, s) in states.iter_mut().enumerate() {
                if j == k {
                    s.circularize(&piece);
                } else {
                    s.apply(&piece, k)?;
                }
            }
            goal = if k == 0 { Complex64::new(0.0, 0.0) } else { piece.eval(goal).map_err(|source| KoebeError::Solver { boundary: k, source })? };
            pieces.push(piece);
        }
        let residual = if single {
            0.0
        } else {
            states
                .iter()
                .zip(&before)
                .flat_map(|(s, b)| s.images.iter().zip(b).map(|(x, y)| (x - y).norm()))
                .fold(0.0, f64::max)
        };
        let mut circle_res: f64 = 0.0;
        for s in &states {
            circle_res = circle_res.max(circle_residual(&s.images)?.1);
        }
        let record = IterationRecord { iteration, residual, circle_residual: circle_res };
        if cfg.strict && iteration > 1 {
            if let Some(prev) = history.last() {
                if circle_res > prev.circle_residual && circle_res > cfg.tol {
                    return Err(KoebeError::NonMonotoneCircleResidual { iteration, previous: prev.circle_residual, current: circle_res });
                }
            }
        }
        observer.iteration(&record);
        history.push(record);
        if residual < cfg.tol {
            let mut circles = Vec::new();
            for (index, s) in states.iter().enumerate().skip(1) {
                let (circle, _) = circle_residual(&s.images)?;
                if circle.radius < 1e-10 {
                    return Err(KoebeError::DegenerateObstacleImage { index, radius: circle.radius });
                }
                circles.push(circle);
            }
            let boundaries = states
                .into_iter()
                .map(|s| TrackedBoundary { kind: s.kind, original: s.original, images: s.images })
                .collect();
            return Ok(KoebeSolution {
                map: ComposedMap { pieces, iterations: iteration, residual },
                sphere_world: SphereWorld { circles },
                boundaries,
                goal_image: goal,
                history,
            });
        }
    }
    Err(KoebeError::MaxIterationsExceeded { iterations: cfg.max_iterations, residual: history.last().map_or(f64::INFINITY, |r| r.residual) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_fit_exact_and_noisy() {
        let pts: Vec<Complex64> = (0..50).map(|k| Complex64::cis(k as f64 * 0.3)).collect();
        let (circle, dev) = circle_residual(&pts).unwrap();
        assert!(circle.center.norm() < 1e-14 && (circle.radius - 1.0).abs() < 1e-14 && dev < 1e-14);

        let center = c(0.2, 0.1);
        let noisy: Vec<Complex64> = (0..200)
            .map(|k| {
                let t = k as f64 * TAU / 200.0;
                let noise = 1e-8 * ((7.0 * t).sin() + (13.0 * t).cos()) / 2.0;
                center + (0.3 + noise) * Complex64::cis(t)
            })
            .collect();
        let (circle, dev) = circle_residual(&noisy).unwrap();
        assert!((circle.center - center).norm() < 1e-8);
        assert!(dev <= 2e-8, "{dev}");
    }

    #[test]
    fn circle_fit_rejects_lines_and_discriminates_squares() {
        let line: Vec<Complex64> = (0..10).map(|k| c(k as f64, 2.0 * k as f64)).collect();
        assert_eq!(circle_residual(&line).unwrap_err(), KoebeError::CollinearPoints);
        let sq = [c(1.0, 1.0), c(-1.0, 1.0), c(-1.0, -1.0), c(1.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(circle_residual(&sq).unwrap().1 > 0.1);
    }

    #[test]
    fn parameter_shift_of_rotated_circle() {
        let m = 16;
        let imgs: Vec<Complex64> = (0..m).map(|l| Complex64::cis(l as f64 * TAU / m as f64 + 3.0)).collect();
        let d = parameter_shift(&imgs, c(0.0, 0.0), 1.0);
        for v in d {
            assert!((v - (3.0 - TAU)).abs() < 1e-12 || (v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_world_margins() {
        let sw = SphereWorld { circles: vec![Circle { center: c(0.5, 0.0), radius: 0.2 }, Circle { center: c(-0.5, 0.0), radius: 0.3 }] };
        assert!((sw.min_margin() - 0.2).abs() < 1e-15);
        assert!(sw.is_valid());
        assert!(sw.contains(c(0.0, 0.0)) && !sw.contains(c(0.5, 0.1)));
    }
}
