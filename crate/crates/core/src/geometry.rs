//! Polygonal workspaces: validation, membership tests and corner angles.
//!
//! Points are complex numbers `x + iy`. A workspace is an outer polygon
//! with a finite set of pairwise disjoint polygonal obstacles strictly inside
//! it, plus a goal point in the open free space.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("consecutive vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersectingPolygon(usize, usize),
    #[error("angle at vertex {index} is degenerate (alpha = {alpha})")]
    DegenerateAngle { index: usize, alpha: f64 },
    #[error("obstacles {0} and {1} overlap")]
    OverlappingObstacles(usize, usize),
    #[error("obstacle {0} is not strictly inside the outer boundary")]
    ObstacleOutsideOuter(usize),
    #[error("goal is not in the open free space")]
    GoalOutsideFreeSpace,
    #[error("goal coincides with a polygon vertex")]
    GoalOnVertex,
    #[error("half-space normal must be non-zero and finite")]
    DegenerateNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
}

/// A simple polygon, stored in the vertex order it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Complex64>,
}

impl Polygon {
    /// Builds a polygon and checks that it is simple with non-degenerate corners.
    pub fn new(vertices: Vec<Complex64>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(GeometryError::DuplicateVertex(i, j));
            }
        }
        let poly = Polygon { vertices };
        poly.check_simple()?;
        poly.interior_angles()?;
        Ok(poly)
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(points.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `k` runs from vertex `k` to vertex `k + 1 (mod n)`.
    pub fn edge(&self, k: usize) -> (Complex64, Complex64) {
        let n = self.vertices.len();
        (self.vertices[k % n], self.vertices[(k + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        (0..self.vertices.len()).map(move |k| self.edge(k))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a.re * b.im - b.re * a.im)
            .sum::<f64>()
    }

    pub fn orientation(&self) -> Orientation {
        if self.signed_area() > 0.0 {
            Orientation::CounterClockwise
        } else {
            Orientation::Clockwise
        }
    }

    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon { vertices: v }
    }

    /// Same polygon traversed counterclockwise.
    pub fn to_ccw(&self) -> Polygon {
        match self.orientation() {
            Orientation::CounterClockwise => self.clone(),
            Orientation::Clockwise => self.reversed(),
        }
    }

    pub fn to_cw(&self) -> Polygon {
        match self.orientation() {
            Orientation::Clockwise => self.clone(),
            Orientation::CounterClockwise => self.reversed(),
        }
    }

    pub fn bounding_box(&self) -> (Complex64, Complex64) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.re = lo.re.min(v.re);
            lo.im = lo.im.min(v.im);
            hi.re = hi.re.max(v.re);
            hi.im = hi.im.max(v.im);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Complex64) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Crossing-number test; points on the boundary may land on either side.
    pub fn contains(&self, p: Complex64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.im > p.im) != (b.im > p.im) {
                let x = a.re + (p.im - a.im) * (b.re - a.re) / (b.im - a.im);
                if p.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// An interior point far from the boundary: the best point of a
    /// 64 x 64 grid over the bounding box, refined by a shrinking local search.
    pub fn interior_point(&self) -> Complex64 {
        let (lo, hi) = self.bounding_box();
        let n = 64;
        let mut best = (f64::NEG_INFINITY, (lo + hi) / 2.0);
        for i in 0..n {
            for j in 0..n {
                let p = Complex64::new(
                    lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / n as f64,
                    lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / n as f64,
                );
                if self.contains(p) {
                    let d = self.boundary_distance(p);
                    if d > best.0 {
                        best = (d, p);
                    }
                }
            }
        }
        let mut step = (hi - lo).norm() / n as f64;
        while step > 1e-6 * (hi - lo).norm() {
            let mut moved = false;
            for k in 0..8 {
                let p = best.1 + Complex64::from_polar(step, k as f64 * std::f64::consts::FRAC_PI_4);
                if self.contains(p) {
                    let d = self.boundary_distance(p);
                    if d > best.0 {
                        best = (d, p);
                        moved = true;
                    }
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        best.1
    }

    /// Corner angles in units of pi, measured on the left of the traversal.
    ///
    /// For a counterclockwise polygon these are the interior angles and
    /// `sum(1 - alpha_k) = 2`.
    pub fn interior_angles(&self) -> Result<Vec<f64>, GeometryError> {
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let z = self.vertices[k];
                let prev = self.vertices[(k + n - 1) % n];
                let next = self.vertices[(k + 1) % n];
                let mut a = ((prev - z) / (next - z)).arg();
                if a < 0.0 {
                    a += 2.0 * PI;
                }
                let alpha = a / PI;
                if alpha <= 0.0 || alpha >= 2.0 || !alpha.is_finite() {
                    Err(GeometryError::DegenerateAngle { index: k, alpha })
                } else {
                    Ok(alpha)
                }
            })
            .collect()
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = self.edge(j);
                if adjacent {
                    // Adjacent edges may only share their common vertex; a
                    // fold-back onto the previous edge is an overlap.
                    let shared = if j == i + 1 { b } else { a };
                    let (other_ab, other_cd) = if j == i + 1 { (a, d) } else { (b, c) };
                    if collinear_overlap(shared, other_ab, other_cd) {
                        return Err(GeometryError::SelfIntersectingPolygon(i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Err(GeometryError::SelfIntersectingPolygon(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Interior corner angles of `p` in units of pi.
pub fn interior_angles(p: &Polygon) -> Result<Vec<f64>, GeometryError> {
    p.interior_angles()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn collinear_overlap(shared: Complex64, p: Complex64, q: Complex64) -> bool {
    let u = p - shared;
    let v = q - shared;
    cross(u, v).abs() <= 1e-14 * u.norm() * v.norm() && (u.re * v.re + u.im * v.im) > 0.0
}

fn on_segment(p: Complex64, a: Complex64, b: Complex64) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, a, b))
        || (d2 == 0.0 && on_segment(d, a, b))
        || (d3 == 0.0 && on_segment(a, c, d))
        || (d4 == 0.0 && on_segment(b, c, d))
}

pub fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

/// Open half-space `{q : (q - anchor) . normal < 0}` with unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    anchor: Complex64,
    normal: Complex64,
}

impl HalfSpace {
    /// The normal is rescaled to unit length.
    pub fn new(anchor: Complex64, normal: Complex64) -> Result<Self, GeometryError> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(GeometryError::DegenerateNormal);
        }
        Ok(HalfSpace { anchor, normal: normal / len })
    }

    pub fn anchor(&self) -> Complex64 {
        self.anchor
    }

    pub fn normal(&self) -> Complex64 {
        self.normal
    }

    /// Outward half-spaces of the edges of a convex counterclockwise polygon.
    pub fn from_convex_polygon(p: &Polygon) -> Vec<HalfSpace> {
        p.to_ccw()
            .edges()
            .map(|(a, b)| {
                let t = b - a;
                HalfSpace { anchor: a, normal: Complex64::new(t.im, -t.re) / t.norm() }
            })
            .collect()
    }
}

/// `(q - q_i) . n_i`; negative inside the open half-space.
pub fn halfspace_value(q: Complex64, h: &HalfSpace) -> f64 {
    let d = q - h.anchor;
    d.re * h.normal.re + d.im * h.normal.im
}

/// Workspace as read from input, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalWorkspace {
    pub outer: Vec<[f64; 2]>,
    #[serde(default)]
    pub obstacles: Vec<Vec<[f64; 2]>>,
    pub goal: [f64; 2],
}

impl PolygonalWorkspace {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("workspace serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeSpaceClass {
    Interior,
    Boundary,
    Exterior,
}

/// A workspace whose invariants have been checked.
///
/// The outer polygon and all obstacles are stored counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedWorkspace {
    outer: Polygon,
    obstacles: Vec<Polygon>,
    goal: Complex64,
    vertices: Vec<Complex64>,
    boundary_tol: f64,
}

pub fn validate_workspace(ws: &PolygonalWorkspace) -> Result<ValidatedWorkspace, GeometryError> {
    let outer = Polygon::from_xy(&ws.outer)?.to_ccw();
    let obstacles = ws
        .obstacles
        .iter()
        .map(|o| Polygon::from_xy(o).map(|p| p.to_ccw()))
        .collect::<Result<Vec<_>, _>>()?;
    let goal = Complex64::new(ws.goal[0], ws.goal[1]);
    ValidatedWorkspace::new(outer, obstacles, goal)
}

impl ValidatedWorkspace {
    pub fn new(outer: Polygon, obstacles: Vec<Polygon>, goal: Complex64) -> Result<Self, GeometryError> {
        let outer = outer.to_ccw();
        let obstacles: Vec<Polygon> = obstacles.iter().map(Polygon::to_ccw).collect();
        let (lo, hi) = outer.bounding_box();
        let boundary_tol = 1e-9 * (hi - lo).norm();

        for (i, ob) in obstacles.iter().enumerate() {
            let inside = ob.vertices().iter().all(|v| outer.contains(*v) && outer.boundary_distance(*v) > boundary_tol);
            if !inside || polygons_touch(&outer, ob) {
                return Err(GeometryError::ObstacleOutsideOuter(i));
            }
        }
        for i in 0..obstacles.len() {
            for j in i + 1..obstacles.len() {
                let (a, b) = (&obstacles[i], &obstacles[j]);
                if polygons_touch(a, b) || a.contains(b.vertices()[0]) || b.contains(a.vertices()[0]) {
                    return Err(GeometryError::OverlappingObstacles(i, j));
                }
            }
        }

        let mut vertices: Vec<Complex64> = outer.vertices().to_vec();
        for ob in &obstacles {
            vertices.extend_from_slice(ob.vertices());
        }
        if vertices.iter().any(|v| (*v - goal).norm() <= boundary_tol) {
            return Err(GeometryError::GoalOnVertex);
        }

        let ws = ValidatedWorkspace { outer, obstacles, goal, vertices, boundary_tol };
        if ws.classify(goal) != FreeSpaceClass::Interior {
            return Err(GeometryError::GoalOutsideFreeSpace);
        }
        Ok(ws)
    }

    pub fn outer(&self) -> &Polygon {
        &self.outer
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn goal(&self) -> Complex64 {
        self.goal
    }

    /// Vertex set of all boundary polygons.
    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    /// Boundary classification tolerance (scale invariant).
    pub fn boundary_tolerance(&self) -> f64 {
        self.boundary_tol
    }

    pub fn diameter(&self) -> f64 {
        self.outer.diameter()
    }

    /// Back to the plain input representation.
    pub fn to_raw(&self) -> PolygonalWorkspace {
        let xy = |p: &Polygon| p.vertices().iter().map(|v| [v.re, v.im]).collect::<Vec<_>>();
        PolygonalWorkspace {
            outer: xy(&self.outer),
            obstacles: self.obstacles.iter().map(xy).collect(),
            goal: [self.goal.re, self.goal.im],
        }
    }

    pub fn classify(&self, q: Complex64) -> FreeSpaceClass {
        if self.boundary_distance(q) <= self.boundary_tol {
            return FreeSpaceClass::Boundary;
        }
        if !self.outer.contains(q) || self.obstacles.iter().any(|o| o.contains(q)) {
            FreeSpaceClass::Exterior
        } else {
            FreeSpaceClass::Interior
        }
    }

    /// Distance from `q` to the nearest point of any boundary polygon.
    pub fn boundary_distance(&self, q: Complex64) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.boundary_distance(q))
            .fold(self.outer.boundary_distance(q), f64::min)
    }

    pub fn vertex_distance(&self, q: Complex64) -> f64 {
        self.vertices.iter().map(|v| (v - q).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Interior / boundary / exterior classification of `q`.
pub fn point_in_free_space(ws: &ValidatedWorkspace, q: Complex64) -> FreeSpaceClass {
    ws.classify(q)
}

fn polygons_touch(a: &Polygon, b: &Polygon) -> bool {
    a.edges().any(|(p, q)| b.edges().any(|(r, s)| segments_intersect(p, q, r, s)))
}
