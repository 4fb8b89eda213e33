//! Nyström solver for the boundary relation `Re[A f] = mu + c` on a single
//! smoothed boundary, and the resulting simply connected conformal maps.
//!
//! Bounded pieces use `A = gamma - z_c` on a counterclockwise curve and give
//! `T(z) = e^{-c} (z - z_c) exp((z - z_c) f(z))`, sending the curve to the
//! unit circle and `z_c` to 0 with `T'(z_c) = e^{-c} > 0`.
//!
//! Unbounded pieces use `A = 1` on a clockwise curve around a point `z_c`
//! enclosed by it and give `T(z) = b + (z - z_c) exp(f(z) - f(inf))`, which
//! maps the exterior of the curve onto the exterior of a circle centred at
//! `b` and satisfies `T(z) = z + O(1/z)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{spectral_derivative, SmoothedBoundary};
use crate::cauchy::{self, Contour};
use crate::geometry::{segment_distance, Orientation};

/// Vertex exclusion radius relative to the boundary diameter.
pub const VERTEX_EXCLUSION_FRACTION: f64 = 1e-6;
/// Points closer than this fraction of the diameter count as on the boundary.
const ON_BOUNDARY_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("base point lies on the boundary (distance {distance:e})")]
    BasePointOnBoundary { distance: f64 },
    #[error("base point is not in the admissible region for a {kind:?} piece")]
    BasePointMisplaced { kind: DomainKind },
    #[error("boundary has {got:?} orientation, {kind:?} pieces need {expected:?}")]
    WrongOrientation { kind: DomainKind, expected: Orientation, got: Orientation },
    #[error("kernel entry ({row}, {col}) is not finite")]
    NonFiniteKernel { row: usize, col: usize },
    #[error("linear system is singular or produced non-finite values")]
    SingularSystem,
    #[error("point ({re}, {im}) is outside the domain of the map")]
    PointOutsideDomain { re: f64, im: f64 },
    #[error("point is {distance:e} from a vertex; derivative accuracy is degraded")]
    EvaluationNearVertex { distance: f64 },
    #[error("derivative requested at a boundary node")]
    DerivativeOnBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Bounded,
    Unbounded,
}

impl DomainKind {
    pub fn orientation(self) -> Orientation {
        match self {
            DomainKind::Bounded => Orientation::CounterClockwise,
            DomainKind::Unbounded => Orientation::Clockwise,
        }
    }
}

/// A holomorphic map of the plane that can be evaluated with its derivative.
pub trait PlanarMap: Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64, SolverError>;
    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64), SolverError>;
}

/// Discretized boundary relation on one curve.
///
/// `r_hat` and `h_hat` act on node values; their diagonals are fixed by the
/// difference form so that `r_hat * 1 = -1` and `h_hat * 1 = 0` hold to
/// rounding. `mu_derivative` carries the removable-singularity limit of the
/// `H` kernel, which the trapezoidal rule needs on the diagonal.
#[derive(Debug, Clone)]
pub struct RhSystem {
    pub kind: DomainKind,
    pub base: Complex64,
    pub boundary: SmoothedBoundary,
    pub g: Vec<Complex64>,
    pub mu: Vec<f64>,
    pub mu_derivative: Vec<f64>,
    pub r_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
}

/// Raw kernel values `N(s_i, t_j)`, `M(s_i, t_j)` for `i != j` (diagonal 0).
pub fn kernel_entries(b: &SmoothedBoundary, g: &[Complex64]) -> Result<(DMatrix<f64>, DMatrix<f64>), SolverError> {
    let m = b.len();
    let mut n = DMatrix::zeros(m, m);
    let mut mm = DMatrix::zeros(m, m);
    // column-major storage: chunk j is column j
    crate::par_chunk_pairs(n.as_mut_slice(), mm.as_mut_slice(), m, |j, nj, mj| {
        let a = b.derivatives[j] / g[j];
        for i in 0..m {
            if i == j {
                continue;
            }
            let k = g[i] * a / (b.points[j] - b.points[i]);
            if !(k.re.is_finite() && k.im.is_finite()) {
                return Err(SolverError::NonFiniteKernel { row: i, col: j });
            }
            nj[i] = k.im / PI;
            mj[i] = k.re / PI;
        }
        Ok(())
    })?;
    Ok((n, mm))
}

/// Builds the Nyström matrices for the piece of the given kind.
pub fn assemble_system(b: &SmoothedBoundary, z_c: Complex64, kind: DomainKind) -> Result<RhSystem, SolverError> {
    if b.derivatives.iter().any(|d| !(d.re.is_finite() && d.im.is_finite())) {
        let col = b.derivatives.iter().position(|d| !(d.re.is_finite() && d.im.is_finite())).unwrap_or(0);
        return Err(SolverError::NonFiniteKernel { row: col, col });
    }
    let got = b.orientation();
    if got != kind.orientation() {
        return Err(SolverError::WrongOrientation { kind, expected: kind.orientation(), got });
    }
    let distance = b.min_distance(z_c);
    if distance <= ON_BOUNDARY_FRACTION * b.diameter() {
        return Err(SolverError::BasePointOnBoundary { distance });
    }
    let w = b.winding_number(z_c);
    let admissible = match kind {
        DomainKind::Bounded => w > 0.5,
        DomainKind::Unbounded => w < -0.5,
    };
    if !admissible {
        return Err(SolverError::BasePointMisplaced { kind });
    }

    let m = b.len();
    let h = b.step();
    let g: Vec<Complex64> = match kind {
        DomainKind::Bounded => b.points.iter().map(|p| p - z_c).collect(),
        DomainKind::Unbounded => vec![Complex64::new(1.0, 0.0); m],
    };
    let mu: Vec<f64> = b.points.iter().map(|p| -(p - z_c).norm().ln()).collect();
    let mu_derivative: Vec<f64> = b
        .points
        .iter()
        .zip(&b.derivatives)
        .map(|(p, d)| -(d / (p - z_c)).re)
        .collect();

    let (mut r_hat, mut h_hat) = kernel_entries(b, &g)?;
    r_hat *= h;
    h_hat *= h;
    let (rs, hs) = (r_hat.column_sum(), h_hat.column_sum());
    for i in 0..m {
        r_hat[(i, i)] = -1.0 - rs[i];
        h_hat[(i, i)] = -hs[i];
    }
    Ok(RhSystem { kind, base: z_c, boundary: b.clone(), g, mu, mu_derivative, r_hat, h_hat })
}

/// Solution of the discretized relation.
#[derive(Debug, Clone)]
pub struct RhSolution {
    pub upsilon: Vec<f64>,
    /// Constant used to build the map.
    pub c: f64,
    /// Mean of the pointwise constant formula `[H upsilon - (I - R) mu] / 2`.
    pub c_pointwise: f64,
    /// `|| (I - R) upsilon - rhs ||_inf`.
    pub residual: f64,
}

impl RhSystem {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Right-hand side `-(H mu)` including the diagonal limit.
    pub fn rhs(&self) -> DVector<f64> {
        let h = self.boundary.step();
        let mu = DVector::from_column_slice(&self.mu);
        let mut r = &self.h_hat * mu;
        for (ri, d) in r.iter_mut().zip(&self.mu_derivative) {
            *ri = -(*ri + h / PI * d);
        }
        r
    }

    /// `I - R`.
    pub fn operator(&self) -> DMatrix<f64> {
        DMatrix::identity(self.len(), self.len()) - &self.r_hat
    }

    /// Pointwise constant from `[H upsilon - (I - R) mu] / 2`, averaged over nodes.
    pub fn pointwise_constant(&self, upsilon: &[f64]) -> f64 {
        let h = self.boundary.step();
        let ups = DVector::from_column_slice(upsilon);
        let mu = DVector::from_column_slice(&self.mu);
        let du = spectral_derivative(upsilon);
        let hu = &self.h_hat * ups;
        let imu = &mu - &self.r_hat * &mu;
        let s: f64 = (0..self.len()).map(|i| (hu[i] + h / PI * du[i] - imu[i]) / 2.0).sum();
        s / self.len() as f64
    }

    pub fn debug_json(&self, sol: &RhSolution) -> serde_json::Value {
        let rows = |a: &DMatrix<f64>| -> Vec<Vec<f64>> { (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect() };
        serde_json::json!({
            "kind": self.kind,
            "base": [self.base.re, self.base.im],
            "mu": self.mu,
            "r_hat": rows(&self.r_hat),
            "h_hat": rows(&self.h_hat),
            "upsilon": sol.upsilon,
            "c": sol.c,
            "residual": sol.residual,
        })
    }
}

fn weights(b: &SmoothedBoundary) -> Vec<Complex64> {
    let h = b.step();
    b.derivatives.iter().map(|d| d * h).collect()
}

/// Partial-pivoting LU solve; a singular matrix shows up as non-finite entries.
fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    use faer::linalg::solvers::Solve;
    let fa = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let fb = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = fa.partial_piv_lu().solve(&fb);
    DVector::from_fn(b.len(), |i, _| x[(i, 0)])
}

/// Solves `(I - R) upsilon = -H mu` by dense LU and fixes the constant.
///
/// For bounded pieces the constant and the additive constant of `upsilon`
/// are chosen so that `(z - z_c) f(z)` vanishes at `z_c`; for unbounded
/// pieces the pointwise formula is used.
pub fn solve_rh(sys: &RhSystem) -> Result<RhSolution, SolverError> {
    let a = sys.operator();
    let rhs = sys.rhs();
    let x = dense_solve(&a, &rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularSystem);
    }
    let residual = (&a * &x - &rhs).amax();
    let mut upsilon: Vec<f64> = x.iter().copied().collect();
    let c_pointwise = sys.pointwise_constant(&upsilon);
    let c = match sys.kind {
        DomainKind::Bounded => {
            let w = weights(&sys.boundary);
            let vals: Vec<Complex64> = sys.mu.iter().zip(&upsilon).map(|(&m, &u)| Complex64::new(m, u)).collect();
            let s = cauchy::cauchy_sum(Contour { points: &sys.boundary.points, weights: &w }, &vals, sys.base);
            for u in &mut upsilon {
                *u -= s.im;
            }
            -s.re
        }
        DomainKind::Unbounded => c_pointwise,
    };
    Ok(RhSolution { upsilon, c, c_pointwise, residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PieceData {
    kind: DomainKind,
    base: Complex64,
    constant: f64,
    boundary: SmoothedBoundary,
    values: Vec<Complex64>,
    f_infinity: Complex64,
    offset: Complex64,
    image_radius: f64,
}

/// One simply connected conformal map, immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PieceData", into = "PieceData")]
pub struct ConformalMapPiece {
    data: PieceData,
    weights: Vec<Complex64>,
    diameter: f64,
    /// Longest chord between consecutive nodes.
    max_chord: f64,
}

impl TryFrom<PieceData> for ConformalMapPiece {
    type Error = String;

    fn try_from(data: PieceData) -> Result<Self, String> {
        let m = data.boundary.points.len();
        if m < 4 || data.boundary.derivatives.len() != m || data.values.len() != m {
            return Err(format!("piece arrays have inconsistent lengths ({m} nodes)"));
        }
        let weights = weights(&data.boundary);
        let diameter = data.boundary.diameter();
        let p = &data.boundary.points;
        let max_chord = (0..m).map(|i| (p[(i + 1) % m] - p[i]).norm()).fold(0.0, f64::max);
        Ok(ConformalMapPiece { data, weights, diameter, max_chord })
    }
}

impl From<ConformalMapPiece> for PieceData {
    fn from(p: ConformalMapPiece) -> Self {
        p.data
    }
}

impl ConformalMapPiece {
    /// Assembles and solves the piece for boundary `b` and base point `z_c`.
    pub fn solve(b: &SmoothedBoundary, z_c: Complex64, kind: DomainKind) -> Result<(Self, RhSystem, RhSolution), SolverError> {
        let sys = assemble_system(b, z_c, kind)?;
        let sol = solve_rh(&sys)?;
        let piece = Self::from_solution(&sys, &sol);
        Ok((piece, sys, sol))
    }

    pub fn from_solution(sys: &RhSystem, sol: &RhSolution) -> Self {
        let f: Vec<Complex64> = sys
            .g
            .iter()
            .zip(&sys.mu)
            .zip(&sol.upsilon)
            .map(|((a, &m), &u)| Complex64::new(m + sol.c, u) / a)
            .collect();
        let data = match sys.kind {
            DomainKind::Bounded => PieceData {
                kind: sys.kind,
                base: sys.base,
                constant: sol.c,
                boundary: sys.boundary.clone(),
                values: f,
                f_infinity: Complex64::new(0.0, 0.0),
                offset: Complex64::new(0.0, 0.0),
                image_radius: 1.0,
            },
            DomainKind::Unbounded => {
                let w = weights(&sys.boundary);
                let contour = Contour { points: &sys.boundary.points, weights: &w };
                let f_inf = -cauchy::cauchy_sum(contour, &f, sys.base);
                let g: Vec<Complex64> = f.iter().map(|v| v - f_inf).collect();
                let g1 = -w.iter().zip(&g).map(|(w, v)| w * v).sum::<Complex64>() / Complex64::new(0.0, 2.0 * PI);
                PieceData {
                    kind: sys.kind,
                    base: sys.base,
                    constant: sol.c,
                    boundary: sys.boundary.clone(),
                    values: g,
                    f_infinity: f_inf,
                    offset: sys.base - g1,
                    image_radius: (sol.c - f_inf.re).exp(),
                }
            }
        };
        data.try_into().expect("solver output has consistent lengths")
    }

    pub fn kind(&self) -> DomainKind {
        self.data.kind
    }

    pub fn base(&self) -> Complex64 {
        self.data.base
    }

    pub fn constant(&self) -> f64 {
        self.data.constant
    }

    pub fn boundary(&self) -> &SmoothedBoundary {
        &self.data.boundary
    }

    /// Boundary values of `f` (bounded) or `f - f(inf)` (unbounded).
    pub fn values(&self) -> &[Complex64] {
        &self.data.values
    }

    pub fn f_infinity(&self) -> Complex64 {
        self.data.f_infinity
    }

    /// Center of the image circle.
    pub fn image_center(&self) -> Complex64 {
        self.data.offset
    }

    pub fn image_radius(&self) -> f64 {
        self.data.image_radius
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    fn contour(&self) -> Contour<'_> {
        Contour { points: &self.data.boundary.points, weights: &self.weights }
    }

    /// Image of boundary node `j`, computed from the node value directly.
    pub fn node_image(&self, j: usize) -> Complex64 {
        let d = &self.data;
        let a = d.boundary.points[j] - d.base;
        match d.kind {
            DomainKind::Bounded => (-d.constant).exp() * a * (a * d.values[j]).exp(),
            DomainKind::Unbounded => d.offset + a * d.values[j].exp(),
        }
    }

    pub fn node_images(&self) -> Vec<Complex64> {
        (0..self.data.boundary.len()).map(|j| self.node_image(j)).collect()
    }

    /// Distance from `z` to the nearest corner of the boundary.
    pub fn vertex_distance(&self, z: Complex64) -> f64 {
        self.data.boundary.corners.iter().map(|c| (c - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Reports when `z` lies inside the vertex exclusion radius.
    pub fn vertex_warning(&self, z: Complex64) -> Option<SolverError> {
        let distance = self.vertex_distance(z);
        (distance < VERTEX_EXCLUSION_FRACTION * self.diameter).then_some(SolverError::EvaluationNearVertex { distance })
    }

    /// Checks that `z` lies in the closed domain of the piece.
    fn locate(&self, z: Complex64) -> Result<(), SolverError> {
        let threshold = ON_BOUNDARY_FRACTION * self.diameter;
        // the polyline is within max_chord / 2 of the nearest node
        let node_distance = self.data.boundary.min_distance(z);
        if node_distance - 0.5 * self.max_chord <= threshold && self.polyline_distance(z) <= threshold {
            return Ok(());
        }
        let inside = self.contour().encloses(z);
        let ok = match self.data.kind {
            DomainKind::Bounded => inside,
            DomainKind::Unbounded => !inside,
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::PointOutsideDomain { re: z.re, im: z.im })
        }
    }

    fn polyline_distance(&self, z: Complex64) -> f64 {
        let p = &self.data.boundary.points;
        (0..p.len()).map(|i| segment_distance(z, p[i], p[(i + 1) % p.len()])).fold(f64::INFINITY, f64::min)
    }

    // The boundary subtraction form is used at every distance: the plain
    // trapezoidal Cauchy sum loses accuracy geometrically as z nears the curve.
    fn f_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        match self.data.kind {
            DomainKind::Bounded => cauchy::interior(self.contour(), &self.data.values, z, true),
            DomainKind::Unbounded => cauchy::exterior(self.contour(), &self.data.values, self.data.base, z, true),
        }
    }

    fn assemble(&self, z: Complex64, f: Complex64, df: Complex64) -> (Complex64, Complex64) {
        let d = &self.data;
        let a = z - d.base;
        match d.kind {
            DomainKind::Bounded => {
                let e = (-d.constant).exp() * (a * f).exp();
                (a * e, e * (1.0 + a * (f + a * df)))
            }
            DomainKind::Unbounded => {
                let e = f.exp();
                (d.offset + a * e, e * (1.0 + a * df))
            }
        }
    }

    pub fn evaluate_map(&self, z: Complex64) -> Result<Complex64, SolverError> {
        self.eval(z)
    }

    pub fn map_derivative(&self, z: Complex64) -> Result<Complex64, SolverError> {
        self.eval_with_derivative(z).map(|(_, d)| d)
    }
}

impl PlanarMap for ConformalMapPiece {
    fn eval(&self, z: Complex64) -> Result<Complex64, SolverError> {
        if let Some(j) = self.contour().node_index(z) {
            return Ok(self.node_image(j));
        }
        self.locate(z)?;
        let (f, df) = self.f_and_derivative(z);
        Ok(self.assemble(z, f, df).0)
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64), SolverError> {
        if self.contour().node_index(z).is_some() {
            return Err(SolverError::DerivativeOnBoundary);
        }
        self.locate(z)?;
        let (f, df) = self.f_and_derivative(z);
        Ok(self.assemble(z, f, df))
    }
}
