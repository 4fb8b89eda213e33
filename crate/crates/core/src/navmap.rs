//! The finished workspace-to-sphere-world map as one Cauchy integral.
//!
//! The final map is holomorphic on the free space and continuous up to the
//! boundary, so it is the Cauchy integral of its boundary values over the
//! whole boundary (outer polygon counterclockwise, obstacles clockwise). The
//! boundary values are the tracked images of the graded polygon nodes. This
//! replaces the long chain of pieces with a single barycentric sum per
//! evaluation. A constant shift makes the goal land exactly on its image.
//!
//! Away from the boundary the sum is replaced by Taylor patches on a
//! quadtree of square cells, built on first use. Whether a point is served
//! by a patch depends only on the point, so evaluations do not depend on
//! the order of earlier calls. A cell of half-diagonal
//! `rho` qualifies when its centre is at least `3 rho` from the boundary;
//! the coefficients come from a discrete Fourier transform of the direct sum
//! on the circle of radius `2 rho`, so aliasing is below `(2/3)^64` and
//! truncation below `2^-48` relative to the size of the map.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::cauchy::{self, Contour};
use crate::geometry::{FreeSpaceClass, ValidatedWorkspace};
use crate::koebe::{Circle, KoebeSolution, SphereWorld};
use crate::rhsolver::{PlanarMap, SolverError, VERTEX_EXCLUSION_FRACTION};

const PATCH_SAMPLES: usize = 64;
const PATCH_TERMS: usize = 48;
const PATCH_LEVELS: u32 = 6;
const ROOT_CELLS: f64 = 32.0;

#[derive(Debug)]
struct Patch {
    center: Complex64,
    radius: f64,
    /// `b_n = a_n radius^n` for the Taylor coefficients `a_n` at `center`.
    coeffs: Vec<Complex64>,
}

impl Patch {
    fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let t = (z - self.center) / self.radius;
        let mut w = Complex64::new(0.0, 0.0);
        let mut dw = Complex64::new(0.0, 0.0);
        for (n, b) in self.coeffs.iter().enumerate().rev() {
            w = w * t + b;
            if n > 0 {
                dw = dw * t + b * n as f64;
            }
        }
        (w, dw / self.radius)
    }
}

type CellKey = (u32, i64, i64);

#[derive(Debug, Default)]
struct PatchCache {
    cells: RwLock<HashMap<CellKey, Option<Arc<Patch>>>>,
}

#[derive(Debug)]
pub struct NavigationMap {
    workspace: ValidatedWorkspace,
    sphere_world: SphereWorld,
    goal_image: Complex64,
    points: Vec<Complex64>,
    weights: Vec<Complex64>,
    values: Vec<Complex64>,
    origin: Complex64,
    root_side: f64,
    /// Subtracted from every value so the goal maps exactly onto its image.
    goal_offset: Complex64,
    patches: PatchCache,
}

impl Clone for NavigationMap {
    /// The clone starts with an empty patch cache.
    fn clone(&self) -> Self {
        NavigationMap {
            workspace: self.workspace.clone(),
            sphere_world: self.sphere_world.clone(),
            goal_image: self.goal_image,
            points: self.points.clone(),
            weights: self.weights.clone(),
            values: self.values.clone(),
            origin: self.origin,
            root_side: self.root_side,
            goal_offset: self.goal_offset,
            patches: PatchCache::default(),
        }
    }
}

impl NavigationMap {
    pub fn new(workspace: &ValidatedWorkspace, solution: &KoebeSolution) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut values = Vec::new();
        for b in &solution.boundaries {
            let h = b.original.step();
            points.extend_from_slice(&b.original.points);
            weights.extend(b.original.derivatives.iter().map(|d| d * h));
            values.extend_from_slice(&b.images);
        }
        let (lo, hi) = workspace.outer().bounding_box();
        let mut map = NavigationMap {
            workspace: workspace.clone(),
            sphere_world: solution.sphere_world.clone(),
            goal_image: solution.goal_image,
            points,
            weights,
            values,
            origin: lo,
            root_side: (hi.re - lo.re).max(hi.im - lo.im) / ROOT_CELLS,
            goal_offset: Complex64::new(0.0, 0.0),
            patches: PatchCache::default(),
        };
        // the quadrature leaves T(goal) off its image by the discretization error
        map.goal_offset = map.eval_interior(workspace.goal()).0 - solution.goal_image;
        map
    }

    /// Map and derivative by the barycentric boundary sum, bypassing the
    /// patch cache.
    pub fn eval_direct(&self, z: Complex64) -> (Complex64, Complex64) {
        let (w, d) = self.cauchy_sum(z);
        (w - self.goal_offset, d)
    }

    fn cauchy_sum(&self, z: Complex64) -> (Complex64, Complex64) {
        cauchy::interior(self.contour(), &self.values, z, true)
    }

    fn cell(&self, key: CellKey) -> (Complex64, f64) {
        let (level, i, j) = key;
        let side = self.root_side / f64::from(1u32 << level);
        let center = self.origin + Complex64::new((i as f64 + 0.5) * side, (j as f64 + 0.5) * side);
        (center, side * std::f64::consts::FRAC_1_SQRT_2)
    }

    fn qualifies(&self, key: CellKey) -> bool {
        let (center, rho) = self.cell(key);
        self.workspace.classify(center) == FreeSpaceClass::Interior && self.workspace.boundary_distance(center) >= 3.0 * rho
    }

    fn build_patch(&self, key: CellKey) -> Patch {
        let (center, rho) = self.cell(key);
        let radius = 2.0 * rho;
        let samples: Vec<Complex64> =
            (0..PATCH_SAMPLES).map(|l| self.cauchy_sum(center + radius * Complex64::cis(TAU * l as f64 / PATCH_SAMPLES as f64)).0).collect();
        let coeffs = (0..PATCH_TERMS)
            .map(|n| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(l, v)| v * Complex64::cis(-TAU * ((n * l) % PATCH_SAMPLES) as f64 / PATCH_SAMPLES as f64))
                    .sum::<Complex64>()
                    / PATCH_SAMPLES as f64
            })
            .collect();
        Patch { center, radius, coeffs }
    }

    /// Patch of the coarsest qualifying cell containing `z`.
    fn patch_for(&self, z: Complex64) -> Option<Arc<Patch>> {
        let rel = z - self.origin;
        for level in 0..=PATCH_LEVELS {
            let side = self.root_side / f64::from(1u32 << level);
            let key = (level, (rel.re / side).floor() as i64, (rel.im / side).floor() as i64);
            let cached = self.patches.cells.read().expect("patch cache lock").get(&key).cloned();
            match cached {
                Some(Some(patch)) => return Some(patch),
                Some(None) => continue,
                None => {}
            }
            if !self.qualifies(key) {
                self.patches.cells.write().expect("patch cache lock").insert(key, None);
                continue;
            }
            let built = Arc::new(self.build_patch(key));
            return self.patches.cells.write().expect("patch cache lock").entry(key).or_insert(Some(built)).clone();
        }
        None
    }

    fn eval_interior(&self, z: Complex64) -> (Complex64, Complex64) {
        let (w, d) = match self.patch_for(z) {
            Some(p) => p.eval(z),
            None => self.cauchy_sum(z),
        };
        (w - self.goal_offset, d)
    }

    pub fn workspace(&self) -> &ValidatedWorkspace {
        &self.workspace
    }

    pub fn sphere_world(&self) -> &SphereWorld {
        &self.sphere_world
    }

    pub fn goal_image(&self) -> Complex64 {
        self.goal_image
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    fn contour(&self) -> Contour<'_> {
        Contour { points: &self.points, weights: &self.weights }
    }

    /// Image circle of the boundary nearest to `z`; `None` for the outer boundary.
    fn nearest_circle(&self, z: Complex64) -> Option<Circle> {
        let mut best = (self.workspace.outer().boundary_distance(z), None);
        for (o, c) in self.workspace.obstacles().iter().zip(&self.sphere_world.circles) {
            let d = o.boundary_distance(z);
            if d < best.0 {
                best = (d, Some(*c));
            }
        }
        best.1
    }

    pub fn vertex_warning(&self, z: Complex64) -> Option<SolverError> {
        let distance = self.workspace.vertex_distance(z);
        (distance < VERTEX_EXCLUSION_FRACTION * self.workspace.diameter()).then_some(SolverError::EvaluationNearVertex { distance })
    }
}

impl PlanarMap for NavigationMap {
    /// Boundary points are sent onto their image circle exactly.
    fn eval(&self, z: Complex64) -> Result<Complex64, SolverError> {
        match self.workspace.classify(z) {
            FreeSpaceClass::Exterior => Err(SolverError::PointOutsideDomain { re: z.re, im: z.im }),
            FreeSpaceClass::Interior => Ok(self.eval_interior(z).0),
            FreeSpaceClass::Boundary => {
                let w = self.eval_direct(z).0;
                let circle = self.nearest_circle(z).unwrap_or(Circle { center: Complex64::new(0.0, 0.0), radius: 1.0 });
                let dir = w - circle.center;
                Ok(circle.center + circle.radius * dir / dir.norm())
            }
        }
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64), SolverError> {
        match self.workspace.classify(z) {
            FreeSpaceClass::Exterior => Err(SolverError::PointOutsideDomain { re: z.re, im: z.im }),
            FreeSpaceClass::Interior => Ok(self.eval_interior(z)),
            FreeSpaceClass::Boundary => {
                let (w, d) = self.eval_direct(z);
                if d.re.is_finite() && d.im.is_finite() {
                    Ok((w, d))
                } else {
                    Err(SolverError::DerivativeOnBoundary)
                }
            }
        }
    }
}
