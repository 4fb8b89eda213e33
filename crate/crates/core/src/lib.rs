//! Conformal navigation transformations for polygonal workspaces.
//!
//! A polygonal workspace with polygonal obstacles is mapped conformally onto
//! a sphere world (the unit disk with disjoint circular holes). The
//! Koditschek-Rimon navigation function on the sphere world is pulled back
//! through the map and drives a kinematic robot to the goal.

pub mod boundary;
pub mod cauchy;
pub mod geometry;
pub mod io;
pub mod koebe;
pub mod navfield;
pub mod navmap;
pub mod render;
pub mod rhsolver;
pub mod simulator;

pub use boundary::{BoundaryParametrization, SmoothedBoundary};
pub use geometry::{FreeSpaceClass, Polygon, PolygonalWorkspace, ValidatedWorkspace};
pub use rhsolver::{ConformalMapPiece, DomainKind, PlanarMap, SolverError};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Runs `f(j, a_j, b_j)` on matching `len`-sized chunks of `a` and `b`.
#[cfg(feature = "parallel")]
pub(crate) fn par_chunk_pairs<E: Send>(
    a: &mut [f64],
    b: &mut [f64],
    len: usize,
    f: impl Fn(usize, &mut [f64], &mut [f64]) -> Result<(), E> + Sync + Send,
) -> Result<(), E> {
    use rayon::prelude::*;
    a.par_chunks_mut(len).zip(b.par_chunks_mut(len)).enumerate().try_for_each(|(j, (x, y))| f(j, x, y))
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_chunk_pairs<E>(
    a: &mut [f64],
    b: &mut [f64],
    len: usize,
    f: impl Fn(usize, &mut [f64], &mut [f64]) -> Result<(), E>,
) -> Result<(), E> {
    a.chunks_mut(len).zip(b.chunks_mut(len)).enumerate().try_for_each(|(j, (x, y))| f(j, x, y))
}
