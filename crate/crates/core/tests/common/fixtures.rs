//! Workspaces shared by the integration tests.

use std::f64::consts::PI;

use confnav::geometry::{Polygon, ValidatedWorkspace};
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn square(half: f64) -> Polygon {
    Polygon::from_xy(&[[-half, -half], [half, -half], [half, half], [-half, half]]).unwrap()
}

pub fn regular_polygon(n: usize, center: Complex64, radius: f64) -> Polygon {
    Polygon::new((0..n).map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64)).collect()).unwrap()
}

/// Six-pointed star with twelve vertices.
pub fn hexagram(center: Complex64, outer: f64, inner: f64) -> Polygon {
    let pts = (0..12)
        .map(|k| {
            let r = if k % 2 == 0 { outer } else { inner };
            center + Complex64::from_polar(r, PI / 2.0 + k as f64 * PI / 6.0)
        })
        .collect();
    Polygon::new(pts).unwrap()
}

pub fn triangle() -> Polygon {
    Polygon::from_xy(&[[0.8, -1.2], [1.2, -2.0], [1.8, -1.3]]).unwrap()
}

pub fn rectangle() -> Polygon {
    Polygon::from_xy(&[[1.1, -0.5], [1.9, -0.5], [1.9, 0.4], [1.1, 0.4]]).unwrap()
}

pub fn star() -> Polygon {
    hexagram(c(-1.5, -0.2), 0.5, 0.29)
}

/// Cup opening downward toward the goal; not star-shaped.
pub fn cup() -> Polygon {
    Polygon::from_xy(&[
        [-0.6, 0.8],
        [-0.4, 0.8],
        [-0.4, 1.6],
        [0.4, 1.6],
        [0.4, 0.8],
        [0.6, 0.8],
        [0.6, 1.8],
        [-0.6, 1.8],
    ])
    .unwrap()
}

/// Square room with a triangle, a rectangle, a hexagram and a cup; goal at the origin.
pub fn four_obstacles() -> ValidatedWorkspace {
    ValidatedWorkspace::new(square(2.5), vec![triangle(), rectangle(), star(), cup()], c(0.0, 0.0)).unwrap()
}

pub const FOUR_STARTS: [[f64; 2]; 4] = [[1.5, 1.0], [-1.5, 1.0], [-1.0, -1.5], [0.05, -1.5]];

/// Regular 128-gons approximating the unit disk with two circular holes.
pub fn near_sphere_world() -> ValidatedWorkspace {
    ValidatedWorkspace::new(
        regular_polygon(128, c(0.0, 0.0), 1.0),
        vec![regular_polygon(128, c(0.5, 0.1), 0.2), regular_polygon(128, c(-0.4, -0.3), 0.15)],
        c(0.0, 0.0),
    )
    .unwrap()
}
