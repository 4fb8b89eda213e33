//! Seeded random simple polygons.

use std::f64::consts::TAU;

use confnav::geometry::{segments_intersect, Polygon};
use num_complex::Complex64;
use rand::Rng;

/// Star-shaped polygon around the origin with sorted random angles.
pub fn star_polygon(rng: &mut impl Rng, n: usize) -> Option<Polygon> {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pts = angles.iter().map(|&a| Complex64::from_polar(rng.gen_range(0.2..1.0), a)).collect();
    Polygon::new(pts).ok()
}

/// Random points untangled by 2-opt moves; usually not star-shaped.
pub fn two_opt_polygon(rng: &mut impl Rng, n: usize) -> Option<Polygon> {
    let mut pts: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    for _ in 0..10 * n * n {
        let mut changed = false;
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (pts[i], pts[i + 1]);
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    pts[i + 1..=j].reverse();
                    changed = true;
                }
            }
        }
        if !changed {
            return Polygon::new(pts).ok();
        }
    }
    None
}

/// A simple polygon from one of the generators, counterclockwise or not.
pub fn random_polygon(rng: &mut impl Rng) -> Polygon {
    loop {
        let n = rng.gen_range(3..40);
        let p = if rng.gen_bool(0.5) { star_polygon(rng, n) } else { two_opt_polygon(rng, n) };
        if let Some(p) = p {
            return if rng.gen_bool(0.5) { p } else { p.reversed() };
        }
    }
}
