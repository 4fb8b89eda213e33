//! Trapezoidal Cauchy integrals for holomorphic functions given by boundary values.
//!
//! Each quadrature weight is `h * eta'(t_j)`. Far from the curve the plain
//! Cauchy sum is used; close to it the barycentric (boundary subtraction)
//! form is used, which keeps full accuracy up to the boundary.

use std::f64::consts::TAU;

use num_complex::Complex64;

const I2PI: Complex64 = Complex64::new(0.0, TAU);

#[inline]
fn recip(d: Complex64) -> Complex64 {
    d.conj() / d.norm_sqr()
}

/// Closed curve samples with trapezoidal weights, as borrowed slices.
#[derive(Debug, Clone, Copy)]
pub struct Contour<'a> {
    pub points: &'a [Complex64],
    pub weights: &'a [Complex64],
}

impl<'a> Contour<'a> {
    pub fn node_index(&self, z: Complex64) -> Option<usize> {
        self.points.iter().position(|p| *p == z)
    }

    /// Crossing-number test against the polygon through the nodes.
    pub fn encloses(&self, z: Complex64) -> bool {
        let n = self.points.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
                if z.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Value and derivative of a function holomorphic inside a counterclockwise
/// contour (or in a bounded multiply connected domain whose full boundary is
/// passed with the outer curve counterclockwise and holes clockwise).
pub fn interior(c: Contour<'_>, values: &[Complex64], z: Complex64, near: bool) -> (Complex64, Complex64) {
    if let Some(j) = c.node_index(z) {
        // derivative at a node is not needed by callers on the boundary itself
        return (values[j], Complex64::new(f64::NAN, f64::NAN));
    }
    if !near {
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
            let r = 1.0 / (p - z);
            let t = w * v * r;
            s0 += t;
            s1 += t * r;
        }
        return (s0 / I2PI, s1 / I2PI);
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
        let wr = w * recip(p - z);
        num += wr * v;
        den += wr;
    }
    let f = num / den;
    let mut dnum = Complex64::new(0.0, 0.0);
    for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
        let r = recip(p - z);
        dnum += w * r * r * (v - f);
    }
    (f, dnum / den)
}

/// Value and derivative of a function holomorphic outside a clockwise
/// contour and vanishing at infinity. `anchor` is any point enclosed by the
/// contour, used by the barycentric form.
pub fn exterior(c: Contour<'_>, values: &[Complex64], anchor: Complex64, z: Complex64, near: bool) -> (Complex64, Complex64) {
    if let Some(j) = c.node_index(z) {
        return (values[j], Complex64::new(f64::NAN, f64::NAN));
    }
    if !near {
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
            let r = 1.0 / (p - z);
            let t = w * v * r;
            s0 += t;
            s1 += t * r;
        }
        return (s0 / I2PI, s1 / I2PI);
    }
    // (1 / 2 pi i) \oint_cw (z - a) / ((eta - a)(eta - z)) d eta = 1 for z outside
    let za = z - anchor;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
        let wr = w * recip(p - z);
        num += wr * v;
        den += wr * za * recip(p - anchor);
    }
    let g = num / den;
    let mut dnum = Complex64::new(0.0, 0.0);
    for ((p, w), v) in c.points.iter().zip(c.weights).zip(values) {
        let r = recip(p - z);
        dnum += w * r * r * (v - g);
    }
    (g, dnum / den)
}

/// `(1 / 2 pi i) \oint values / (eta - z) d eta` by the plain trapezoidal rule.
pub fn cauchy_sum(c: Contour<'_>, values: &[Complex64], z: Complex64) -> Complex64 {
    c.points
        .iter()
        .zip(c.weights)
        .zip(values)
        .map(|((p, w), v)| w * v / (p - z))
        .sum::<Complex64>()
        / I2PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::SmoothedBoundary;
    use crate::geometry::Orientation;

    fn weights(b: &SmoothedBoundary) -> Vec<Complex64> {
        b.derivatives.iter().map(|d| d * b.step()).collect()
    }

    #[test]
    fn interior_polynomial_far_and_near() {
        let b = SmoothedBoundary::circle(128, Complex64::new(0.0, 0.0), 1.0, Orientation::CounterClockwise);
        let w = weights(&b);
        let c = Contour { points: &b.points, weights: &w };
        let f = |z: Complex64| z * z * z + 2.0 * z;
        let df = |z: Complex64| 3.0 * z * z + 2.0;
        let vals: Vec<Complex64> = b.points.iter().map(|&p| f(p)).collect();
        for &(z, near) in &[(Complex64::new(0.2, 0.1), false), (Complex64::new(0.0, 0.999), true), (Complex64::new(0.7, -0.7), true)] {
            let (v, d) = interior(c, &vals, z, near);
            assert!((v - f(z)).norm() < 1e-11, "{z}: {v} vs {}", f(z));
            assert!((d - df(z)).norm() < 1e-8, "{z}: {d} vs {}", df(z));
        }
    }

    #[test]
    fn exterior_decaying_function() {
        let b = SmoothedBoundary::circle(128, Complex64::new(0.0, 0.0), 1.0, Orientation::Clockwise);
        let w = weights(&b);
        let c = Contour { points: &b.points, weights: &w };
        let f = |z: Complex64| 1.0 / (z - 0.3) + 0.5 / (z * z);
        let df = |z: Complex64| -1.0 / ((z - 0.3) * (z - 0.3)) - 1.0 / (z * z * z);
        let vals: Vec<Complex64> = b.points.iter().map(|&p| f(p)).collect();
        for &(z, near) in &[(Complex64::new(2.0, 1.0), false), (Complex64::new(0.0, 1.001), true), (Complex64::new(-1.2, 0.0), true)] {
            let (v, d) = exterior(c, &vals, Complex64::new(0.0, 0.0), z, near);
            assert!((v - f(z)).norm() < 1e-10, "{z}: {v} vs {}", f(z));
            assert!((d - df(z)).norm() < 1e-7, "{z}: {d} vs {}", df(z));
        }
    }

    #[test]
    fn encloses_matches_circle() {
        let b = SmoothedBoundary::circle(64, Complex64::new(1.0, 1.0), 0.5, Orientation::Clockwise);
        let w = weights(&b);
        let c = Contour { points: &b.points, weights: &w };
        assert!(c.encloses(Complex64::new(1.1, 0.9)));
        assert!(!c.encloses(Complex64::new(2.0, 0.9)));
    }
}
