//! Schwarz-Christoffel reference maps from the unit disk onto a polygon.
//!
//! `inverse(w) = z_c + C \int_0^w prod_k (1 - zeta / w_k)^(alpha_k - 1) d zeta`
//! with prevertices `w_k` on the unit circle and `C > 0`, so the forward map
//! sends `z_c` to 0 with positive derivative there.

use std::f64::consts::{PI, TAU};

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct ScMap {
    pub center: Complex64,
    pub scale: f64,
    pub prevertices: Vec<Complex64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug)]
pub struct OracleNoConvergence(pub String);

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(32).unwrap()))
}

/// `\int_a^b f` for a complex integrand smooth on a neighbourhood of `[a, b]`.
fn legendre_complex(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    let rule = legendre();
    let re = rule.integrate(a, b, |t| f(t).re);
    let im = rule.integrate(a, b, |t| f(t).im);
    Complex64::new(re, im)
}

impl ScMap {
    /// Closed form for the square with vertices `(+-1, +-1)` and `z_c = 0`.
    pub fn square() -> ScMap {
        // \int_0^1 dx / sqrt(1 + x^4) = K(1 / sqrt 2) / 2
        let half: f64 = 0.927_037_338_650_685_9;
        ScMap {
            center: Complex64::new(0.0, 0.0),
            scale: 1.0 / half,
            prevertices: (0..4).map(|k| Complex64::cis(PI / 4.0 + k as f64 * PI / 2.0)).collect(),
            alphas: vec![0.5; 4],
        }
    }

    pub fn integrand(&self, zeta: Complex64) -> Complex64 {
        self.prevertices
            .iter()
            .zip(&self.alphas)
            .map(|(w, a)| (1.0 - zeta / w).powf(a - 1.0))
            .product()
    }

    /// Image of an interior point `w` (`|w| < 1`).
    pub fn inverse(&self, w: Complex64) -> Complex64 {
        if w.norm() == 0.0 {
            return self.center;
        }
        let d = self.prevertices.iter().map(|p| (p - w).norm()).fold(f64::INFINITY, f64::min);
        let g = |t: f64| self.integrand(t * w) * w;
        // panels shrink geometrically toward the end of the ray nearest the circle
        let mut cuts = vec![0.0];
        let mut gap = 0.5;
        while gap * w.norm() > 0.5 * d {
            cuts.push(1.0 - gap);
            gap *= 0.5;
        }
        cuts.push(1.0);
        let s: Complex64 = cuts.windows(2).map(|c| legendre_complex(&g, c[0], c[1])).sum();
        self.center + self.scale * s
    }

    /// Image of prevertex `k`, with the endpoint singularity absorbed by a
    /// Gauss-Jacobi rule.
    pub fn vertex_image(&self, k: usize) -> Complex64 {
        let wk = self.prevertices[k];
        let ak = self.alphas[k];
        let rest = |zeta: Complex64| -> Complex64 {
            self.prevertices
                .iter()
                .zip(&self.alphas)
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, (w, a))| (1.0 - zeta / w).powf(a - 1.0))
                .product()
        };
        let near = |t: f64| rest(t * wk) * wk;
        let first = legendre_complex(&|t| self.integrand(t * wk) * wk, 0.0, 0.5);
        // on [1/2, 1] the factor (1 - t)^(alpha_k - 1) is the Jacobi weight
        let rule = GaussJacobi::new(
            NonZeroUsize::new(48).unwrap(),
            FiniteAboveNegOneF64::new(ak - 1.0).unwrap(),
            FiniteAboveNegOneF64::new(0.0).unwrap(),
        );
        // the rule's weight is (1 - x)^a on [-1, 1], and 1 - t = (1 - x) / 4
        let jac = 0.25f64.powf(ak - 1.0);
        let re = rule.integrate(0.5, 1.0, |t| near(t).re);
        let im = rule.integrate(0.5, 1.0, |t| near(t).im);
        self.center + self.scale * (first + jac * Complex64::new(re, im))
    }

    pub fn inverse_derivative(&self, w: Complex64) -> Complex64 {
        self.scale * self.integrand(w)
    }

    /// Disk point mapped to `z`, by Newton iteration continued along the
    /// segment from the centre.
    pub fn forward(&self, z: Complex64) -> Result<Complex64, OracleNoConvergence> {
        let steps = 8;
        let mut w = Complex64::new(0.0, 0.0);
        for s in 1..=steps {
            let target = self.center + (z - self.center) * (s as f64 / steps as f64);
            let mut converged = false;
            for _ in 0..60 {
                let r = self.inverse(w) - target;
                let dw = r / self.inverse_derivative(w);
                let mut next = w - dw;
                if next.norm() >= 1.0 {
                    next = w - 0.5 * dw;
                }
                w = next;
                if dw.norm() < 1e-15 || r.norm() < 1e-15 {
                    converged = true;
                    break;
                }
            }
            if !converged && s == steps {
                return Err(OracleNoConvergence(format!("Newton did not converge at {z}")));
            }
        }
        Ok(w)
    }

    /// Fits prevertices and scale so the vertex images match `vertices`
    /// (counterclockwise, interior angles `alphas` in units of pi).
    pub fn fit(vertices: &[Complex64], alphas: &[f64], center: Complex64) -> Result<ScMap, OracleNoConvergence> {
        let n = vertices.len();
        let theta0 = (vertices[0] - center).arg();
        // parameters: log gaps (n - 1, last gap fixed by normalization), rotation, log scale
        let mean_r = vertices.iter().map(|v| (v - center).norm()).sum::<f64>() / n as f64;
        let mut x = DVector::from_element(n + 1, 0.0);
        x[n - 1] = theta0;
        x[n] = mean_r.ln();
        let build = |x: &DVector<f64>| -> ScMap {
            let mut e: Vec<f64> = (0..n - 1).map(|k| x[k].exp()).collect();
            e.push(1.0);
            let total: f64 = e.iter().sum();
            let mut angle = x[n - 1];
            let mut pv = Vec::with_capacity(n);
            for gap in &e {
                pv.push(Complex64::cis(angle));
                angle += TAU * gap / total;
            }
            ScMap { center, scale: x[n].exp(), prevertices: pv, alphas: alphas.to_vec() }
        };
        let residual = |x: &DVector<f64>| -> DVector<f64> {
            let map = build(x);
            let mut r = DVector::zeros(2 * n);
            for k in 0..n {
                let d = map.vertex_image(k) - vertices[k];
                r[2 * k] = d.re;
                r[2 * k + 1] = d.im;
            }
            r
        };
        let mut lambda = 1e-3;
        let mut r = residual(&x);
        for _ in 0..200 {
            if r.amax() < 1e-11 {
                return Ok(build(&x));
            }
            let mut jac = DMatrix::zeros(2 * n, n + 1);
            for j in 0..=n {
                let mut xp = x.clone();
                let h = 1e-7;
                xp[j] += h;
                let rp = residual(&xp);
                jac.set_column(j, &((rp - &r) / h));
            }
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * &r;
            loop {
                let mut damped = a.clone();
                for i in 0..=n {
                    damped[(i, i)] *= 1.0 + lambda;
                }
                let step = damped.lu().solve(&(-&g)).ok_or_else(|| OracleNoConvergence("singular normal equations".into()))?;
                let xn = &x + step;
                let rn = residual(&xn);
                if rn.norm() < r.norm() {
                    x = xn;
                    r = rn;
                    lambda = (lambda / 10.0).max(1e-12);
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e12 {
                    return Err(OracleNoConvergence(format!("stalled at residual {:e}", r.amax())));
                }
            }
        }
        Err(OracleNoConvergence(format!("iteration limit, residual {:e}", r.amax())))
    }
}
