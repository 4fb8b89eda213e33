//! Sampled scalar fields, marching-squares level sets and SVG figures.

use std::fmt::Write;

use num_complex::Complex64;

use crate::geometry::ValidatedWorkspace;
use crate::koebe::SphereWorld;

/// Values of a scalar field at `(x0 + i dx, y0 + j dy)`, row-major in `j`.
/// `NaN` marks points outside the field's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub origin: Complex64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    /// Samples `f` on a square lattice covering `[lo, hi]`.
    pub fn sample(lo: Complex64, hi: Complex64, spacing: f64, f: impl Fn(Complex64) -> Option<f64> + Sync + Send) -> Self {
        let nx = ((hi.re - lo.re) / spacing).floor() as usize + 1;
        let ny = ((hi.im - lo.im) / spacing).floor() as usize + 1;
        let rows = crate::par_map(ny, |j| {
            (0..nx)
                .map(|i| f(lo + Complex64::new(i as f64 * spacing, j as f64 * spacing)).unwrap_or(f64::NAN))
                .collect::<Vec<f64>>()
        });
        ScalarGrid { origin: lo, spacing, nx, ny, values: rows.concat() }
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        self.origin + Complex64::new(i as f64 * self.spacing, j as f64 * self.spacing)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Nodes strictly below every defined neighbour among the eight around them.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = self.get(i, j);
                if v.is_nan() {
                    continue;
                }
                let mut is_min = true;
                'scan: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                            continue;
                        }
                        let w = self.get(a as usize, b as usize);
                        if !w.is_nan() && w <= v {
                            is_min = false;
                            break 'scan;
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Marching-squares segments of the level set `{f = level}`; cells with
    /// an undefined corner are skipped.
    pub fn contour(&self, level: f64) -> Vec<(Complex64, Complex64)> {
        let mut segs = Vec::new();
        for j in 0..self.ny.saturating_sub(1) {
            for i in 0..self.nx.saturating_sub(1) {
                // counterclockwise corners from the lower left
                let idx = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let v = idx.map(|(a, b)| self.get(a, b));
                if v.iter().any(|x| x.is_nan()) {
                    continue;
                }
                let p = idx.map(|(a, b)| self.point(a, b));
                let cross = |e: usize| {
                    let (a, b) = (e, (e + 1) % 4);
                    let t = (level - v[a]) / (v[b] - v[a]);
                    p[a] + t * (p[b] - p[a])
                };
                let above: Vec<usize> = (0..4).filter(|&e| (v[e] >= level) != (v[(e + 1) % 4] >= level)).collect();
                match above.len() {
                    2 => segs.push((cross(above[0]), cross(above[1]))),
                    4 => {
                        // saddle cell: the centre value picks the pairing
                        let centre = v.iter().sum::<f64>() / 4.0;
                        if (centre >= level) == (v[0] >= level) {
                            segs.push((cross(0), cross(1)));
                            segs.push((cross(2), cross(3)));
                        } else {
                            segs.push((cross(3), cross(0)));
                            segs.push((cross(1), cross(2)));
                        }
                    }
                    _ => {}
                }
            }
        }
        segs
    }
}

/// Ten levels strictly between 0 and 1.
pub fn default_levels() -> Vec<f64> {
    (1..=10).map(|l| l as f64 / 11.0).collect()
}

/// An SVG canvas in world coordinates with the y axis pointing up.
pub struct Figure {
    lo: Complex64,
    hi: Complex64,
    scale: f64,
    body: String,
}

impl Figure {
    pub fn new(lo: Complex64, hi: Complex64, width_px: f64) -> Self {
        Figure { lo, hi, scale: width_px / (hi.re - lo.re), body: String::new() }
    }

    fn px(&self, z: Complex64) -> (f64, f64) {
        ((z.re - self.lo.re) * self.scale, (self.hi.im - z.im) * self.scale)
    }

    fn path(&self, pts: &[Complex64], closed: bool) -> String {
        let mut d = String::new();
        for (k, z) in pts.iter().enumerate() {
            let (x, y) = self.px(*z);
            let _ = write!(d, "{}{x:.3} {y:.3}", if k == 0 { "M" } else { " L" });
        }
        if closed {
            d.push_str(" Z");
        }
        d
    }

    pub fn polygon(&mut self, pts: &[Complex64], fill: &str, stroke: &str) {
        let d = self.path(pts, true);
        let _ = writeln!(self.body, r#"<path d="{d}" fill="{fill}" stroke="{stroke}" stroke-width="1.5"/>"#);
    }

    pub fn polyline(&mut self, pts: &[Complex64], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let d = self.path(pts, false);
        let _ = writeln!(self.body, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#);
    }

    pub fn circle(&mut self, center: Complex64, radius: f64, fill: &str, stroke: &str) {
        let (x, y) = self.px(center);
        let r = radius * self.scale;
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r:.3}" fill="{fill}" stroke="{stroke}" stroke-width="1.5"/>"#);
    }

    pub fn marker(&mut self, at: Complex64, color: &str) {
        let (x, y) = self.px(at);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{color}"/>"#);
    }

    pub fn contours(&mut self, grid: &ScalarGrid, levels: &[f64]) {
        let n = levels.len().max(1) as f64;
        for (l, level) in levels.iter().enumerate() {
            let shade = (60.0 + 160.0 * l as f64 / n) as u8;
            let mut d = String::new();
            for (a, b) in grid.contour(*level) {
                let (x0, y0) = self.px(a);
                let (x1, y1) = self.px(b);
                let _ = write!(d, "M{x0:.3} {y0:.3} L{x1:.3} {y1:.3} ");
            }
            if !d.is_empty() {
                let _ = writeln!(self.body, r#"<path d="{}" fill="none" stroke="rgb({shade},{shade},255)" stroke-width="0.8"/>"#, d.trim_end());
            }
        }
    }

    pub fn finish(self) -> String {
        let (w, h) = ((self.hi.re - self.lo.re) * self.scale, (self.hi.im - self.lo.im) * self.scale);
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn padded(lo: Complex64, hi: Complex64) -> (Complex64, Complex64) {
    let pad = 0.05 * (hi - lo).norm();
    (lo - Complex64::new(pad, pad), hi + Complex64::new(pad, pad))
}

/// World rectangle `(lo, hi)` drawn by `workspace_svg`: the outer bounding
/// box with a margin.
pub fn workspace_frame(ws: &ValidatedWorkspace) -> (Complex64, Complex64) {
    let (lo, hi) = ws.outer().bounding_box();
    padded(lo, hi)
}

/// Workspace view: level sets of the pulled-back potential, obstacles and
/// trajectories.
pub fn workspace_svg(ws: &ValidatedWorkspace, grid: Option<&ScalarGrid>, trajectories: &[Vec<Complex64>]) -> String {
    let (lo, hi) = workspace_frame(ws);
    let mut fig = Figure::new(lo, hi, 600.0);
    fig.polygon(ws.outer().vertices(), "none", "black");
    if let Some(g) = grid {
        fig.contours(g, &default_levels());
    }
    for o in ws.obstacles() {
        fig.polygon(o.vertices(), "#bbbbbb", "black");
    }
    for t in trajectories {
        fig.polyline(t, "#d62728", 2.0);
        if let Some(s) = t.first() {
            fig.marker(*s, "#d62728");
        }
    }
    fig.marker(ws.goal(), "#2ca02c");
    fig.finish()
}

/// Sphere-world view: the same picture pushed forward by the map.
pub fn sphere_world_svg(sw: &SphereWorld, goal: Complex64, grid: Option<&ScalarGrid>, trajectories: &[Vec<Complex64>]) -> String {
    let (lo, hi) = padded(Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0));
    let mut fig = Figure::new(lo, hi, 600.0);
    fig.circle(Complex64::new(0.0, 0.0), 1.0, "none", "black");
    if let Some(g) = grid {
        fig.contours(g, &default_levels());
    }
    for c in &sw.circles {
        fig.circle(c.center, c.radius, "#bbbbbb", "black");
    }
    for t in trajectories {
        fig.polyline(t, "#d62728", 2.0);
        if let Some(s) = t.first() {
            fig.marker(*s, "#d62728");
        }
    }
    fig.marker(goal, "#2ca02c");
    fig.finish()
}
