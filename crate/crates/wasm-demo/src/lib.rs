//! Browser front end: solve a workspace, integrate from a clicked start, and
//! draw the level sets of the navigation function in either space.
//!
//! `Session` holds the plain Rust logic so it can be tested natively; `Demo`
//! is its JavaScript face.

use confnav::geometry::{validate_workspace, FreeSpaceClass, PolygonalWorkspace, ValidatedWorkspace};
use confnav::koebe::{solve_workspace, KoebeConfig, KoebeSolution};
use confnav::navfield::{phi_kr, ControllerConfig, NavFunctionConfig};
use confnav::navmap::NavigationMap;
use confnav::render::{sphere_world_svg, workspace_frame, workspace_svg, ScalarGrid};
use confnav::simulator::{integrate, SimulationConfig};
use confnav::PlanarMap;
use num_complex::Complex64;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// The four-obstacle room used by the command-line examples.
pub const DEFAULT_WORKSPACE: &str = include_str!("../../../data/four_obstacles.json");

const PLOT_CELLS: f64 = 120.0;
/// Trajectories sent to the page keep at most this many points.
const MAX_POINTS: usize = 2000;

pub struct Session {
    workspace: ValidatedWorkspace,
    solution: KoebeSolution,
    map: NavigationMap,
    trajectories: Vec<Vec<Complex64>>,
}

impl Session {
    pub fn solve(workspace_json: &str, nodes: Option<usize>) -> Result<Session, String> {
        let raw = PolygonalWorkspace::from_json(workspace_json).map_err(|e| format!("ParseError: {e}"))?;
        let workspace = validate_workspace(&raw).map_err(|e| e.to_string())?;
        let cfg = KoebeConfig { nodes, ..KoebeConfig::default() };
        let solution = solve_workspace(&workspace, &cfg).map_err(|e| e.to_string())?;
        let map = NavigationMap::new(&workspace, &solution);
        Ok(Session { workspace, solution, map, trajectories: Vec::new() })
    }

    pub fn summary_json(&self) -> String {
        let circles: Vec<_> = self.solution.sphere_world.circles.iter().map(|c| json!({ "center": [c.center.re, c.center.im], "radius": c.radius })).collect();
        let (lo, hi) = workspace_frame(&self.workspace);
        json!({
            "iterations": self.solution.map.iterations,
            "residual": self.solution.map.residual,
            "circles": circles,
            "frame": [lo.re, lo.im, hi.re, hi.im],
        })
        .to_string()
    }

    fn nav(&self, k: u32) -> Result<NavFunctionConfig, String> {
        NavFunctionConfig::new(k, self.solution.goal_image, self.solution.sphere_world.clone()).map_err(|e| e.to_string())
    }

    /// Integrates from `(x, y)` and keeps the path for the next drawing.
    pub fn simulate(&mut self, x: f64, y: f64, k: u32, gain: f64, dt: f64, max_time: f64) -> Result<String, String> {
        let cc = ControllerConfig::new(gain, self.nav(k)?, &self.map).map_err(|e| e.to_string())?;
        let sc = SimulationConfig { dt, max_time, gain, k, ..SimulationConfig::default() };
        let traj = integrate(Complex64::new(x, y), &cc, &sc, &self.workspace).map_err(|e| e.to_string())?;
        let stride = traj.samples.len().div_ceil(MAX_POINTS).max(1);
        let mut path: Vec<Complex64> = traj.samples.iter().step_by(stride).map(|s| s.x).collect();
        path.push(traj.last().x);
        let last = traj.last();
        let out = json!({
            "outcome": format!("{:?}", traj.outcome),
            "time": last.t,
            "final": [last.x.re, last.x.im],
            "points": path.len(),
        });
        self.trajectories.push(path);
        Ok(out.to_string())
    }

    pub fn clear(&mut self) {
        self.trajectories.clear();
    }

    /// Level sets of the pulled-back potential with obstacles and paths.
    pub fn workspace_svg(&self, k: u32) -> Result<String, String> {
        let cc = ControllerConfig::new(1.0, self.nav(k)?, &self.map).map_err(|e| e.to_string())?;
        let (lo, hi) = self.workspace.outer().bounding_box();
        let spacing = (hi.re - lo.re).max(hi.im - lo.im) / PLOT_CELLS;
        let grid = ScalarGrid::sample(lo, hi, spacing, |x| match self.workspace.classify(x) {
            FreeSpaceClass::Interior => cc.potential(x).ok(),
            _ => None,
        });
        Ok(workspace_svg(&self.workspace, Some(&grid), &self.trajectories))
    }

    /// The same picture on the sphere world.
    pub fn sphere_world_svg(&self, k: u32) -> Result<String, String> {
        let nav = self.nav(k)?;
        let grid = ScalarGrid::sample(Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0), 2.0 / PLOT_CELLS, |p| phi_kr(p, &nav).ok());
        let images: Vec<Vec<Complex64>> = self.trajectories.iter().map(|t| t.iter().filter_map(|x| self.map.eval(*x).ok()).collect()).collect();
        Ok(sphere_world_svg(&self.solution.sphere_world, self.solution.goal_image, Some(&grid), &images))
    }
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub fn default_workspace() -> String {
    DEFAULT_WORKSPACE.to_string()
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    /// Solves the workspace; `nodes = 0` picks the per-polygon default.
    #[wasm_bindgen(constructor)]
    pub fn new(workspace_json: &str, nodes: usize) -> Result<Demo, JsError> {
        Session::solve(workspace_json, (nodes > 0).then_some(nodes)).map(Demo).map_err(js)
    }

    pub fn summary(&self) -> String {
        self.0.summary_json()
    }

    pub fn simulate(&mut self, x: f64, y: f64, k: u32, gain: f64, dt: f64, max_time: f64) -> Result<String, JsError> {
        self.0.simulate(x, y, k, gain, dt, max_time).map_err(js)
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn workspace_svg(&self, k: u32) -> Result<String, JsError> {
        self.0.workspace_svg(k).map_err(js)
    }

    pub fn sphere_world_svg(&self, k: u32) -> Result<String, JsError> {
        self.0.sphere_world_svg(k).map_err(js)
    }
}
