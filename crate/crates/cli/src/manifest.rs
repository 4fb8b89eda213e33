//! Run manifest: which workspace to solve and with which settings.
//!
//! Relative paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use confnav::boundary::DEFAULT_GRADING_EXPONENT;
use confnav::koebe::KoebeConfig;
use confnav::simulator::SimulationConfig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Nodes per boundary; absent means a per-polygon default.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default = "default_grading")]
    pub grading_exponent: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavSettings {
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_gain")]
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    #[serde(default)]
    pub starts: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub workspace: PathBuf,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub nav: NavSettings,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_grading() -> u32 {
    DEFAULT_GRADING_EXPONENT
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iterations() -> usize {
    50
}
fn default_k() -> u32 {
    6
}
fn default_gain() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_max_time() -> f64 {
    200.0
}
fn default_goal_radius() -> f64 {
    1e-3
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { nodes: None, grading_exponent: default_grading(), tol: default_tol(), max_iterations: default_max_iterations() }
    }
}

impl Default for NavSettings {
    fn default() -> Self {
        NavSettings { k: default_k(), gain: default_gain() }
    }
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings { dt: default_dt(), max_time: default_max_time(), goal_radius: default_goal_radius(), starts: Vec::new() }
    }
}

/// Command-line values that replace manifest settings when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub k: Option<u32>,
    pub gain: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.workspace = base.join(&m.workspace);
        m.output = base.join(&m.output);
        m.apply(overrides);
        m.check()?;
        Ok(m)
    }

    fn apply(&mut self, o: &Overrides) {
        if o.nodes.is_some() {
            self.solver.nodes = o.nodes;
        }
        if let Some(tol) = o.tol {
            self.solver.tol = tol;
        }
        if let Some(k) = o.k {
            self.nav.k = k;
        }
        if let Some(gain) = o.gain {
            self.nav.gain = gain;
        }
        if let Some(dt) = o.dt {
            self.simulation.dt = dt;
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::InvalidSettings(what.to_string()));
        if let Some(m) = self.solver.nodes {
            if m < 8 || m % 2 != 0 {
                return bad("solver.nodes must be an even number of at least 8");
            }
        }
        if !(2..=16).contains(&self.solver.grading_exponent) {
            return bad("solver.grading_exponent must be in 2..=16");
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad("solver.tol must be in (0, 1)");
        }
        if self.solver.max_iterations == 0 {
            return bad("solver.max_iterations must be positive");
        }
        if self.nav.k < 2 {
            return bad("nav.k must be at least 2");
        }
        if !(self.nav.gain > 0.0 && self.nav.gain.is_finite()) {
            return bad("nav.gain must be positive and finite");
        }
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.dt <= 1.0) {
            return bad("simulation.dt must be in (0, 1]");
        }
        if !(s.max_time >= 0.0 && s.max_time.is_finite()) {
            return bad("simulation.max_time must be finite and non-negative");
        }
        if !(s.goal_radius > 0.0 && s.goal_radius.is_finite()) {
            return bad("simulation.goal_radius must be positive and finite");
        }
        if s.starts.iter().flatten().any(|v| !v.is_finite()) {
            return bad("simulation.starts must be finite");
        }
        Ok(())
    }

    pub fn koebe_config(&self) -> KoebeConfig {
        KoebeConfig {
            nodes: self.solver.nodes,
            grading_exponent: self.solver.grading_exponent,
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            strict: false,
        }
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        SimulationConfig {
            dt: self.simulation.dt,
            max_time: self.simulation.max_time,
            goal_radius: self.simulation.goal_radius,
            gain: self.nav.gain,
            k: self.nav.k,
        }
    }

    pub fn starts(&self) -> Vec<Complex64> {
        self.simulation.starts.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn map_path(&self) -> PathBuf {
        self.output.join("map.json")
    }
}
