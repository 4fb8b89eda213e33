use std::fs;
use std::io::Write;
use std::path::Path;

use confnav::geometry::{interior_angles, validate_workspace, FreeSpaceClass, PolygonalWorkspace, ValidatedWorkspace};
use confnav::io::{LoadedMap, MapArtifact};
use confnav::koebe::{circle_residual, solve_workspace_with, IterationRecord, KoebeObserver, KoebeSolution};
use confnav::navfield::{phi_kr, ControllerConfig, NavFunctionConfig};
use confnav::render::{sphere_world_svg, workspace_svg, ScalarGrid};
use confnav::rhsolver::{RhSolution, RhSystem};
use confnav::simulator::{clearance, integrate_many, lyapunov_check, write_csv, Trajectory, LYAPUNOV_JUMP_TOLERANCE};
use confnav::{DomainKind, PlanarMap};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::RunManifest;

/// Grid cells across the workspace in the level-set pictures.
const PLOT_CELLS: f64 = 200.0;
/// Random interior probes for the conformality check.
const CONFORMALITY_PROBES: usize = 200;
const CONFORMALITY_TOLERANCE: f64 = 1e-6;
const CIRCULARITY_TOLERANCE: f64 = 1e-9;
const ANGLE_TOLERANCE: f64 = 1e-10;
/// Starts drawn for `verify` when the manifest lists none.
const VERIFY_STARTS: usize = 4;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn xy(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn load_workspace(path: &Path) -> Result<ValidatedWorkspace, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw = PolygonalWorkspace::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(validate_workspace(&raw)?)
}

fn load_map(m: &RunManifest) -> Result<LoadedMap, CliError> {
    let path = m.map_path();
    if !path.exists() {
        return Err(CliError::MissingMapArtifact(path.display().to_string()));
    }
    Ok(MapArtifact::load(&path)?)
}

/// Prints the convergence log and keeps the first round's systems.
struct SolveLog {
    debug_kernels: bool,
    kernels: Vec<Value>,
}

impl KoebeObserver for SolveLog {
    fn iteration(&mut self, r: &IterationRecord) {
        eprintln!("iter {} residual {:e}", r.iteration, r.residual);
    }

    fn piece(&mut self, iteration: usize, boundary: usize, system: &RhSystem, solution: &RhSolution) {
        if self.debug_kernels && iteration == 1 {
            let mut v = system.debug_json(solution);
            v["boundary"] = json!(boundary);
            self.kernels.push(v);
        }
    }
}

pub fn summary_json(s: &KoebeSolution) -> Value {
    let circles: Vec<Value> = s.sphere_world.circles.iter().map(|c| json!({ "center": xy(c.center), "radius": c.radius })).collect();
    json!({ "iterations": s.map.iterations, "residual": s.map.residual, "circles": circles })
}

/// One row per tracked node: boundary index (0 is the outer polygon), node
/// index, node position and its image.
fn boundary_images_csv(s: &KoebeSolution) -> String {
    let mut out = String::from("boundary,node,x,y,u,v\n");
    for (b, t) in s.boundaries.iter().enumerate() {
        let boundary = match t.kind {
            DomainKind::Bounded => 0,
            DomainKind::Unbounded => b + 1,
        };
        for (j, (z, w)) in t.original.points.iter().zip(&t.images).enumerate() {
            out.push_str(&format!("{boundary},{j},{:.16e},{:.16e},{:.16e},{:.16e}\n", z.re + 0.0, z.im + 0.0, w.re + 0.0, w.im + 0.0));
        }
    }
    out
}

pub fn solve(m: &RunManifest, debug_kernels: bool) -> Result<(), CliError> {
    let ws = load_workspace(&m.workspace)?;
    let cfg = m.koebe_config();
    let mut log = SolveLog { debug_kernels, kernels: Vec::new() };
    let solution = solve_workspace_with(&ws, &cfg, &mut log)?;
    create_dir(&m.output)?;
    write(&m.output.join("summary.json"), pretty(&summary_json(&solution)))?;
    write(&m.output.join("boundary_images.csv"), boundary_images_csv(&solution))?;
    if debug_kernels {
        write(&m.output.join("kernels_debug.json"), pretty(&Value::Array(log.kernels)))?;
    }
    write(&m.map_path(), MapArtifact::new(&ws, cfg, solution).to_json())?;
    Ok(())
}

fn nav_config(m: &RunManifest, loaded: &LoadedMap) -> Result<NavFunctionConfig, CliError> {
    NavFunctionConfig::new(m.nav.k, loaded.solution.goal_image, loaded.solution.sphere_world.clone())
        .map_err(|e| CliError::InvalidSettings(e.to_string()))
}

/// Integrates every manifest start; a failed start is reported, not fatal.
fn run_starts(m: &RunManifest, loaded: &LoadedMap, starts: &[Complex64]) -> Result<Vec<(Complex64, Result<Trajectory, String>)>, CliError> {
    let cc = ControllerConfig::new(m.nav.gain, nav_config(m, loaded)?, &loaded.map).map_err(|e| CliError::InvalidSettings(e.to_string()))?;
    let runs = integrate_many(starts, &cc, &m.simulation_config(), &loaded.workspace);
    Ok(starts.iter().copied().zip(runs.into_iter().map(|r| r.map_err(|e| e.to_string()))).collect())
}

pub fn simulate(m: &RunManifest) -> Result<(), CliError> {
    let loaded = load_map(m)?;
    let ws = &loaded.workspace;
    let starts = m.starts();
    let runs = run_starts(m, &loaded, &starts)?;
    create_dir(&m.output)?;
    let mut records = Vec::new();
    let mut paths = Vec::new();
    for (i, (x0, run)) in runs.iter().enumerate() {
        match run {
            Ok(traj) => {
                let name = format!("trajectory_{i}.csv");
                let path = m.output.join(&name);
                let mut buf = Vec::new();
                write_csv(traj, &mut buf).map_err(|e| CliError::io(&path, e))?;
                write(&path, buf)?;
                let last = traj.last();
                records.push(json!({
                    "start": xy(*x0),
                    "file": name,
                    "outcome": traj.outcome,
                    "final": xy(last.x),
                    "time": last.t,
                    "samples": traj.samples.len(),
                    "clearance": clearance(traj, ws),
                    "lyapunov_max_increase": lyapunov_check(traj).max_increase,
                }));
                paths.push(traj.samples.iter().map(|s| s.x).collect::<Vec<_>>());
            }
            Err(e) => records.push(json!({ "start": xy(*x0), "error": e })),
        }
    }
    write(&m.output.join("simulation.json"), pretty(&json!({ "trajectories": records })))?;

    let nav = nav_config(m, &loaded)?;
    let cc = ControllerConfig::new(m.nav.gain, nav.clone(), &loaded.map).map_err(|e| CliError::InvalidSettings(e.to_string()))?;
    let (lo, hi) = ws.outer().bounding_box();
    let spacing = (hi.re - lo.re).max(hi.im - lo.im) / PLOT_CELLS;
    let grid = ScalarGrid::sample(lo, hi, spacing, |x| match ws.classify(x) {
        FreeSpaceClass::Interior => cc.potential(x).ok(),
        _ => None,
    });
    write(&m.output.join("workspace.svg"), workspace_svg(ws, Some(&grid), &paths))?;
    let sphere_grid = ScalarGrid::sample(Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0), 2.0 / PLOT_CELLS, |p| phi_kr(p, &nav).ok());
    let images: Vec<Vec<Complex64>> = paths.iter().map(|p| p.iter().filter_map(|x| loaded.map.eval(*x).ok()).collect()).collect();
    write(&m.output.join("sphere_world.svg"), sphere_world_svg(&loaded.solution.sphere_world, loaded.solution.goal_image, Some(&sphere_grid), &images))?;
    Ok(())
}

fn family(name: &str, passed: bool, value: f64, threshold: f64, detail: String) -> Value {
    json!({ "name": name, "passed": passed, "value": value, "threshold": threshold, "detail": detail })
}

/// Largest mismatch between the two one-sided derivative estimates of the
/// Cauchy-Riemann equations, relative to `|T'|`.
fn conformality(loaded: &LoadedMap, rng: &mut ChaCha8Rng) -> Value {
    let ws = &loaded.workspace;
    let (lo, hi) = ws.outer().bounding_box();
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    while probes < CONFORMALITY_PROBES {
        let x = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
        if ws.classify(x) != FreeSpaceClass::Interior {
            continue;
        }
        probes += 1;
        // truncation scales like (h / distance)^2
        let h = 1e-4 * ws.boundary_distance(x);
        let f = |z: Complex64| loaded.map.eval(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let dx = (f(x + h) - f(x - h)) / (2.0 * h);
        let dy = (f(x + Complex64::new(0.0, h)) - f(x - Complex64::new(0.0, h))) / Complex64::new(0.0, 2.0 * h);
        let err = (dx - dy).norm() / dx.norm();
        worst = if err.is_finite() { worst.max(err) } else { f64::INFINITY };
    }
    family(
        "conformality residual",
        worst < CONFORMALITY_TOLERANCE,
        worst,
        CONFORMALITY_TOLERANCE,
        format!("relative Cauchy-Riemann mismatch at {CONFORMALITY_PROBES} interior probes"),
    )
}

/// Deviation of the outer images from the unit circle and of each obstacle's
/// images from their best-fit circle.
fn circularity(loaded: &LoadedMap) -> Value {
    let mut worst: f64 = 0.0;
    for t in &loaded.solution.boundaries {
        let dev = match t.kind {
            DomainKind::Bounded => t.images.iter().map(|w| (w.norm() - 1.0).abs()).fold(0.0, f64::max),
            DomainKind::Unbounded => circle_residual(&t.images).map(|(_, d)| d).unwrap_or(f64::INFINITY),
        };
        worst = worst.max(dev);
    }
    let margin = loaded.solution.sphere_world.min_margin();
    family(
        "boundary circularity",
        worst < CIRCULARITY_TOLERANCE && margin > 0.0,
        worst,
        CIRCULARITY_TOLERANCE,
        format!("largest node-image distance from its circle; smallest circle margin {margin:e}"),
    )
}

fn angle_identity(ws: &ValidatedWorkspace) -> Value {
    let polys = std::iter::once(ws.outer()).chain(ws.obstacles());
    let worst = polys
        .map(|p| match interior_angles(p) {
            Ok(a) => (a.iter().map(|a| 1.0 - a).sum::<f64>() - 2.0).abs(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    family("angle identity", worst < ANGLE_TOLERANCE, worst, ANGLE_TOLERANCE, "|sum(1 - alpha_k) - 2| over all polygons".into())
}

fn random_interior(ws: &ValidatedWorkspace, rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    let (lo, hi) = ws.outer().bounding_box();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
        if ws.classify(x) == FreeSpaceClass::Interior {
            out.push(x);
        }
    }
    out
}

pub fn verify(m: &RunManifest) -> Result<Value, CliError> {
    let loaded = load_map(m)?;
    let ws = &loaded.workspace;
    let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
    let mut families = vec![conformality(&loaded, &mut rng), circularity(&loaded), angle_identity(ws)];

    let starts = if m.simulation.starts.is_empty() { random_interior(ws, &mut rng, VERIFY_STARTS) } else { m.starts() };
    let runs = run_starts(m, &loaded, &starts)?;
    let trajectories: Vec<&Trajectory> = runs.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let failed_starts = runs.len() - trajectories.len();
    let jump = trajectories.iter().map(|t| lyapunov_check(t).max_increase).fold(0.0, f64::max);
    families.push(family(
        "Lyapunov descent",
        jump < LYAPUNOV_JUMP_TOLERANCE,
        jump,
        LYAPUNOV_JUMP_TOLERANCE,
        format!("largest increase of V between samples over {} trajectories", trajectories.len()),
    ));
    let gap = trajectories.iter().map(|t| clearance(t, ws)).fold(f64::INFINITY, f64::min);
    families.push(family(
        "clearance",
        gap > 0.0 && failed_starts == 0,
        gap,
        0.0,
        format!("smallest distance to the boundary; {failed_starts} starts could not be integrated"),
    ));

    let failed = families.iter().filter(|f| f["passed"] == json!(false)).count();
    let report = json!({ "passed": failed == 0, "seed": m.seed, "families": families });
    create_dir(&m.output)?;
    write(&m.output.join("verify.json"), pretty(&report))?;
    let mut stdout = std::io::stdout();
    let _ = stdout.write_all(pretty(&report).as_bytes());
    if failed > 0 {
        return Err(CliError::VerificationFailed(failed));
    }
    Ok(report)
}
