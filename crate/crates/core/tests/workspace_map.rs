mod common;

use std::sync::OnceLock;

use common::fixtures::{c, four_obstacles, near_sphere_world, square, FOUR_STARTS};
use confnav::io::{ArtifactError, MapArtifact};
use confnav::koebe::{solve_workspace, KoebeConfig, KoebeSolution};
use confnav::navfield::{grad_phi_kr, phi_kr, spurious_minima, ControllerConfig, NavFunctionConfig};
use confnav::navmap::NavigationMap;
use confnav::simulator::{integrate, lyapunov_check, write_csv, Outcome, SimulationConfig, SimulationError};
use confnav::{FreeSpaceClass, PlanarMap, ValidatedWorkspace};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Solved {
    ws: ValidatedWorkspace,
    solution: KoebeSolution,
    map: NavigationMap,
}

fn solved(m: usize) -> &'static Solved {
    static CELLS: [OnceLock<Solved>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let cell = match m {
        256 => &CELLS[0],
        512 => &CELLS[1],
        1024 => &CELLS[2],
        2048 => &CELLS[3],
        _ => panic!("no cache slot for m = {m}"),
    };
    cell.get_or_init(|| {
        let ws = four_obstacles();
        let solution = solve_workspace(&ws, &KoebeConfig { nodes: Some(m), ..KoebeConfig::default() }).unwrap();
        let map = NavigationMap::new(&ws, &solution);
        Solved { ws, solution, map }
    })
}

/// Seeded interior points at least `margin` from the boundary.
fn probes(ws: &ValidatedWorkspace, count: usize, margin: f64, seed: u64) -> Vec<Complex64> {
    let (lo, hi) = ws.outer().bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let z = c(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
        if ws.classify(z) == FreeSpaceClass::Interior && ws.boundary_distance(z) >= margin {
            out.push(z);
        }
    }
    out
}

fn nav(s: &Solved, k: u32) -> NavFunctionConfig {
    NavFunctionConfig::new(k, s.solution.goal_image, s.solution.sphere_world.clone()).unwrap()
}

#[test]
fn simply_connected_workspace_needs_one_iteration() {
    let ws = ValidatedWorkspace::new(square(1.0), vec![], c(0.2, 0.1)).unwrap();
    let s = solve_workspace(&ws, &KoebeConfig::default()).unwrap();
    assert_eq!(s.map.iterations, 1);
    assert!(s.sphere_world.circles.is_empty());
    assert_eq!(s.goal_image, c(0.0, 0.0));
}

#[test]
fn near_sphere_world_converges_quickly() {
    let s = solve_workspace(&near_sphere_world(), &KoebeConfig { nodes: Some(512), ..KoebeConfig::default() }).unwrap();
    assert!(s.history[0].residual < 1e-3, "{:?}", s.history[0]);
    assert!(s.map.iterations <= 5 && s.map.residual < 1e-12, "{:?}", s.history);
}

#[test]
fn circle_residual_is_monotone_after_the_first_iteration() {
    let h = &solved(256).solution.history;
    for w in h[1..].windows(2) {
        // below the tolerance the residual is rounding noise
        assert!(w[1].circle_residual <= w[0].circle_residual.max(1e-12), "{h:?}");
    }
}

#[test]
fn composition_derivative_matches_differences() {
    let s = solved(256);
    for z in probes(&s.ws, 100, 0.05, 3) {
        let (_, d) = s.solution.map.eval_with_derivative(z).unwrap();
        let h = 1e-5;
        let fd = (s.solution.map.eval(z + h).unwrap() - s.solution.map.eval(z - h).unwrap()) / (2.0 * h);
        assert!((d - fd).norm() < 1e-6 * d.norm(), "{z}");
    }
}

#[test]
fn compiled_map_agrees_with_composition() {
    let s = solved(512);
    for z in probes(&s.ws, 100, 0.05, 4) {
        let (a, da) = s.map.eval_with_derivative(z).unwrap();
        let (b, db) = s.solution.map.eval_with_derivative(z).unwrap();
        assert!((a - b).norm() < 1e-6 && (da - db).norm() < 1e-6 * db.norm(), "{z}");
    }
}

#[test]
fn patches_agree_with_direct_sum() {
    let s = solved(256);
    for z in probes(&s.ws, 200, 0.0, 5) {
        let (a, da) = s.map.eval_with_derivative(z).unwrap();
        let (b, db) = s.map.eval_direct(z);
        assert!((a - b).norm() < 1e-11 && (da - db).norm() < 1e-9 * db.norm().max(1.0), "{z}");
    }
}

#[test]
fn node_refinement_changes_the_map_by_less_than_a_micro() {
    // sharp reflex corners limit the convergence to about m^-3, so the
    // sub-micro agreement sets in from m = 1024
    let (a, b) = (solved(1024), solved(2048));
    for z in probes(&a.ws, 100, 0.05, 6) {
        assert!((a.map.eval(z).unwrap() - b.map.eval(z).unwrap()).norm() < 1e-6, "{z}");
    }
    for (p, q) in a.solution.sphere_world.circles.iter().zip(&b.solution.sphere_world.circles) {
        assert!((p.center - q.center).norm() < 1e-6 && (p.radius - q.radius).abs() < 1e-6);
    }
}

/// Angular steps between consecutive node images, positive in the traversal
/// direction, paired with whether the step touches a node within one grid
/// step of a polygon vertex.
fn image_steps(s: &Solved) -> Vec<Vec<(f64, bool)>> {
    s.solution
        .boundaries
        .iter()
        .enumerate()
        .map(|(b, tracked)| {
            let center = if b == 0 { c(0.0, 0.0) } else { s.solution.sphere_world.circles[b - 1].center };
            // outer boundary counterclockwise, obstacles clockwise
            let sign = if b == 0 { 1.0 } else { -1.0 };
            let m = tracked.images.len();
            let n = tracked.original.corners.len() as f64;
            let near_vertex = |j: usize| {
                let x = j as f64 * n / m as f64;
                (x - x.round()).abs() * m as f64 / n <= 1.0
            };
            (0..m)
                .map(|j| {
                    let step = sign * ((tracked.images[(j + 1) % m] - center) / (tracked.images[j] - center)).arg();
                    (step, near_vertex(j) || near_vertex((j + 1) % m))
                })
                .collect()
        })
        .collect()
}

#[test]
fn boundary_images_keep_their_cyclic_order() {
    // Away from vertices every step is forward. Next to a vertex the graded
    // trapezoidal rule resolves the images only up to a fixed fraction of
    // their own spacing, so a backward step there must shrink with m.
    let (coarse, fine) = (image_steps(solved(256)), image_steps(solved(512)));
    for (b, (sc, sf)) in coarse.iter().zip(&fine).enumerate() {
        for steps in [sc, sf] {
            let total: f64 = steps.iter().map(|s| s.0).sum();
            assert!((total - std::f64::consts::TAU).abs() < 1e-9, "boundary {b}: {total}");
            assert!(steps.iter().all(|&(step, corner)| corner || step > 0.0), "boundary {b}");
        }
        let backward = |steps: &[(f64, bool)]| steps.iter().map(|s| -s.0).fold(0.0, f64::max);
        let (bc, bf) = (backward(sc), backward(sf));
        assert!(bf <= 0.5 * bc, "boundary {b}: backward step {bc:e} at m = 256, {bf:e} at m = 512");
    }
}

#[test]
fn cauchy_riemann_residual_is_small() {
    let s = solved(256);
    let h = 1e-5;
    for z in probes(&s.ws, 1000, 0.02, 7) {
        let ux = (s.map.eval(z + h).unwrap() - s.map.eval(z - h).unwrap()) / (2.0 * h);
        let uy = (s.map.eval(z + c(0.0, h)).unwrap() - s.map.eval(z - c(0.0, h)).unwrap()) / (2.0 * h);
        // for w = u + iv: u_x - v_y and u_y + v_x
        let r1 = ux.re - uy.im;
        let r2 = uy.re + ux.im;
        assert!(r1.hypot(r2) < 1e-5 * ux.norm(), "{z}");
    }
}

#[test]
fn sampled_map_is_injective() {
    let s = solved(256);
    let pts = probes(&s.ws, 10_000, 0.0, 8);
    let mut imgs: Vec<(Complex64, Complex64)> = pts.iter().map(|z| (s.map.eval(*z).unwrap(), *z)).collect();
    imgs.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap());
    for i in 0..imgs.len() {
        for j in i + 1..imgs.len() {
            if imgs[j].0.re - imgs[i].0.re > 1e-12 {
                break;
            }
            if (imgs[j].0 - imgs[i].0).norm() < 1e-12 {
                assert!((imgs[j].1 - imgs[i].1).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn image_stays_inside_the_sphere_world() {
    let s = solved(256);
    for z in probes(&s.ws, 1000, 0.0, 9) {
        assert!(s.solution.sphere_world.contains(s.map.eval(z).unwrap()));
    }
}

#[test]
fn pullback_is_one_on_the_boundary_and_zero_at_the_goal() {
    let s = solved(256);
    let cfg = nav(s, 6);
    let cc = ControllerConfig::new(1.0, cfg, &s.map).unwrap();
    assert!(cc.potential(s.ws.goal()).unwrap() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let polys: Vec<_> = std::iter::once(s.ws.outer()).chain(s.ws.obstacles()).collect();
    for _ in 0..200 {
        let p = polys[rng.gen_range(0..polys.len())];
        let k = rng.gen_range(0..p.len());
        let (a, b) = p.edge(k);
        let x = a + (b - a) * rng.gen_range(0.01..0.99);
        assert!((cc.potential(x).unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn pullback_gradient_matches_differences() {
    let s = solved(256);
    let cfg = nav(s, 6);
    let cc = ControllerConfig::new(1.0, cfg.clone(), &s.map).unwrap();
    let h = 1e-6;
    for z in probes(&s.ws, 100, 0.1, 11) {
        if (z - s.ws.goal()).norm() < 0.05 {
            continue;
        }
        let u = confnav::navfield::control_input(z, &cc).unwrap();
        let fx = (cc.potential(z + h).unwrap() - cc.potential(z - h).unwrap()) / (2.0 * h);
        let fy = (cc.potential(z + c(0.0, h)).unwrap() - cc.potential(z - c(0.0, h)).unwrap()) / (2.0 * h);
        let grad = -u;
        assert!((grad - c(fx, fy)).norm() <= 1e-6 * grad.norm() + 1e-9, "{z}: {grad} vs {}", c(fx, fy));
        // the pulled-back gradient vanishes exactly where the sphere-world gradient does
        let (w, d) = s.map.eval_with_derivative(z).unwrap();
        assert!((grad.norm() - d.norm() * grad_phi_kr(w, &cfg).unwrap().norm()).abs() <= 1e-12 * grad.norm().max(1e-300));
    }
}

#[test]
fn descent_direction_at_first_of_the_four_starts() {
    let s = solved(256);
    let cc = ControllerConfig::new(1.0, nav(s, 6), &s.map).unwrap();
    let x = c(1.5, 1.0);
    let u = confnav::navfield::control_input(x, &cc).unwrap();
    assert!(u.norm() > 0.0 && u.re.is_finite());
    let h = 1e-6;
    let fx = (cc.potential(x + h).unwrap() - cc.potential(x - h).unwrap()) / (2.0 * h);
    let fy = (cc.potential(x + c(0.0, h)).unwrap() - cc.potential(x - c(0.0, h)).unwrap()) / (2.0 * h);
    assert!(-(u.re * fx + u.im * fy) > 0.0);
}

#[test]
fn k_threshold_diagnostic_separates_six_from_eight() {
    let s = solved(256);
    let six = spurious_minima(&nav(s, 6), 0.004);
    assert_eq!(six.len(), 1, "{six:?}");
    assert!((six[0] - c(0.784, -0.28)).norm() < 0.02);
    assert!(spurious_minima(&nav(s, 8), 0.004).is_empty());
    assert!(phi_kr(six[0], &nav(s, 6)).unwrap() < 1.0);
}

#[test]
fn artifact_round_trip_is_exact() {
    let s = solved(256);
    let text = MapArtifact::new(&s.ws, KoebeConfig { nodes: Some(256), ..KoebeConfig::default() }, s.solution.clone()).to_json();
    let loaded = MapArtifact::from_json(&text).unwrap();
    assert_eq!(loaded.workspace, s.ws);
    for z in probes(&s.ws, 100, 0.0, 12) {
        assert_eq!(loaded.map.eval_with_derivative(z).unwrap(), s.map.eval_with_derivative(z).unwrap());
        assert_eq!(loaded.solution.map.eval(z).unwrap(), s.solution.map.eval(z).unwrap());
    }
    let truncated = &text[..text.len() / 2];
    assert!(matches!(MapArtifact::from_json(truncated), Err(ArtifactError::ArtifactCorrupt(_))));
}

#[test]
fn trajectories_are_deterministic() {
    let s = solved(256);
    let cc = ControllerConfig::new(1.0, nav(s, 6), &s.map).unwrap();
    let sc = SimulationConfig::default();
    let x0 = c(FOUR_STARTS[3][0], FOUR_STARTS[3][1]);
    let csv = |t| {
        let mut buf = Vec::new();
        write_csv(t, &mut buf).unwrap();
        buf
    };
    let a = integrate(x0, &cc, &sc, &s.ws).unwrap();
    let fresh = s.map.clone();
    let cc2 = ControllerConfig::new(1.0, nav(s, 6), &fresh).unwrap();
    let b = integrate(x0, &cc2, &sc, &s.ws).unwrap();
    assert_eq!(a.outcome, Outcome::Converged);
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn halving_the_step_barely_moves_the_state() {
    let s = solved(256);
    let cc = ControllerConfig::new(1.0, nav(s, 6), &s.map).unwrap();
    // compared at a fixed horizon; converged end points differ by up to the goal radius
    let coarse = SimulationConfig { max_time: 1.0, ..SimulationConfig::default() };
    let fine = SimulationConfig { dt: 5e-4, ..coarse.clone() };
    let x0 = c(FOUR_STARTS[0][0], FOUR_STARTS[0][1]);
    let a = integrate(x0, &cc, &coarse, &s.ws).unwrap();
    let b = integrate(x0, &cc, &fine, &s.ws).unwrap();
    assert_eq!((a.outcome, b.outcome), (Outcome::Timeout, Outcome::Timeout));
    assert!((a.last().x - b.last().x).norm() < 10.0 * coarse.goal_radius * coarse.dt);
    let (ja, jb) = (lyapunov_check(&a).max_increase, lyapunov_check(&b).max_increase);
    assert!(jb <= ja.max(1e-12), "{ja} {jb}");
}

#[test]
fn start_inside_an_obstacle_is_rejected() {
    let s = solved(256);
    let cc = ControllerConfig::new(1.0, nav(s, 6), &s.map).unwrap();
    let r = integrate(c(1.5, 0.0), &cc, &SimulationConfig::default(), &s.ws);
    assert!(matches!(r, Err(SimulationError::InvalidStart { .. })));
}
