//! Measurements shared by the module tests and the acceptance report. Each
//! returns the measured quantity so the caller applies its own bound.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use emitpic::config::SimConfig;
use emitpic::constants::{ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};
use emitpic::driver::{Anode, RunParams, Simulation, StepDiagnostics};
use emitpic::fem::{assemble_laplace, deposit_particles, ScalarField};
use emitpic::mesh::{build_box_mesh, build_layered_box, BoundaryTag, BoxMeshSpec, Mesh, Region};
use emitpic::pic::{collide_cell, drift, inject_from_faces, kick, pair_plan, CollisionParams, EmittingSubQuad, Particle, Species};
use emitpic::rng::RngStream;
use emitpic::surface::{distribute_charges, ChargeSharing};
use emitpic::thermal::{
    cell_kappa, conductive_outflow, step_heat, theta_step, HeatOptions, HeatSources, HeatState, MassMatrix,
    MaterialModel,
};
use emitpic::{Result, Vec3};
use rand::Rng;

pub const ROD_HEIGHT: f64 = 10e-9;
pub const ROD_WIDTH: f64 = 2e-9;

/// Metal bar of `nz` layers with its surface at z = 0.
pub fn bar(nz: usize) -> Mesh {
    build_layered_box(&BoxMeshSpec {
        width: ROD_WIDTH,
        depth: ROD_WIDTH,
        gap: 0.0,
        metal_height: ROD_HEIGHT,
        nx: 1,
        ny: 1,
        nz_vacuum: 0,
        nz_metal: nz,
        grading: 1.0,
    })
    .unwrap()
}

/// Height of a dof above the base of the bar.
pub fn height(mesh: &Mesh, field: &ScalarField, dof: usize) -> f64 {
    mesh.node(field.dofs.node(dof)).z + ROD_HEIGHT
}

pub fn fixed_ends(bottom: f64, top: Option<f64>) -> HeatOptions {
    let mut dirichlet = vec![(BoundaryTag::MetalBase, bottom)];
    if let Some(t) = top {
        dirichlet.push((BoundaryTag::Surface, t));
    }
    HeatOptions { theta: 1.0, dirichlet, mass: MassMatrix::Consistent, cg: Default::default() }
}

/// Largest relative deviation from the linear profile of a rod held at 300 K
/// and 400 K after relaxing for 20 diffusion times.
pub fn rod_profile_error() -> f64 {
    let m = bar(20);
    let (kappa, cv) = (400.0, 3.45e6);
    let k = vec![kappa; m.num_cells()];
    let opts = fixed_ends(300.0, Some(400.0));
    let mut state = HeatState::ambient(&m, &MaterialModel::default());
    let tau = cv * ROD_HEIGHT * ROD_HEIGHT / kappa;
    for _ in 0..400 {
        state = theta_step(&m, &state, 0.05 * tau, &k, cv, &HeatSources::default(), &opts).unwrap();
    }
    let t = &state.temperature;
    (0..t.values.len())
        .map(|d| {
            let exact = 300.0 + 100.0 * height(&m, t, d) / ROD_HEIGHT;
            ((t.values[d] - exact) / exact).abs()
        })
        .fold(0.0, f64::max)
}

/// Measured and analytic decay rates of the slowest mode of a rod with an
/// insulated top, the symmetric half of a rod of length 2H with both ends
/// fixed.
pub fn sine_mode_rate(theta: f64) -> (f64, f64) {
    let m = bar(40);
    let (kappa, cv) = (400.0, 3.45e6);
    let k = vec![kappa; m.num_cells()];
    let opts = HeatOptions { theta, ..fixed_ends(300.0, None) };
    let mut state = HeatState::ambient(&m, &MaterialModel::default());
    let l_bar = 2.0 * ROD_HEIGHT;
    for d in 0..state.temperature.values.len() {
        let z = height(&m, &state.temperature, d);
        state.temperature.values[d] = 300.0 + 10.0 * (PI * z / l_bar).sin();
    }
    let rate = kappa * PI * PI / (cv * l_bar * l_bar);
    let dt = 0.002 / rate;
    let amplitude = |s: &HeatState| s.temperature.max() - 300.0;
    let mut a1 = 0.0;
    for step in 1..=500 {
        state = theta_step(&m, &state, dt, &k, cv, &HeatSources::default(), &opts).unwrap();
        if step == 250 {
            a1 = amplitude(&state);
        }
    }
    ((a1 / amplitude(&state)).ln() / (250.0 * dt), rate)
}

/// Uniform Joule heating plus a surface flux on a copper bar.
pub fn heated_bar_sources(m: &Mesh) -> HeatSources {
    let volume = (0..m.num_cells()).map(|c| if m.region(c) == Region::Metal { 1e21 } else { 0.0 }).collect();
    HeatSources { volume, surface: vec![2e12; m.faces_with_tag(BoundaryTag::Surface).len()] }
}

/// Conduction out through the base against Joule plus surface input, once
/// the heated bar is steady. Returns `(out, in, max T)`.
pub fn steady_energy_balance() -> (f64, f64, f64) {
    let m = bar(16);
    let mat = MaterialModel::default();
    let opts = HeatOptions::ambient(&mat);
    let sources = heated_bar_sources(&m);
    let mut state = HeatState::ambient(&m, &mat);
    for _ in 0..60 {
        state = step_heat(&m, &state, 1e-9, &sources, &mat, &opts).unwrap();
    }
    let kappa = cell_kappa(&m, &state.temperature, &mat).unwrap();
    let out = conductive_outflow(&m, &state.temperature, &kappa, &sources, &opts, BoundaryTag::MetalBase).unwrap();
    let joule: f64 = (0..m.num_cells()).map(|c| sources.volume[c] * m.volume(c)).sum();
    let surface = 2e12 * m.tag_area(BoundaryTag::Surface);
    (out, joule + surface, state.temperature.max())
}

/// Planar diode with a 10 nm gap and the anode at `voltage` volts.
pub fn diode_config(voltage: f64, weight: f64, seed: u64, duration_fs: f64, collisions: bool) -> SimConfig {
    SimConfig::from_toml(&format!(
        r#"
seed = {seed}
deterministic = true

[mesh]
kind = "box"
width = "5 nm"
depth = "5 nm"
gap = "10 nm"
nx = 2
ny = 2
nz = 12

[anode]
kind = "voltage"
voltage = "{voltage} V"

[time]
dt_pic = "0.02 fs"
duration = "{duration_fs} fs"

[particles]
weight = {weight}
collisions = {collisions}
"#
    ))
    .unwrap()
}

/// Largest errors of the space-charge-free solution on a graded box with
/// an applied field: `max |phi - E0 z| / (E0 d)` over nodes and
/// `max |E - E0| / E0` over cells.
pub fn laplace_errors() -> (f64, f64) {
    let (e0, gap) = (2e9, 30e-9);
    let mesh = build_layered_box(&BoxMeshSpec {
        width: 7e-9,
        depth: 5e-9,
        gap,
        metal_height: 0.0,
        nx: 3,
        ny: 2,
        nz_vacuum: 15,
        nz_metal: 0,
        grading: 1.1,
    })
    .unwrap();
    let cfg = diode_config(100.0, 1.0, 1, 0.0, false);
    let params = RunParams { anode: Anode::Field(e0), ..RunParams::from_config(&cfg).unwrap() };
    let sim = Simulation::new(Arc::new(mesh), params).unwrap();
    let phi = sim.potential();
    let phi_err = (0..phi.values.len())
        .map(|d| (phi.values[d] - e0 * sim.mesh().node(phi.dofs.node(d)).z).abs() / (e0 * gap))
        .fold(0.0, f64::max);
    let expected = Vec3::new(0.0, 0.0, -e0);
    let field_err = sim.cell_field().iter().map(|e| (e - expected).norm() / e0).fold(0.0, f64::max);
    (phi_err, field_err)
}

/// Mean superparticle count per step from one sub-quad whose current gives
/// `n_sp` expected superparticles, over `trials` steps, with the standard
/// error of a Bernoulli fractional part.
pub fn injection_mean(n_sp: f64, trials: u64, seed: u64) -> (f64, f64) {
    let mesh = build_box_mesh(1e-8, 1e-8, 1e-8, [1, 1, 1]).unwrap();
    let face = mesh.faces_with_tag(BoundaryTag::Surface)[0];
    let quad = mesh.subquads(face)[0].clone();
    let species = Species::electron(1.0);
    let dt = 1e-16;
    let j = n_sp * ELEMENTARY_CHARGE * species.weight / (quad.area * dt);
    let sources = [EmittingSubQuad { quad, current_density: j, field: Vec3::new(0.0, 0.0, -1e9) }];
    let total: usize = (0..trials)
        .map(|step| inject_from_faces(&mesh, &sources, dt, &species, seed, step).unwrap().len())
        .sum();
    let f = n_sp.fract();
    (total as f64 / trials as f64, (f * (1.0 - f) / trials as f64).sqrt())
}

/// Variance of the deflection from the closed form, written out here so
/// the library expression is not checked against itself.
pub fn deflection_variance(charge: f64, mass: f64, n_real: f64, lambda: f64, dt: f64, speed: f64, volume: f64) -> f64 {
    charge.powi(4) * n_real * lambda * dt
        / (2.0 * PI * VACUUM_PERMITTIVITY.powi(2) * mass.powi(2) * speed.powi(3) * volume)
}

/// Mean of `tan^2(theta / 2)` recovered from the scattering angle of
/// `pairs` isolated two-particle cells, the expected variance and the
/// standard error of the mean.
pub fn collision_delta_sq(pairs: usize, seed: u64) -> (f64, f64, f64) {
    let species = Species::electron(1.0);
    let params = CollisionParams { lambda: 13.0, dt: 1e-17 };
    let volume = 1e-25;
    let (u1, u2) = (Vec3::new(2e5, -1e5, 3e5), Vec3::new(-1e5, 1e5, 0.0));
    let speed = (u1 - u2).norm();
    let expected =
        deflection_variance(species.charge, species.mass, 2.0 * species.weight, params.lambda, params.dt, speed, volume);
    let mut rng = RngStream::from_seed(seed);
    let mut sum = 0.0;
    for _ in 0..pairs {
        let mut v = [u1, u2];
        collide_cell(&mut v, &species, &params, volume, &mut rng);
        let (before, after) = (u1 - u2, v[0] - v[1]);
        let cos = (before.dot(&after) / (before.norm() * after.norm())).clamp(-1.0, 1.0);
        sum += (1.0 - cos) / (1.0 + cos);
    }
    let n = pairs as f64;
    (sum / n, expected, expected * (2.0 / n).sqrt())
}

/// Whether odd-sized cells pair the first three shuffled particles in a
/// triangle at half variance and everything else once at full variance,
/// for every odd size up to `max_n` and many shuffles.
pub fn odd_rule_holds(max_n: usize, seed: u64) -> bool {
    let mut rng = RngStream::from_seed(seed);
    (3..=max_n).step_by(2).all(|n| {
        (0..50).all(|_| {
            let plan = pair_plan(n, &mut rng);
            if plan.len() != 3 + (n - 3) / 2 {
                return false;
            }
            let halves = plan.iter().take_while(|p| p.variance_factor == 0.5).count();
            let triangle = plan[0].j == plan[1].i && plan[1].j == plan[2].i && plan[2].j == plan[0].i;
            let mut seen: Vec<usize> = plan[3..].iter().flat_map(|p| [p.i, p.j]).chain([plan[0].i, plan[1].i, plan[2].i]).collect();
            seen.sort_unstable();
            halves == 3
                && plan[3..].iter().all(|p| p.variance_factor == 1.0)
                && triangle
                && seen == (0..n).collect::<Vec<_>>()
        })
    })
}

/// Largest relative change of total momentum and kinetic energy when
/// colliding random cells of mixed sizes with strong scattering.
pub fn collision_conservation_error(cells: usize, seed: u64) -> f64 {
    let species = Species::electron(1e4);
    let params = CollisionParams { lambda: 13.0, dt: 1e-14 };
    let mut rng = RngStream::from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cells {
        let n = rng.random_range(2..12);
        let mut v: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 2e6)
            .collect();
        let p0: Vec3 = v.iter().sum();
        let e0: f64 = v.iter().map(|u| u.norm_squared()).sum();
        let scale: f64 = v.iter().map(|u| u.norm()).sum();
        collide_cell(&mut v, &species, &params, 1e-27, &mut rng);
        let p1: Vec3 = v.iter().sum();
        let e1: f64 = v.iter().map(|u| u.norm_squared()).sum();
        worst = worst.max((p1 - p0).norm() / scale).max(((e1 - e0) / e0).abs());
    }
    worst
}

/// Relative error of the deposited total against `n q w / eps0` for
/// `n` particles scattered through a box.
pub fn deposit_error(n: usize, seed: u64) -> f64 {
    let m = build_box_mesh(2e-9, 1e-9, 1.5e-9, [3, 2, 4]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    let mut rng = RngStream::from_seed(seed);
    let b = m.bounds();
    let particles: Vec<Particle> = (0..n)
        .map(|k| {
            let pos = b.min + b.extent().component_mul(&Vec3::new(rng.random(), rng.random(), rng.random()));
            let cell = m.locate_exhaustive(&pos, Region::Vacuum).unwrap();
            Particle { pos, vel: Vec3::zeros(), cell, id: k as u64 }
        })
        .collect();
    let species = Species::electron(0.01);
    let factor = species.sp_charge() / VACUUM_PERMITTIVITY;
    deposit_particles(&mut sys, &m, &particles, factor).unwrap();
    let total: f64 = sys.rhs.iter().sum();
    let expected = n as f64 * factor;
    ((total - expected) / expected).abs()
}

/// Relative change of the total when face charges are shared out to a
/// random cloud of surface points.
pub fn distribute_error(faces: usize, points: usize, seed: u64) -> f64 {
    let mut rng = RngStream::from_seed(seed);
    let r_c = 0.1e-9;
    let mut centres = Vec::with_capacity(faces);
    let mut charges = Vec::with_capacity(faces);
    for _ in 0..faces {
        centres.push(Vec3::new(rng.random::<f64>() * 4e-9, rng.random::<f64>() * 4e-9, rng.random::<f64>() * 1e-10));
        charges.push((rng.random::<f64>() - 0.3) * 1e-19);
    }
    let atoms: Vec<Vec3> = (0..points)
        .map(|_| Vec3::new(rng.random::<f64>() * 4e-9, rng.random::<f64>() * 4e-9, 0.0))
        .collect();
    let shared = distribute_charges(&centres, &charges, &atoms, &ChargeSharing::new(r_c)).unwrap();
    let before: f64 = charges.iter().sum();
    let scale: f64 = charges.iter().map(|q| q.abs()).sum();
    (shared.iter().sum::<f64>() - before).abs() / scale
}

/// Box large enough that test trajectories never reach its walls.
fn open_box() -> Mesh {
    build_box_mesh(100.0, 100.0, 100.0, [1, 1, 1]).unwrap()
}

/// Leapfrog with field `field(position)` for `steps` steps: half kick,
/// drift, half kick. Returns the final position and velocity.
pub fn leapfrog<F>(mesh: &Mesh, start: Vec3, vel: Vec3, dt: f64, steps: usize, field: F) -> (Vec3, Vec3)
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let species = Species::electron(1.0);
    let q_half = 0.5 * species.charge_to_mass() * dt;
    let cell = mesh.locate_exhaustive(&start, Region::Vacuum).unwrap();
    let mut p = [Particle { pos: start, vel, cell, id: 0 }];
    for _ in 0..steps {
        kick(&mut p, q_half, |q| field(&q.pos));
        let exits = drift(&mut p, mesh, dt).unwrap();
        assert!(exits.is_empty(), "test particle left the box");
        kick(&mut p, q_half, |q| field(&q.pos));
    }
    (p[0].pos, p[0].vel)
}

/// Largest deviation from the uniform-acceleration parabola over `steps`
/// steps, relative to the distance covered.
pub fn constant_field_error(steps: usize) -> f64 {
    let mesh = open_box();
    let qm = Species::electron(1.0).charge_to_mass();
    let accel = Vec3::new(0.3, -0.2, 1.0);
    let e = accel / qm;
    let (x0, v0) = (Vec3::new(40.0, 60.0, 20.0), Vec3::new(1.5, 2.0, -3.0));
    let dt = 1e-2;
    let mut worst: f64 = 0.0;
    let (mut x, mut v) = (x0, v0);
    for k in 1..=steps {
        (x, v) = leapfrog(&mesh, x, v, dt, 1, |_| e);
        let t = k as f64 * dt;
        let exact_x = x0 + v0 * t + 0.5 * accel * t * t;
        let exact_v = v0 + accel * t;
        let travelled = (exact_x - x0).norm().max(v0.norm() * dt);
        worst = worst.max((x - exact_x).norm() / travelled).max((v - exact_v).norm() / exact_v.norm());
    }
    worst
}

/// Convergence order of the position at a fixed time in a linear restoring
/// field, from three step sizes halving each time.
pub fn harmonic_order() -> f64 {
    let mesh = open_box();
    let qm = Species::electron(1.0).charge_to_mass();
    let omega = 2.0;
    let centre = Vec3::new(50.0, 50.0, 50.0);
    let field = |r: &Vec3| -(omega * omega / qm) * (r - centre);
    let (x0, v0) = (centre + Vec3::new(3.0, -2.0, 5.0), Vec3::new(1.0, 4.0, 0.0));
    let t_end = 3.0;
    let run = |steps: usize| leapfrog(&mesh, x0, v0, t_end / steps as f64, steps, field).0;
    let (a, b, c) = (run(200), run(400), run(800));
    ((a - b).norm() / (b - c).norm()).log2()
}

/// Diagnostics rows of a run as CSV text.
pub fn diagnostics_csv(history: &[StepDiagnostics]) -> String {
    let mut out = Vec::new();
    for d in history {
        d.write_row(&mut out).unwrap();
    }
    String::from_utf8(out).unwrap()
}

/// Runs `cfg` on a private pool of `threads` workers and returns its
/// diagnostics as CSV text.
pub fn run_on_threads(cfg: &SimConfig, threads: usize) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let summary = emitpic::driver::run_simulation(cfg, std::path::Path::new("."))?;
        Ok(diagnostics_csv(&summary.history))
    })
}

/// Runs the diode config and returns the ledger residual of every step.
pub fn ledger_residuals(cfg: &SimConfig) -> Result<Vec<i64>> {
    let summary = emitpic::driver::run_simulation(cfg, std::path::Path::new("."))?;
    Ok(summary.history.iter().map(|d| d.ledger_residual).collect())
}
