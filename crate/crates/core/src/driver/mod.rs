//! The coupled simulation loop.
//!
//! One particle step of length `dt`, starting from positions `r_k` and the
//! field `E_k` solved for them:
//!
//! 1. kick every particle by `(q/m) E_k dt`, which completes `v_k` and
//!    advances it to `v_{k+1/2}`;
//! 2. evaluate emission on every surface sub-quadrangle from `E_k` and the
//!    surface temperature;
//! 3. inject new superparticles, whose initial velocity already contains
//!    the half kick;
//! 4. drift everything to `r_{k+1}` and apply the boundary rules;
//! 5. collide (optional);
//! 6. deposit the charge and solve for `E_{k+1}`;
//! 7. every `heat_every` steps, solve current continuity and advance the
//!    temperature with the emission averaged over the interval.

mod diagnostics;
mod run;
mod sweep;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{AnodeConfig, SimConfig};
use crate::constants::VACUUM_PERMITTIVITY;
use crate::emission::{self, EmitterMaterial};
use crate::fem::{
    add_neumann_flux, assemble_laplace, boundary_flux, deposit_particles, eval_field, solve_cg, BoundaryFlux,
    CgOptions, Flux, ScalarField, SparseSymSystem,
};
use crate::mesh::{BoundaryTag, Mesh, Region, SubQuad};
use crate::pic::{
    apply_boundaries, collide_all, drift, inject_from_faces, kick, CollisionParams, EmittingSubQuad, LateralPolicy,
    Particle, Species, Tally,
};
use crate::thermal::{
    cell_conductivities, joule_power, solve_continuity, step_heat, HeatOptions, HeatSources, HeatState, MaterialModel,
};
use crate::{Error, Result, Vec3};

pub use diagnostics::{PhaseTimings, StepDiagnostics, SteadyDetector, DIAGNOSTICS_HEADER, TIMINGS_HEADER};
pub use run::{run_simulation, RunSummary};
pub use sweep::{diode_gap, diode_sweep, SweepPoint, SweepReport, SWEEP_HEADER};

/// Boundary condition on the anode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Anode {
    /// Applied field (V/m) pulling electrons away from the emitter.
    Field(f64),
    /// Anode potential (V) above the grounded emitter.
    Voltage(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatParams {
    /// Particle steps per heat step.
    pub every: u64,
    pub material: MaterialModel,
    pub options: HeatOptions,
}

/// Everything a run needs besides the mesh, in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct RunParams {
    pub anode: Anode,
    pub dt: f64,
    pub species: Species,
    pub lateral: LateralPolicy,
    /// Coulomb logarithm when collisions are on.
    pub collisions: Option<f64>,
    pub emitter: EmitterMaterial,
    /// Emitter temperature used when `heat` is off.
    pub surface_temperature: f64,
    pub heat: Option<HeatParams>,
    pub seed: u64,
    pub cg: CgOptions,
}

impl RunParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.time.dt_pic.si;
        let heat = match &cfg.thermal {
            None => None,
            Some(t) => {
                let material = t.material()?;
                let dt_heat = cfg.time.dt_heat.map_or(dt, |h| h.si);
                let mut options = HeatOptions::ambient(&material);
                options.theta = t.theta;
                options.mass = t.mass;
                Some(HeatParams { every: (dt_heat / dt).ceil().max(1.0) as u64, material, options })
            }
        };
        Ok(Self {
            anode: match cfg.anode {
                AnodeConfig::Field { field } => Anode::Field(field.si),
                AnodeConfig::Voltage { voltage } => Anode::Voltage(voltage.si),
            },
            dt,
            species: Species::electron(cfg.particles.weight),
            lateral: cfg.particles.lateral,
            collisions: cfg.particles.collisions.then_some(cfg.particles.coulomb_log),
            emitter: cfg.emission.material()?,
            surface_temperature: cfg.emission.temperature.si,
            heat,
            seed: cfg.seed,
            cg: CgOptions::default(),
        })
    }
}

/// Superparticle counts since the start of the run. `injected - absorbed`
/// must equal the live count after every step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub injected: u64,
    pub tally: Tally,
}

impl Ledger {
    pub fn residual(&self, live: usize) -> i64 {
        self.injected as i64 - self.tally.total_absorbed() as i64 - live as i64
    }
}

struct HeatRuntime {
    params: HeatParams,
    state: HeatState,
    current_sum: Vec<f64>,
    nottingham_sum: Vec<f64>,
    samples: u64,
}

/// Emission state of one surface sub-quadrangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadEmission {
    pub current_density: f64,
    pub nottingham: f64,
    /// Field at the centroid, normal to the surface.
    pub field: Vec3,
}

pub struct Simulation {
    mesh: Arc<Mesh>,
    params: RunParams,
    system: SparseSymSystem,
    base_rhs: Vec<f64>,
    phi: ScalarField,
    surface: BoundaryFlux,
    cell_field: Vec<Vec3>,
    quads: Vec<SubQuad>,
    particles: Vec<Particle>,
    next_id: u64,
    step: u64,
    ledger: Ledger,
    heat: Option<HeatRuntime>,
    poisson_iterations: usize,
}

impl Simulation {
    /// Sets up the field problem and solves it without space charge.
    pub fn new(mesh: Arc<Mesh>, params: RunParams) -> Result<Self> {
        if !(params.dt > 0.0) {
            return Err(Error::config("particle time step must be positive"));
        }
        params.emitter.validate()?;
        let mut system = assemble_laplace(&mesh, Region::Vacuum, |_| 1.0)?;
        system.constrain_tag(&mesh, BoundaryTag::Surface, 0.0)?;
        match params.anode {
            Anode::Field(e0) => add_neumann_flux(&mut system, &mesh, BoundaryTag::Anode, Flux::Uniform(e0))?,
            Anode::Voltage(v) => system.constrain_tag(&mesh, BoundaryTag::Anode, v)?,
        }
        let heat = match &params.heat {
            None => None,
            Some(h) => {
                if !mesh.has_region(Region::Metal) {
                    return Err(Error::config("heat conduction needs a metal region in the mesh"));
                }
                let n = mesh.faces_with_tag(BoundaryTag::Surface).len();
                Some(HeatRuntime {
                    params: h.clone(),
                    state: HeatState::ambient(&mesh, &h.material),
                    current_sum: vec![0.0; n],
                    nottingham_sum: vec![0.0; n],
                    samples: 0,
                })
            }
        };
        let quads = mesh.faces_with_tag(BoundaryTag::Surface).iter().flat_map(|&f| mesh.subquads(f)).collect();
        let base_rhs = system.rhs.clone();
        let (phi, stats) = solve_cg(&system, params.cg, None)?;
        let surface = boundary_flux(&system, &mesh, &phi, BoundaryTag::Surface)?;
        let mut sim = Self {
            cell_field: Vec::new(),
            mesh,
            params,
            system,
            base_rhs,
            phi,
            surface,
            quads,
            particles: Vec::new(),
            next_id: 0,
            step: 0,
            ledger: Ledger::default(),
            heat,
            poisson_iterations: stats.iterations,
        };
        sim.update_cell_field();
        Ok(sim)
    }

    pub fn from_config(cfg: &SimConfig, base_dir: &std::path::Path) -> Result<Self> {
        let mesh = Arc::new(cfg.mesh.build(base_dir)?);
        Self::new(mesh, RunParams::from_config(cfg)?)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn params(&self) -> &RunParams {
        &self.params
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn potential(&self) -> &ScalarField {
        &self.phi
    }

    /// Field in each cell (zero outside the vacuum).
    pub fn cell_field(&self) -> &[Vec3] {
        &self.cell_field
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    pub fn ledger(&self) -> Ledger {
        self.ledger
    }

    pub fn temperature(&self) -> Option<&ScalarField> {
        self.heat.as_ref().map(|h| &h.state.temperature)
    }

    /// Surface field pulling electrons out, at the surface nodes'
    /// sub-quadrangle centroids, ordered as the sub-quadrangles.
    pub fn surface_fields(&self) -> Vec<f64> {
        self.quads
            .iter()
            .map(|q| -self.surface.at_face_point(&self.mesh, q.face, q.centroid_weights()))
            .collect()
    }

    fn update_cell_field(&mut self) {
        let mesh = &self.mesh;
        let phi = &self.phi;
        self.cell_field = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| if mesh.region(c) == Region::Vacuum { eval_field(mesh, phi, c) } else { Vec3::zeros() })
            .collect();
    }

    fn quad_temperature(&self, q: &SubQuad) -> f64 {
        match (&self.heat, self.mesh.face(q.face).other) {
            (Some(h), Some(metal)) => h.state.temperature.interpolate(&self.mesh, metal, &q.centroid()),
            _ => self.params.surface_temperature,
        }
    }

    /// Emission on every surface sub-quadrangle for the current field and
    /// temperature.
    pub fn emission(&self) -> Result<Vec<QuadEmission>> {
        let fields = self.surface_fields();
        self.quads
            .par_iter()
            .zip(fields)
            .map(|(q, f)| {
                let f = f.max(0.0);
                let point = emission::evaluate(f, self.quad_temperature(q), &self.params.emitter)?;
                Ok(QuadEmission {
                    current_density: point.current_density,
                    nottingham: point.nottingham,
                    field: f * self.mesh.face(q.face).normal,
                })
            })
            .collect()
    }

    /// Emitted current `sum J A` (A).
    pub fn emitted_current(emission: &[QuadEmission], quads: &[SubQuad]) -> f64 {
        emission.iter().zip(quads).map(|(e, q)| e.current_density * q.area).sum()
    }

    fn solve_field(&mut self) -> Result<()> {
        self.system.rhs.copy_from_slice(&self.base_rhs);
        let factor = self.params.species.sp_charge() / VACUUM_PERMITTIVITY;
        deposit_particles(&mut self.system, &self.mesh, &self.particles, factor)?;
        let (phi, stats) = solve_cg(&self.system, self.params.cg, Some(&self.phi.values))?;
        self.surface = boundary_flux(&self.system, &self.mesh, &phi, BoundaryTag::Surface)?;
        self.phi = phi;
        self.poisson_iterations = stats.iterations;
        self.update_cell_field();
        Ok(())
    }

    fn heat_step(&mut self, timings: &mut PhaseTimings) -> Result<()> {
        let Some(h) = self.heat.as_mut() else { return Ok(()) };
        if h.samples < h.params.every {
            return Ok(());
        }
        let t0 = Instant::now();
        let n = h.samples as f64;
        let current: Vec<f64> = h.current_sum.iter().map(|s| s / n).collect();
        let nottingham: Vec<f64> = h.nottingham_sum.iter().map(|s| s / n).collect();
        let mesh = &self.mesh;
        let cond = cell_conductivities(mesh, &h.state.temperature, &h.params.material)?;
        let sigma: Vec<f64> = cond.iter().map(|c| c.sigma).collect();
        let (phi_metal, _) = solve_continuity(mesh, &sigma, &current, h.params.options.cg)?;
        let sources = HeatSources { volume: joule_power(mesh, &phi_metal, &sigma), surface: nottingham };
        let dt = n * self.params.dt;
        h.state = step_heat(mesh, &h.state, dt, &sources, &h.params.material, &h.params.options)?;
        h.current_sum.iter_mut().for_each(|s| *s = 0.0);
        h.nottingham_sum.iter_mut().for_each(|s| *s = 0.0);
        h.samples = 0;
        timings.heat += t0.elapsed();
        Ok(())
    }

    fn accumulate_heat_sources(&mut self, emission: &[QuadEmission]) {
        let Some(h) = self.heat.as_mut() else { return };
        for (k, e) in emission.chunks_exact(3).enumerate() {
            h.current_sum[k] += e.iter().map(|q| q.current_density).sum::<f64>() / 3.0;
            h.nottingham_sum[k] += e.iter().map(|q| q.nottingham).sum::<f64>() / 3.0;
        }
        h.samples += 1;
    }

    /// Diagnostics of the current state without advancing it.
    pub fn snapshot_diagnostics(&self) -> Result<StepDiagnostics> {
        let emission = self.emission()?;
        Ok(self.diagnostics(&emission, 0, Tally::default(), 0, PhaseTimings::default()))
    }

    fn diagnostics(
        &self,
        emission: &[QuadEmission],
        injected: u64,
        tally: Tally,
        collision_pairs: usize,
        timings: PhaseTimings,
    ) -> StepDiagnostics {
        let max_surface_field = self.surface_fields().into_iter().fold(0.0, f64::max);
        let max_temperature = match self.temperature() {
            Some(t) => t.max(),
            None => self.params.surface_temperature,
        };
        StepDiagnostics {
            step: self.step,
            time: self.time(),
            emitted_current: Self::emitted_current(emission, &self.quads),
            injected,
            absorbed: tally.absorbed,
            wrapped: tally.wrapped,
            live: self.particles.len(),
            ledger_residual: self.ledger.residual(self.particles.len()),
            max_surface_field,
            max_temperature,
            poisson_iterations: self.poisson_iterations,
            collision_pairs,
            timings,
        }
    }

    /// Advances one particle step. On error the state is left as it was
    /// when the failing phase started.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let mut timings = PhaseTimings::default();
        let dt = self.params.dt;
        let species = self.params.species;

        let t0 = Instant::now();
        let field = &self.cell_field;
        kick(&mut self.particles, species.charge_to_mass() * dt, |p| field[p.cell]);
        timings.push += t0.elapsed();

        let t0 = Instant::now();
        let emission = self.emission()?;
        let sources: Vec<EmittingSubQuad> = self
            .quads
            .iter()
            .zip(&emission)
            .map(|(q, e)| EmittingSubQuad { quad: q.clone(), current_density: e.current_density, field: e.field })
            .collect();
        timings.emission += t0.elapsed();

        let t0 = Instant::now();
        let mut fresh = inject_from_faces(&self.mesh, &sources, dt, &species, self.params.seed, self.step)?;
        for p in &mut fresh {
            p.id = self.next_id;
            self.next_id += 1;
        }
        let injected = fresh.len() as u64;
        self.particles.extend(fresh);
        self.ledger.injected += injected;
        timings.inject += t0.elapsed();

        let t0 = Instant::now();
        let exits = drift(&mut self.particles, &self.mesh, dt)?;
        let tally = apply_boundaries(&mut self.particles, &exits, &self.mesh, self.params.lateral)?;
        self.ledger.tally.merge(&tally);
        timings.push += t0.elapsed();

        let t0 = Instant::now();
        let collision_pairs = match self.params.collisions {
            Some(lambda) => collide_all(
                &mut self.particles,
                &self.mesh,
                &species,
                &CollisionParams { lambda, dt },
                self.params.seed,
                self.step,
            ),
            None => 0,
        };
        timings.collide += t0.elapsed();

        let t0 = Instant::now();
        self.solve_field()?;
        timings.solve += t0.elapsed();

        self.accumulate_heat_sources(&emission);
        self.heat_step(&mut timings)?;
        self.step += 1;

        let diag = self.diagnostics(&emission, injected, tally, collision_pairs, timings);
        if diag.ledger_residual != 0 {
            return Err(Error::LedgerMismatch { step: self.step, residual: diag.ledger_residual });
        }
        Ok(diag)
    }
}
