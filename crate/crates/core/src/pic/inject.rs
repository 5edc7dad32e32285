use rand::Rng;
use rayon::prelude::*;

use super::{Particle, Species};
use crate::constants::ELEMENTARY_CHARGE;
use crate::mesh::{sample_point_in_subquad, Location, Mesh, SubQuad};
use crate::rng::{RngStream, StreamKind};
use crate::{Error, Result, Vec3};

/// Most superparticles one sub-quadrangle may emit in one step.
pub const MAX_INJECTION: f64 = 1e7;

/// One emitting sub-quadrangle with the emission state at its centroid.
#[derive(Clone, Debug)]
pub struct EmittingSubQuad {
    pub quad: SubQuad,
    /// Emitted current density (A/m^2), non-negative.
    pub current_density: f64,
    /// Electric field at the emission point.
    pub field: Vec3,
}

/// `floor(n)` plus one more with probability `frac(n)`.
pub fn stochastic_round<R: Rng + ?Sized>(n: f64, rng: &mut R) -> u64 {
    let base = n.floor();
    let extra = rng.random::<f64>() < n - base;
    base as u64 + extra as u64
}

/// Creates the superparticles emitted during one step of length `dt`.
///
/// Sub-quad `k` draws from stream `(seed, Injection, step, k)`. New
/// particles get `v0 = (q/m) E dt (1/2 + R)` and are displaced by
/// `v0 dt R` from a uniform point of the sub-quad, with one uniform `R`
/// per particle. A particle whose displacement leaves the region keeps the
/// face's owner cell and is handled by the following drift. Ids are left
/// at 0.
pub fn inject_from_faces(
    mesh: &Mesh,
    sources: &[EmittingSubQuad],
    dt: f64,
    species: &Species,
    seed: u64,
    step: u64,
) -> Result<Vec<Particle>> {
    if let Some(s) = sources.iter().find(|s| !(s.current_density >= 0.0)) {
        return Err(Error::InvalidEmission(format!(
            "current density {} on face {}",
            s.current_density, s.quad.face
        )));
    }
    let qm = species.charge_to_mass();
    let per_quad: Vec<Vec<Particle>> = sources
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            if s.current_density == 0.0 {
                return Ok(Vec::new());
            }
            let mut rng = RngStream::new(seed, StreamKind::Injection, step, k as u64);
            let n_sp = s.current_density * s.quad.area * dt / (ELEMENTARY_CHARGE * species.weight);
            if !(n_sp <= MAX_INJECTION) {
                return Err(Error::InvalidEmission(format!(
                    "face {} would emit {n_sp:e} superparticles in one step; \
                     cap the current density or raise the weight",
                    s.quad.face
                )));
            }
            let count = stochastic_round(n_sp, &mut rng);
            let owner = mesh.face(s.quad.face).owner;
            (0..count)
                .map(|_| {
                    let start = sample_point_in_subquad(&s.quad, &mut rng);
                    let r: f64 = rng.random();
                    let vel = qm * dt * (0.5 + r) * s.field;
                    let pos = start + dt * r * vel;
                    let cell = match mesh.trace(&start, &pos, owner)? {
                        Location::Inside(c) => c,
                        Location::Outside { .. } => owner,
                    };
                    Ok(Particle { pos, vel, cell, id: 0 })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_quad.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoundaryTag};

    #[test]
    fn integer_counts_are_exact() {
        let mut rng = RngStream::from_seed(1);
        for _ in 0..1000 {
            assert_eq!(stochastic_round(2.0, &mut rng), 2);
            assert_eq!(stochastic_round(0.0, &mut rng), 0);
        }
    }

    fn sources(mesh: &Mesh, j: f64, e: f64) -> Vec<EmittingSubQuad> {
        mesh.faces_with_tag(BoundaryTag::Surface)
            .iter()
            .flat_map(|&f| mesh.subquads(f))
            .map(|quad| EmittingSubQuad { quad, current_density: j, field: Vec3::new(0.0, 0.0, -e) })
            .collect()
    }

    #[test]
    fn zero_current_emits_nothing() {
        let mesh = build_box_mesh(1e-9, 1e-9, 1e-9, [2, 2, 2]).unwrap();
        let sp = Species::electron(1.0);
        let ps = inject_from_faces(&mesh, &sources(&mesh, 0.0, 1e9), 1e-16, &sp, 3, 0).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn negative_current_is_rejected() {
        let mesh = build_box_mesh(1e-9, 1e-9, 1e-9, [1, 1, 1]).unwrap();
        let sp = Species::electron(1.0);
        let err = inject_from_faces(&mesh, &sources(&mesh, -1.0, 1e9), 1e-16, &sp, 3, 0);
        assert!(matches!(err, Err(Error::InvalidEmission(_))));
    }

    #[test]
    fn injected_particles_start_moving_into_the_gap() {
        let mesh = build_box_mesh(1e-8, 1e-8, 1e-8, [2, 2, 2]).unwrap();
        let sp = Species::electron(0.01);
        let dt = 1e-16;
        let srcs = sources(&mesh, 1e13, 1e9);
        let ps = inject_from_faces(&mesh, &srcs, dt, &sp, 9, 4).unwrap();
        let area: f64 = srcs.iter().map(|s| s.quad.area).sum();
        let expected = 1e13 * area * dt / (ELEMENTARY_CHARGE * 0.01);
        assert!((ps.len() as f64 - expected).abs() < 5.0 * expected.sqrt() + 3.0);
        let v_min = sp.charge_to_mass().abs() * 1e9 * dt * 0.5;
        for p in &ps {
            assert!(p.vel.z >= v_min * (1.0 - 1e-12) && p.vel.z <= 3.0 * v_min * (1.0 + 1e-12));
            assert!(p.pos.z >= 0.0 && p.pos.z <= p.vel.z * dt * 1.0000001);
            assert!(mesh.contains(&p.pos, p.cell));
            assert_eq!(p.vel.x, 0.0);
        }
        let again = inject_from_faces(&mesh, &srcs, dt, &sp, 9, 4).unwrap();
        assert_eq!(ps, again);
    }
}
