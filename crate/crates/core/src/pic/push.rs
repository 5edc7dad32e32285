//! Leapfrog mover.
//!
//! One step is `v += Q E(r)` (half kick), `r += dt v` (drift), field
//! refresh, `v += Q E(r)` (second half kick), with `Q = (q/m) dt / 2`.
//! The field refresh sits between the drift and the second kick, so the
//! two halves are separate calls.

use rayon::prelude::*;

use super::Particle;
use crate::mesh::{BoundaryTag, Location, Mesh};
use crate::{Result, Vec3};

/// A particle that left the region during a drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exit {
    pub index: usize,
    pub face: usize,
    pub tag: BoundaryTag,
}

/// Half kick `v += q_half * E` with `q_half = (q/m) dt / 2`.
pub fn kick<F>(particles: &mut [Particle], q_half: f64, field: F)
where
    F: Fn(&Particle) -> Vec3 + Sync,
{
    particles.par_iter_mut().for_each(|p| {
        let e = field(p);
        p.vel += q_half * e;
    });
}

/// `r += dt v` and relocation by tracing the straight path from the old
/// position through the mesh. A path that crosses a boundary face counts as
/// an exit even if it re-enters the region further on. Returns the
/// particles that crossed a boundary face, ascending by index; their `cell`
/// is left unchanged.
pub fn drift(particles: &mut [Particle], mesh: &Mesh, dt: f64) -> Result<Vec<Exit>> {
    let exits: Vec<Result<Option<Exit>>> = particles
        .par_iter_mut()
        .enumerate()
        .map(|(index, p)| {
            let from = p.pos;
            p.pos += dt * p.vel;
            Ok(match mesh.trace(&from, &p.pos, p.cell)? {
                Location::Inside(c) => {
                    p.cell = c;
                    None
                }
                Location::Outside { face, tag } => Some(Exit { index, face, tag }),
            })
        })
        .collect();
    let mut out = Vec::new();
    for e in exits {
        if let Some(e) = e? {
            out.push(e);
        }
    }
    Ok(out)
}
