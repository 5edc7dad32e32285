use serde::{Deserialize, Serialize};

use super::{Exit, Particle};
use crate::mesh::{BoundaryTag, Location, Mesh};
use crate::{Result, Vec3};

/// What happens to particles leaving through the lateral boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LateralPolicy {
    /// Re-enter at the opposite side of the bounding box.
    #[default]
    Periodic,
    Absorb,
}

/// Superparticles removed per boundary tag, and lateral wraps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub absorbed: [u64; 5],
    pub wrapped: u64,
}

impl Tally {
    pub fn get(&self, tag: BoundaryTag) -> u64 {
        self.absorbed[tag.id() as usize - 1]
    }

    pub fn total_absorbed(&self) -> u64 {
        self.absorbed.iter().sum()
    }

    fn add(&mut self, tag: BoundaryTag) {
        self.absorbed[tag.id() as usize - 1] += 1;
    }

    pub fn merge(&mut self, other: &Tally) {
        for (a, b) in self.absorbed.iter_mut().zip(other.absorbed) {
            *a += b;
        }
        self.wrapped += other.wrapped;
    }
}

const MAX_WRAPS: usize = 8;

/// Handles the particles listed in `exits` (ascending indices from
/// [`super::drift`]): lateral exits are wrapped and relocated, every other
/// exit removes the particle. Survivors keep their relative order.
pub fn apply_boundaries(
    particles: &mut Vec<Particle>,
    exits: &[Exit],
    mesh: &Mesh,
    lateral: LateralPolicy,
) -> Result<Tally> {
    let mut tally = Tally::default();
    if exits.is_empty() {
        return Ok(tally);
    }
    let period = mesh.bounds().extent();
    let mut remove = vec![false; particles.len()];
    for exit in exits {
        let p = &mut particles[exit.index];
        let mut face = exit.face;
        let mut tag = exit.tag;
        let mut wraps = 0;
        let gone = loop {
            if tag != BoundaryTag::Lateral || lateral == LateralPolicy::Absorb || wraps == MAX_WRAPS {
                break Some(tag);
            }
            p.pos -= shift(&mesh.face(face).normal, &period);
            wraps += 1;
            match mesh.locate_cell(&p.pos, p.cell)? {
                Location::Inside(c) => {
                    p.cell = c;
                    break None;
                }
                Location::Outside { face: f, tag: t } => {
                    face = f;
                    tag = t;
                }
            }
        };
        tally.wrapped += wraps as u64;
        if let Some(tag) = gone {
            tally.add(tag);
            remove[exit.index] = true;
        }
    }
    let mut k = 0;
    particles.retain(|_| {
        k += 1;
        !remove[k - 1]
    });
    Ok(tally)
}

/// Period vector along the dominant axis of a lateral face normal.
fn shift(normal: &Vec3, period: &Vec3) -> Vec3 {
    if normal.x.abs() >= normal.y.abs() {
        Vec3::new(normal.x.signum() * period.x, 0.0, 0.0)
    } else {
        Vec3::new(0.0, normal.y.signum() * period.y, 0.0)
    }
}
