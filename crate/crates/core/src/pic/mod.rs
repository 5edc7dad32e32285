//! Superparticle engine: leapfrog mover, injection from emitting surface
//! faces, boundary handling and binary Coulomb collisions.

mod boundary;
mod collide;
mod inject;
mod push;

use std::io::{BufRead, Write};

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE};
use crate::{Error, Result, Vec3};

pub use boundary::{apply_boundaries, LateralPolicy, Tally};
pub use collide::{
    collide_all, collide_cell, collision_variance, pair_plan, scatter_pair, CollisionParams, Pair,
};
pub use inject::{inject_from_faces, stochastic_round, EmittingSubQuad, MAX_INJECTION};
pub use push::{drift, kick, Exit};

/// A group of `w_sp` electrons moving as one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub pos: Vec3,
    pub vel: Vec3,
    /// Cell containing `pos`.
    pub cell: usize,
    pub id: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Species {
    /// Charge of one real particle (C).
    pub charge: f64,
    /// Mass of one real particle (kg).
    pub mass: f64,
    /// Real particles per superparticle.
    pub weight: f64,
}

impl Species {
    pub fn electron(weight: f64) -> Self {
        Self { charge: -ELEMENTARY_CHARGE, mass: ELECTRON_MASS, weight }
    }

    pub fn new(charge: f64, mass: f64, weight: f64) -> Result<Self> {
        if !(mass > 0.0) || !(weight > 0.0) || !charge.is_finite() {
            return Err(Error::config(format!(
                "species needs mass > 0 and weight > 0 (got m = {mass}, w = {weight})"
            )));
        }
        Ok(Self { charge, mass, weight })
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }

    /// Charge carried by one superparticle.
    pub fn sp_charge(&self) -> f64 {
        self.charge * self.weight
    }
}

/// Writes `id x y z vx vy vz` per particle in SI units.
pub fn write_snapshot<W: Write>(particles: &[Particle], mut w: W) -> Result<()> {
    writeln!(w, "# id x y z vx vy vz")?;
    for p in particles {
        writeln!(
            w,
            "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            p.id, p.pos.x, p.pos.y, p.pos.z, p.vel.x, p.vel.y, p.vel.z
        )?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]. Cells are left at 0.
pub fn read_snapshot<R: BufRead>(r: R) -> Result<Vec<Particle>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: k + 1, message };
        let mut it = line.split_whitespace();
        let id = it
            .next()
            .ok_or_else(|| bad("missing id".into()))?
            .parse::<u64>()
            .map_err(|e| bad(e.to_string()))?;
        let mut v = [0.0; 6];
        for x in &mut v {
            *x = it
                .next()
                .ok_or_else(|| bad("expected 7 columns".into()))?
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        }
        out.push(Particle {
            pos: Vec3::new(v[0], v[1], v[2]),
            vel: Vec3::new(v[3], v[4], v[5]),
            cell: 0,
            id,
        });
    }
    Ok(out)
}
