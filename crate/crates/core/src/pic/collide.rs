//! Binary Coulomb collisions between superparticles sharing a cell.
//!
//! Particles in a cell are paired at random and each pair's relative
//! velocity is rotated by a polar angle `theta` drawn through
//! `delta = tan(theta / 2) ~ N(0, <delta^2>)` and a uniform azimuth.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Particle, Species};
use crate::constants::VACUUM_PERMITTIVITY;
use crate::mesh::Mesh;
use crate::rng::{RngStream, StreamKind};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionParams {
    /// Coulomb logarithm.
    pub lambda: f64,
    pub dt: f64,
}

/// Two particles to collide and the factor applied to the variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub variance_factor: f64,
}

/// Random pairing of `n` particles. For odd `n` the first three shuffled
/// particles form three pairs (a-b, b-c, c-a) at half variance and the rest
/// pair up normally.
pub fn pair_plan<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Pair> {
    if n < 2 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut plan = Vec::with_capacity(n / 2 + 2);
    let mut rest = &idx[..];
    if n % 2 == 1 {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        for (i, j) in [(a, b), (b, c), (c, a)] {
            plan.push(Pair { i, j, variance_factor: 0.5 });
        }
        rest = &idx[3..];
    }
    for pair in rest.chunks_exact(2) {
        plan.push(Pair { i: pair[0], j: pair[1], variance_factor: 1.0 });
    }
    plan
}

/// Variance of `delta` for a pair with relative speed `speed` among
/// `n_real` real particles in `volume`.
pub fn collision_variance(species: &Species, n_real: f64, speed: f64, dt: f64, volume: f64, lambda: f64) -> f64 {
    let q2 = species.charge * species.charge;
    let e2 = VACUUM_PERMITTIVITY * VACUUM_PERMITTIVITY;
    q2 * q2 * n_real * lambda * dt / (2.0 * PI * e2 * species.mass * species.mass * speed.powi(3) * volume)
}

/// Post-collision velocities of an equal-mass pair for deflection
/// `delta = tan(theta/2)` and azimuth `phi`.
pub fn scatter_pair(u1: Vec3, u2: Vec3, delta: f64, phi: f64) -> (Vec3, Vec3) {
    let u = u1 - u2;
    let speed = u.norm();
    if speed == 0.0 {
        return (u1, u2);
    }
    let d2 = delta * delta;
    let sin_t = 2.0 * delta / (1.0 + d2);
    let one_minus_cos = 2.0 * d2 / (1.0 + d2);
    let (sin_p, cos_p) = phi.sin_cos();
    let u_perp = u.x.hypot(u.y);
    let du = if u_perp > 1e-12 * speed {
        Vec3::new(
            u.x / u_perp * u.z * sin_t * cos_p - u.y / u_perp * speed * sin_t * sin_p - u.x * one_minus_cos,
            u.y / u_perp * u.z * sin_t * cos_p + u.x / u_perp * speed * sin_t * sin_p - u.y * one_minus_cos,
            -u_perp * sin_t * cos_p - u.z * one_minus_cos,
        )
    } else {
        // relative velocity along z: rotate in the fixed x-y frame
        let s = u.z.signum();
        Vec3::new(
            speed * sin_t * cos_p,
            s * speed * sin_t * sin_p,
            -u.z * one_minus_cos,
        )
    };
    (u1 + 0.5 * du, u2 - 0.5 * du)
}

/// Collides the particles with velocities `vels` that share one cell of
/// volume `volume`. Returns the pairing used.
pub fn collide_cell<R: Rng + ?Sized>(
    vels: &mut [Vec3],
    species: &Species,
    params: &CollisionParams,
    volume: f64,
    rng: &mut R,
) -> Vec<Pair> {
    let plan = pair_plan(vels.len(), rng);
    let n_real = vels.len() as f64 * species.weight;
    for pair in &plan {
        let (u1, u2) = (vels[pair.i], vels[pair.j]);
        let speed = (u1 - u2).norm();
        let z: f64 = rng.sample(StandardNormal);
        let phi = 2.0 * PI * rng.random::<f64>();
        if speed == 0.0 || params.lambda == 0.0 {
            continue;
        }
        let var = pair.variance_factor * collision_variance(species, n_real, speed, params.dt, volume, params.lambda);
        let (v1, v2) = scatter_pair(u1, u2, var.sqrt() * z, phi);
        vels[pair.i] = v1;
        vels[pair.j] = v2;
    }
    plan
}

/// Collides all particles cell by cell. Cell `c` draws from stream
/// `(seed, Collision, step, c)` and sees its particles in storage order.
pub fn collide_all(
    particles: &mut [Particle],
    mesh: &Mesh,
    species: &Species,
    params: &CollisionParams,
    seed: u64,
    step: u64,
) -> usize {
    let mut order: Vec<(usize, usize)> = particles.iter().enumerate().map(|(i, p)| (p.cell, i)).collect();
    order.sort_unstable();
    let groups: Vec<&[(usize, usize)]> = order.chunk_by(|a, b| a.0 == b.0).filter(|g| g.len() >= 2).collect();
    let updates: Vec<(Vec<Vec3>, usize)> = groups
        .par_iter()
        .map(|g| {
            let cell = g[0].0;
            let mut vels: Vec<Vec3> = g.iter().map(|&(_, i)| particles[i].vel).collect();
            let mut rng = RngStream::new(seed, StreamKind::Collision, step, cell as u64);
            let plan = collide_cell(&mut vels, species, params, mesh.volume(cell), &mut rng);
            (vels, plan.len())
        })
        .collect();
    let mut pairs = 0;
    for (g, (vels, n)) in groups.iter().zip(updates) {
        for (&(_, i), v) in g.iter().zip(vels) {
            particles[i].vel = v;
        }
        pairs += n;
    }
    pairs
}
