//! Surface charge on the emitter and forces on discrete surface points.
//!
//! The charge of each emitting face, `Q_i = eps0 E_n A_i`, is shared among
//! nearby points with weights `exp(-r_ij / r_c)` normalised per face, so
//! the total charge is conserved exactly. Point forces combine the
//! field pull `q E / 2` with a screened Coulomb interaction between the
//! points.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{COULOMB, VACUUM_PERMITTIVITY};
use crate::fem::BoundaryFlux;
use crate::mesh::{BoundaryTag, Mesh};
use crate::{Error, Result, Vec3};

/// Closest allowed distance between two points (m).
pub const MIN_SEPARATION: f64 = 1e-11;

/// Face charges `eps0 E_n A` for the surface faces, where `normal_field`
/// holds the field component along the normal pointing into the vacuum,
/// one value per face in [`Mesh::faces_with_tag`] order.
pub fn face_charges(mesh: &Mesh, normal_field: &[f64]) -> Result<Vec<f64>> {
    let faces = mesh.faces_with_tag(BoundaryTag::Surface);
    if faces.len() != normal_field.len() {
        return Err(Error::config(format!(
            "{} field values for {} surface faces",
            normal_field.len(),
            faces.len()
        )));
    }
    Ok(faces
        .iter()
        .zip(normal_field)
        .map(|(&f, &e)| VACUUM_PERMITTIVITY * e * mesh.face(f).area)
        .collect())
}

/// Field along the vacuum-pointing normal of each surface face, from the
/// reaction flux of the potential on the surface (`E . n = d(phi)/dn` with
/// `n` the outward normal of the vacuum).
pub fn surface_normal_field(mesh: &Mesh, flux: &BoundaryFlux) -> Vec<f64> {
    mesh.faces_with_tag(BoundaryTag::Surface).iter().map(|&f| flux.face_mean(mesh, f)).collect()
}

/// Centroids of the surface faces in [`Mesh::faces_with_tag`] order.
pub fn surface_centroids(mesh: &Mesh) -> Vec<Vec3> {
    mesh.faces_with_tag(BoundaryTag::Surface)
        .iter()
        .map(|&f| mesh.face(f).centroid)
        .collect()
}

/// Uniform grid over points for fixed-radius neighbour queries.
struct PointGrid {
    cell: f64,
    bins: HashMap<[i64; 3], Vec<usize>>,
}

impl PointGrid {
    fn new(points: &[Vec3], cell: f64) -> Self {
        let mut bins: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            bins.entry(Self::key(p, cell)).or_default().push(k);
        }
        Self { cell, bins }
    }

    fn key(p: &Vec3, cell: f64) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    /// Indices of points within `radius` of `p` (radius <= cell), ascending.
    fn within(&self, points: &[Vec3], p: &Vec3, radius: f64) -> Vec<usize> {
        let k = Self::key(p, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.bins.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        out.extend(v.iter().copied().filter(|&j| (points[j] - p).norm() <= radius));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeSharing {
    /// Decay length of the weights (m).
    pub r_c: f64,
    /// Points farther than this from a face centroid never receive its
    /// charge (m).
    pub search_radius: f64,
}

impl ChargeSharing {
    /// Weights below `exp(-28)` of the nearest point's are dropped.
    pub fn new(r_c: f64) -> Self {
        Self { r_c, search_radius: 28.0 * r_c }
    }
}

/// Shares face charges `charges` located at `centres` among `points`.
pub fn distribute_charges(centres: &[Vec3], charges: &[f64], points: &[Vec3], sharing: &ChargeSharing) -> Result<Vec<f64>> {
    if !(sharing.r_c > 0.0) || !(sharing.search_radius > 0.0) {
        return Err(Error::config("r_c and search radius must be positive"));
    }
    if centres.len() != charges.len() {
        return Err(Error::config("one charge per face centre expected"));
    }
    let grid = PointGrid::new(points, sharing.search_radius);
    let shares: Vec<Result<Vec<(usize, f64)>>> = centres
        .par_iter()
        .zip(charges)
        .enumerate()
        .map(|(face, (c, &q))| {
            let near = grid.within(points, c, sharing.search_radius);
            if near.is_empty() {
                return Err(Error::OrphanFace { face });
            }
            let dist: Vec<f64> = near.iter().map(|&j| (points[j] - c).norm()).collect();
            let r0 = dist.iter().copied().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = dist.iter().map(|r| (-(r - r0) / sharing.r_c).exp()).collect();
            let total: f64 = w.iter().sum();
            Ok(near.iter().zip(w).map(|(&j, wj)| (j, q * wj / total)).collect())
        })
        .collect();
    let mut out = vec![0.0; points.len()];
    for s in shares {
        for (j, q) in s? {
            out[j] += q;
        }
    }
    Ok(out)
}

/// Power of the distance in the screened Coulomb denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistancePower {
    /// `q q' / r^2`, reducing to Coulomb's law without screening.
    #[default]
    Squared,
    /// `q q' / r`.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// Inverse screening length (1/m).
    pub xi: f64,
    pub power: DistancePower,
}

impl Screening {
    /// Copper, 0.6809 per angstrom.
    pub fn copper() -> Self {
        Self { xi: 0.6809e10, power: DistancePower::Squared }
    }

    /// Distance beyond which `exp(-xi r) < 1e-8`.
    pub fn cutoff(&self) -> f64 {
        (1e8f64).ln() / self.xi
    }

    /// Force on charge `q1` at separation `r1 - r2 = d` from `q2`.
    pub fn pair_force(&self, q1: f64, q2: f64, d: &Vec3) -> Vec3 {
        let r = d.norm();
        let denom = match self.power {
            DistancePower::Squared => r * r,
            DistancePower::Linear => r,
        };
        (COULOMB * q1 * q2 / denom * (-self.xi * r).exp() / r) * d
    }
}

/// `q E / 2` plus screened Coulomb forces from all other points within the
/// screening cutoff.
pub fn point_forces(points: &[Vec3], charges: &[f64], fields: &[Vec3], screening: &Screening) -> Result<Vec<Vec3>> {
    if points.len() != charges.len() || points.len() != fields.len() {
        return Err(Error::config("points, charges and fields must have equal length"));
    }
    if !(screening.xi > 0.0) {
        return Err(Error::config("screening constant must be positive"));
    }
    let cutoff = screening.cutoff();
    let grid = PointGrid::new(points, cutoff);
    points
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let mut f = 0.5 * charges[j] * fields[j];
            for k in grid.within(points, p, cutoff) {
                if k == j {
                    continue;
                }
                let d = p - points[k];
                if d.norm() < MIN_SEPARATION {
                    return Err(Error::CoincidentPoints {
                        first: j.min(k),
                        second: j.max(k),
                        min_distance: MIN_SEPARATION,
                    });
                }
                f += screening.pair_force(charges[j], charges[k], &d);
            }
            Ok(f)
        })
        .collect()
}

/// Surface points with charges and forces, for exchange with atomistic
/// codes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfacePointSet {
    pub ids: Vec<u64>,
    pub positions: Vec<Vec3>,
    pub charges: Vec<f64>,
    pub forces: Vec<Vec3>,
}

impl SurfacePointSet {
    /// Reads `id x y z` records (m); further columns are ignored.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut set = Self::default();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Parse { line: k + 1, message };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() < 4 {
                return Err(bad(format!("expected `id x y z`, got {} columns", cols.len())));
            }
            set.ids.push(cols[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?);
            let mut x = [0.0; 3];
            for (v, s) in x.iter_mut().zip(&cols[1..4]) {
                *v = s.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            }
            set.positions.push(Vec3::from(x));
        }
        set.charges = vec![0.0; set.ids.len()];
        set.forces = vec![Vec3::zeros(); set.ids.len()];
        Ok(set)
    }

    /// Writes `id x y z q fx fy fz` records in SI units.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# id x y z q fx fy fz")?;
        for k in 0..self.ids.len() {
            let (p, f) = (self.positions[k], self.forces[k]);
            writeln!(
                w,
                "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                self.ids[k], p.x, p.y, p.z, self.charges[k], f.x, f.y, f.z
            )?;
        }
        Ok(())
    }
}
