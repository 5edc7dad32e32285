use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::{CsrMatrix, DofMap, SparseSymSystem};
use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::pic::Particle;
use crate::{Error, Result};

/// Stiffness `M_ij = sum_cells coeff * V * grad N_i . grad N_j` over `region`,
/// with a zero right-hand side and no constraints.
pub fn assemble_laplace(mesh: &Mesh, region: Region, coeff: impl Fn(usize) -> f64) -> Result<SparseSymSystem> {
    let dofs = Arc::new(DofMap::for_region(mesh, region));
    if dofs.is_empty() {
        return Err(Error::config(format!("mesh has no {region:?} cells")));
    }
    let mut matrix = CsrMatrix::p1_pattern(mesh, &dofs);
    for c in mesh.cells_in(region) {
        let k = coeff(c);
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::config(format!("coefficient {k} in cell {c} must be positive")));
        }
        let g = mesh.gradients(c);
        let w = k * mesh.volume(c);
        let d = dofs.cell_dofs(mesh, c);
        for a in 0..4 {
            for b in 0..4 {
                matrix.add(d[a], d[b], w * g[a].dot(&g[b]));
            }
        }
    }
    let rhs = vec![0.0; dofs.len()];
    Ok(SparseSymSystem { dofs, matrix, rhs, dirichlet: BTreeMap::new() })
}

/// Consistent mass matrix `C_ij = sum_cells coeff * integral N_i N_j` on the
/// pattern of `like`.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap, like: &CsrMatrix, coeff: impl Fn(usize) -> f64) -> CsrMatrix {
    let mut m = like.zeroed_like();
    for c in mesh.cells_in(dofs.region()) {
        let w = coeff(c) * mesh.volume(c) / 20.0;
        let d = dofs.cell_dofs(mesh, c);
        for a in 0..4 {
            for b in 0..4 {
                m.add(d[a], d[b], if a == b { 2.0 * w } else { w });
            }
        }
    }
    m
}

/// Normal flux prescribed on a boundary: one value for all faces, or one per
/// face in the order of [`Mesh::faces_with_tag`].
#[derive(Clone, Copy, Debug)]
pub enum Flux<'a> {
    Uniform(f64),
    PerFace(&'a [f64]),
}

/// Adds `integral N_i * flux` over the faces tagged `tag`, i.e.
/// `flux * area / 3` to each face node.
pub fn add_neumann_flux(sys: &mut SparseSymSystem, mesh: &Mesh, tag: BoundaryTag, flux: Flux<'_>) -> Result<()> {
    let faces = mesh.faces_with_tag(tag);
    if faces.is_empty() {
        return Err(Error::config(format!("no boundary faces tagged {tag}")));
    }
    if let Flux::PerFace(v) = flux {
        if v.len() != faces.len() {
            return Err(Error::config(format!(
                "{} flux values for {} faces tagged {tag}",
                v.len(),
                faces.len()
            )));
        }
    }
    for (k, &f) in faces.iter().enumerate() {
        let value = match flux {
            Flux::Uniform(v) => v,
            Flux::PerFace(v) => v[k],
        };
        if value == 0.0 {
            continue;
        }
        let face = mesh.face(f);
        for &n in &face.nodes {
            let d = sys
                .dofs
                .dof(n)
                .ok_or_else(|| Error::config(format!("boundary {tag} node {n} is outside the solved region")))?;
            sys.rhs[d] += value * face.area / 3.0;
        }
    }
    Ok(())
}

/// Adds `integral N_i * s` for a source `s` constant per cell (indexed by
/// global cell number).
pub fn add_volume_source(sys: &mut SparseSymSystem, mesh: &Mesh, source: &[f64]) {
    for c in mesh.cells_in(sys.dofs.region()) {
        let share = source[c] * mesh.volume(c) / 4.0;
        if share != 0.0 {
            for d in sys.dofs.cell_dofs(mesh, c) {
                sys.rhs[d] += share;
            }
        }
    }
}

const DEPOSIT_CHUNK: usize = 4096;

/// Adds the point charges of `particles` to the right-hand side:
/// `factor * N_i(r_j)` for the four nodes of each particle's cell, where
/// `factor = q * w_sp / eps`.
///
/// Contributions are accumulated in fixed-size chunks and merged in chunk
/// order, so the result does not depend on the thread count.
pub fn deposit_particles(sys: &mut SparseSymSystem, mesh: &Mesh, particles: &[Particle], factor: f64) -> Result<()> {
    let partials: Vec<Result<Vec<(usize, f64)>>> = particles
        .par_chunks(DEPOSIT_CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 4);
            for p in chunk {
                let l = mesh.barycentric(&p.pos, p.cell);
                if l.iter().any(|&x| x < -crate::mesh::TOL_INSIDE) {
                    return Err(Error::StaleCellIndex { cell: p.cell });
                }
                let d = sys.dofs.cell_dofs(mesh, p.cell);
                for k in 0..4 {
                    out.push((d[k], factor * l[k]));
                }
            }
            Ok(out)
        })
        .collect();
    for part in partials {
        for (d, v) in part? {
            sys.rhs[d] += v;
        }
    }
    Ok(())
}
