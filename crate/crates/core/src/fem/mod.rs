//! P1 finite elements on tetrahedra.
//!
//! Systems are assembled over one [`Region`] of the mesh and keep the
//! unconstrained matrix; Dirichlet values are eliminated symmetrically at
//! solve time. Keeping the raw matrix lets callers recover consistent
//! boundary fluxes (`M phi - f` at constrained nodes) after the solve.

mod assemble;
mod flux;
mod solve;
mod sparse;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::{Error, Result, Vec3};

pub use assemble::{add_neumann_flux, add_volume_source, assemble_laplace, assemble_mass, deposit_particles, Flux};
pub use flux::{boundary_flux, BoundaryFlux};
pub use solve::{solve_cg, CgOptions, SolveStats};
pub use sparse::CsrMatrix;

/// Numbering of the mesh nodes that belong to one region.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    region: Region,
    node_to_dof: Vec<u32>,
    dof_to_node: Vec<usize>,
}

const NO_DOF: u32 = u32::MAX;

impl DofMap {
    pub fn for_region(mesh: &Mesh, region: Region) -> Self {
        let mut node_to_dof = vec![NO_DOF; mesh.num_nodes()];
        let mut used = vec![false; mesh.num_nodes()];
        for c in mesh.cells_in(region) {
            for &n in mesh.cell(c) {
                used[n] = true;
            }
        }
        let mut dof_to_node = Vec::new();
        for (n, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            node_to_dof[n] = dof_to_node.len() as u32;
            dof_to_node.push(n);
        }
        Self { region, node_to_dof, dof_to_node }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn len(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_node.is_empty()
    }

    #[inline]
    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.node_to_dof[node] {
            NO_DOF => None,
            d => Some(d as usize),
        }
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    /// Dofs of a cell's four vertices. The cell must belong to the region.
    #[inline]
    pub fn cell_dofs(&self, mesh: &Mesh, c: usize) -> [usize; 4] {
        mesh.cell(c).map(|n| self.node_to_dof[n] as usize)
    }
}

/// Nodal values of a P1 field over one region.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub dofs: Arc<DofMap>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(dofs: Arc<DofMap>, value: f64) -> Self {
        let values = vec![value; dofs.len()];
        Self { dofs, values }
    }

    pub fn at_node(&self, node: usize) -> Option<f64> {
        self.dofs.dof(node).map(|d| self.values[d])
    }

    pub fn cell_values(&self, mesh: &Mesh, c: usize) -> [f64; 4] {
        self.dofs.cell_dofs(mesh, c).map(|d| self.values[d])
    }

    /// Interpolated value at `point` inside cell `c`.
    pub fn interpolate(&self, mesh: &Mesh, c: usize, point: &Vec3) -> f64 {
        let l = mesh.barycentric(point, c);
        let v = self.cell_values(mesh, c);
        l.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn cell_mean(&self, mesh: &Mesh, c: usize) -> f64 {
        self.cell_values(mesh, c).iter().sum::<f64>() / 4.0
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Electric field `-grad phi` in cell `c` (constant for P1).
pub fn eval_field(mesh: &Mesh, phi: &ScalarField, c: usize) -> Vec3 {
    let v = phi.cell_values(mesh, c);
    let g = mesh.gradients(c);
    -(g[0] * v[0] + g[1] * v[1] + g[2] * v[2] + g[3] * v[3])
}

/// Gradient of `u` in cell `c`.
pub fn eval_gradient(mesh: &Mesh, u: &ScalarField, c: usize) -> Vec3 {
    -eval_field(mesh, u, c)
}

/// Symmetric sparse system `M u = f` with Dirichlet constraints.
#[derive(Clone, Debug)]
pub struct SparseSymSystem {
    pub dofs: Arc<DofMap>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
}

impl SparseSymSystem {
    pub fn constrain(&mut self, dof: usize, value: f64) {
        self.dirichlet.insert(dof, value);
    }

    /// Fixes every node on faces tagged `tag` to `value`.
    pub fn constrain_tag(&mut self, mesh: &Mesh, tag: BoundaryTag, value: f64) -> Result<()> {
        let faces = mesh.faces_with_tag(tag);
        if faces.is_empty() {
            return Err(Error::MissingBoundary(tag));
        }
        for &f in faces {
            for &n in &mesh.face(f).nodes {
                let dof = self.dofs.dof(n).ok_or_else(|| {
                    Error::config(format!("boundary {tag} touches node {n} outside the {:?} region", self.dofs.region()))
                })?;
                self.dirichlet.insert(dof, value);
            }
        }
        Ok(())
    }

    /// `M u - f` over all dofs. At constrained dofs this is the consistent
    /// boundary flux.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        self.matrix.mul_vec(u, &mut r);
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        r
    }

    /// Dumps the matrix as `row col value` triplets followed by the
    /// right-hand side as `row value` pairs.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# matrix {} x {}, {} nonzeros", self.dofs.len(), self.dofs.len(), self.matrix.nnz())?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
        writeln!(w, "# rhs")?;
        for (i, v) in self.rhs.iter().enumerate() {
            writeln!(w, "{i} {v:.16e}")?;
        }
        Ok(())
    }
}
