//! Immutable tetrahedral mesh with tagged boundaries.
//!
//! Cells carry a [`Region`] (vacuum or metal). Adjacency only links cells of
//! the same region, so a walk through the vacuum stops at the metal surface
//! exactly as it stops at the outer boundary. Interface faces are stored once,
//! owned by the vacuum-side cell.
//!
//! Node ordering convention: `(v1 - v0) . ((v2 - v0) x (v3 - v0)) > 0`.
//! Local face `i` of a cell is the face opposite local vertex `i`.

mod builder;
mod io;
mod locate;
mod subquad;

use std::collections::HashMap;
use std::fmt;

use nalgebra::Matrix3;

use crate::{Error, Result, Vec3};

pub use builder::{build_box_mesh, build_layered_box, build_post_mesh, BoxMeshSpec, PostSpec, VoxelGrid};
pub use io::{read_mesh, write_mesh};
pub use locate::Location;
pub use subquad::{sample_point_in_subquad, triangle_barycentric, SubQuad, SUBQUAD_CENTROID};

/// Barycentric tolerance for point-in-cell tests.
pub const TOL_INSIDE: f64 = 1e-10;
/// Smallest admissible cell volume relative to the characteristic length cubed.
pub const VOL_EPS: f64 = 1e-18;

/// Boundary regions of the simulation domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Top of the vacuum box (far field / anode).
    Anode = 1,
    /// Lateral sides of the vacuum box.
    Lateral = 2,
    /// Metal-vacuum interface (emitting surface).
    Surface = 3,
    /// Lateral sides of the metal.
    MetalSide = 4,
    /// Bottom of the metal (heat sink, electrical ground).
    MetalBase = 5,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Anode,
        BoundaryTag::Lateral,
        BoundaryTag::Surface,
        BoundaryTag::MetalSide,
        BoundaryTag::MetalBase,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.id() == id)
    }

    fn slot(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BoundaryTag::Anode => "anode",
            BoundaryTag::Lateral => "lateral",
            BoundaryTag::Surface => "surface",
            BoundaryTag::MetalSide => "metal-side",
            BoundaryTag::MetalBase => "metal-base",
        };
        write!(f, "{name}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Vacuum,
    Metal,
}

impl Region {
    pub fn id(self) -> u8 {
        match self {
            Region::Vacuum => 0,
            Region::Metal => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Region::Vacuum),
            1 => Some(Region::Metal),
            _ => None,
        }
    }
}

/// What lies across a cell face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    Boundary(usize),
}

#[derive(Clone, Debug)]
pub struct BoundaryFace {
    pub nodes: [usize; 3],
    pub tag: BoundaryTag,
    /// Cell the face belongs to (vacuum side for interface faces).
    pub owner: usize,
    /// Cell across an interface face, if any.
    pub other: Option<usize>,
    /// Unit normal pointing out of the owner cell.
    pub normal: Vec3,
    pub area: f64,
    pub centroid: Vec3,
}

/// Per-cell affine data: `lambda_i(p) = delta_i0 + grad_i . (p - origin)`.
#[derive(Clone, Debug)]
struct CellGeometry {
    origin: Vec3,
    grads: [Vec3; 4],
    volume: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Vec3>,
    cells: Vec<[usize; 4]>,
    regions: Vec<Region>,
    neighbors: Vec<[Neighbor; 4]>,
    geometry: Vec<CellGeometry>,
    faces: Vec<BoundaryFace>,
    faces_by_tag: [Vec<usize>; 5],
    bounds: Aabb,
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

pub(crate) fn local_face(cell: &[usize; 4], i: usize) -> [usize; 3] {
    match i {
        0 => [cell[1], cell[2], cell[3]],
        1 => [cell[0], cell[2], cell[3]],
        2 => [cell[0], cell[1], cell[3]],
        _ => [cell[0], cell[1], cell[2]],
    }
}

fn signed_volume(p: [&Vec3; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

impl Mesh {
    /// Builds a mesh from raw arrays and an explicit list of tagged boundary
    /// faces. Every face that separates a cell from the outside or from a
    /// cell of another region must be listed exactly once.
    pub fn new(
        nodes: Vec<Vec3>,
        cells: Vec<[usize; 4]>,
        regions: Vec<Region>,
        boundary: &[([usize; 3], BoundaryTag)],
    ) -> Result<Self> {
        let mut tags: HashMap<[usize; 3], (BoundaryTag, bool)> = HashMap::with_capacity(boundary.len());
        for (nodes, tag) in boundary {
            if tags.insert(sorted3(*nodes), (*tag, false)).is_some() {
                return Err(Error::InvalidMesh(format!("boundary face {nodes:?} listed twice")));
            }
        }
        let mesh = Self::build(nodes, cells, regions, |face, _, _| {
            tags.get_mut(&sorted3(*face)).map(|entry| {
                entry.1 = true;
                entry.0
            })
        })?;
        if let Some((face, _)) = tags.iter().find(|(_, (_, used))| !used) {
            return Err(Error::InvalidMesh(format!(
                "boundary face {face:?} is not on the boundary of any region"
            )));
        }
        Ok(mesh)
    }

    /// Builds a mesh, asking `tagger` for the tag of each boundary face given
    /// its nodes, the owner region and the region across it (None = outside).
    pub(crate) fn build(
        nodes: Vec<Vec3>,
        mut cells: Vec<[usize; 4]>,
        regions: Vec<Region>,
        mut tagger: impl FnMut(&[usize; 3], Region, Option<Region>) -> Option<BoundaryTag>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        if regions.len() != cells.len() {
            return Err(Error::InvalidMesh(format!(
                "{} cells but {} region entries",
                cells.len(),
                regions.len()
            )));
        }
        for (c, cell) in cells.iter().enumerate() {
            if let Some(&n) = cell.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} references missing node {n}")));
            }
        }

        let total_volume: f64 = cells
            .iter()
            .map(|c| signed_volume([&nodes[c[0]], &nodes[c[1]], &nodes[c[2]], &nodes[c[3]]]).abs())
            .sum();
        let char_len = (total_volume / cells.len() as f64).cbrt();
        let vol_eps = VOL_EPS * char_len.powi(3);

        let mut geometry = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter_mut().enumerate() {
            let mut vol = signed_volume([&nodes[cell[0]], &nodes[cell[1]], &nodes[cell[2]], &nodes[cell[3]]]);
            if vol < 0.0 {
                cell.swap(2, 3);
                vol = -vol;
            }
            if !(vol > vol_eps) {
                return Err(Error::DegenerateCell { cell: c, volume: vol });
            }
            geometry.push(cell_geometry(&nodes, cell, vol).ok_or(Error::DegenerateCell { cell: c, volume: vol })?);
        }

        // face -> up to two (cell, local face) incidences
        let mut incidence: HashMap<[usize; 3], [(usize, usize); 2]> = HashMap::with_capacity(cells.len() * 2);
        const NONE: (usize, usize) = (usize::MAX, usize::MAX);
        for (c, cell) in cells.iter().enumerate() {
            for i in 0..4 {
                let key = sorted3(local_face(cell, i));
                let slot = incidence.entry(key).or_insert([NONE, NONE]);
                if slot[0] == NONE {
                    slot[0] = (c, i);
                } else if slot[1] == NONE {
                    slot[1] = (c, i);
                } else {
                    return Err(Error::InvalidMesh(format!("face {key:?} shared by more than two cells")));
                }
            }
        }

        let mut neighbors = vec![[Neighbor::Cell(usize::MAX); 4]; cells.len()];
        let mut faces: Vec<BoundaryFace> = Vec::new();
        let mut face_index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut faces_by_tag: [Vec<usize>; 5] = Default::default();

        for c in 0..cells.len() {
            for i in 0..4 {
                let raw = local_face(&cells[c], i);
                let key = sorted3(raw);
                let inc = incidence[&key];
                let other = if inc[0].0 == c { inc[1] } else { inc[0] };
                let other_cell = (other != NONE).then_some(other.0);
                if let Some(o) = other_cell {
                    if regions[o] == regions[c] {
                        neighbors[c][i] = Neighbor::Cell(o);
                        continue;
                    }
                }
                // boundary face for this cell's region; vacuum side owns interfaces
                let owns = match other_cell {
                    None => true,
                    Some(o) => regions[c] == Region::Vacuum || regions[o] != Region::Vacuum,
                };
                if !owns {
                    continue;
                }
                let tag = tagger(&raw, regions[c], other_cell.map(|o| regions[o])).ok_or_else(|| {
                    Error::InvalidMesh(format!("untagged boundary face {key:?} of cell {c}"))
                })?;
                let [a, b, d] = raw.map(|n| nodes[n]);
                let cross = (b - a).cross(&(d - a));
                let area = 0.5 * cross.norm();
                let mut normal = cross / cross.norm();
                let opposite = nodes[cells[c][i]];
                if normal.dot(&(opposite - a)) > 0.0 {
                    normal = -normal;
                }
                let idx = faces.len();
                faces.push(BoundaryFace {
                    nodes: raw,
                    tag,
                    owner: c,
                    other: other_cell,
                    normal,
                    area,
                    centroid: (a + b + d) / 3.0,
                });
                faces_by_tag[tag.slot()].push(idx);
                face_index.insert(key, idx);
            }
        }
        for (cell, nbrs) in cells.iter().zip(neighbors.iter_mut()) {
            for (i, n) in nbrs.iter_mut().enumerate() {
                if *n == Neighbor::Cell(usize::MAX) {
                    let key = sorted3(local_face(cell, i));
                    let idx = *face_index
                        .get(&key)
                        .ok_or_else(|| Error::InvalidMesh(format!("face {key:?} has no owner")))?;
                    *n = Neighbor::Boundary(idx);
                }
            }
        }

        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in &nodes {
            min = min.inf(p);
            max = max.sup(p);
        }

        Ok(Self {
            nodes,
            cells,
            regions,
            neighbors,
            geometry,
            faces,
            faces_by_tag,
            bounds: Aabb { min, max },
        })
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> &Vec3 {
        &self.nodes[n]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize; 4] {
        &self.cells[c]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn region(&self, c: usize) -> Region {
        self.regions[c]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn has_region(&self, region: Region) -> bool {
        self.regions.contains(&region)
    }

    pub fn cells_in(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(move |&c| self.regions[c] == region)
    }

    pub fn neighbors(&self, c: usize) -> &[Neighbor; 4] {
        &self.neighbors[c]
    }

    pub fn volume(&self, c: usize) -> f64 {
        self.geometry[c].volume
    }

    /// Constant shape-function gradients of cell `c`, in local vertex order.
    pub fn gradients(&self, c: usize) -> &[Vec3; 4] {
        &self.geometry[c].grads
    }

    pub fn centroid(&self, c: usize) -> Vec3 {
        self.cells[c].iter().map(|&n| self.nodes[n]).sum::<Vec3>() / 4.0
    }

    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &BoundaryFace {
        &self.faces[f]
    }

    /// Indices of the boundary faces carrying `tag`.
    pub fn faces_with_tag(&self, tag: BoundaryTag) -> &[usize] {
        &self.faces_by_tag[tag.slot()]
    }

    pub fn tag_area(&self, tag: BoundaryTag) -> f64 {
        self.faces_with_tag(tag).iter().map(|&f| self.faces[f].area).sum()
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Barycentric coordinates of `point` with respect to cell `c`, in local
    /// vertex order. They are the P1 shape-function values at `point`.
    #[inline]
    pub fn barycentric(&self, point: &Vec3, c: usize) -> [f64; 4] {
        let g = &self.geometry[c];
        let d = point - g.origin;
        let l1 = g.grads[1].dot(&d);
        let l2 = g.grads[2].dot(&d);
        let l3 = g.grads[3].dot(&d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn contains(&self, point: &Vec3, c: usize) -> bool {
        self.barycentric(point, c).iter().all(|&l| l >= -TOL_INSIDE)
    }

    /// V - E + F - C over all cells; 1 for a mesh of a ball.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        let mut tris = std::collections::HashSet::new();
        for cell in &self.cells {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.insert((cell[i].min(cell[j]), cell[i].max(cell[j])));
                }
                tris.insert(sorted3(local_face(cell, i)));
            }
        }
        self.nodes.len() as i64 - edges.len() as i64 + tris.len() as i64 - self.cells.len() as i64
    }

    /// Re-checks the structural invariants. Meshes are validated on
    /// construction; this exists for diagnostics and tests.
    pub fn check_invariants(&self) -> Result<()> {
        for (c, cell) in self.cells.iter().enumerate() {
            let vol = signed_volume([&self.nodes[cell[0]], &self.nodes[cell[1]], &self.nodes[cell[2]], &self.nodes[cell[3]]]);
            if vol <= 0.0 {
                return Err(Error::DegenerateCell { cell: c, volume: vol });
            }
            for i in 0..4 {
                match self.neighbors[c][i] {
                    Neighbor::Cell(n) => {
                        if !self.neighbors[n].contains(&Neighbor::Cell(c)) {
                            return Err(Error::InvalidMesh(format!("adjacency {c} -> {n} is not symmetric")));
                        }
                        if self.regions[n] != self.regions[c] {
                            return Err(Error::InvalidMesh(format!("cells {c} and {n} linked across regions")));
                        }
                    }
                    Neighbor::Boundary(f) => {
                        let face = &self.faces[f];
                        if face.owner != c && face.other != Some(c) {
                            return Err(Error::InvalidMesh(format!("face {f} not incident to cell {c}")));
                        }
                        if sorted3(face.nodes) != sorted3(local_face(&self.cells[c], i)) {
                            return Err(Error::InvalidMesh(format!("face {f} nodes do not match cell {c}")));
                        }
                    }
                }
            }
        }
        let mut seen = vec![0usize; self.faces.len()];
        for nb in &self.neighbors {
            for n in nb {
                if let Neighbor::Boundary(f) = n {
                    seen[*f] += 1;
                }
            }
        }
        for (f, face) in self.faces.iter().enumerate() {
            let expected = if face.other.is_some() { 2 } else { 1 };
            if seen[f] != expected {
                return Err(Error::InvalidMesh(format!(
                    "face {f} referenced {} times, expected {expected}",
                    seen[f]
                )));
            }
        }
        Ok(())
    }
}

fn cell_geometry(nodes: &[Vec3], cell: &[usize; 4], volume: f64) -> Option<CellGeometry> {
    let origin = nodes[cell[0]];
    let jac = Matrix3::from_columns(&[
        nodes[cell[1]] - origin,
        nodes[cell[2]] - origin,
        nodes[cell[3]] - origin,
    ]);
    let inv = jac.try_inverse()?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Some(CellGeometry {
        origin,
        grads: [-(g1 + g2 + g3), g1, g2, g3],
        volume,
    })
}
