//! Structured meshers: boxes and voxelised geometries split into tetrahedra.

use super::{BoundaryTag, Mesh, Region};
use crate::{Error, Result, Vec3};

/// Tensor-product grid of hexahedral cells, each split into six
/// tetrahedra sharing the cell's main diagonal (conforming across cells).
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
}

impl VoxelGrid {
    pub fn uniform(min: Vec3, max: Vec3, divisions: [usize; 3]) -> Result<Self> {
        if divisions.contains(&0) {
            return Err(Error::config("mesh divisions must be positive"));
        }
        let axis = |a: f64, b: f64, n: usize| (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        Ok(Self {
            xs: axis(min.x, max.x, divisions[0]),
            ys: axis(min.y, max.y, divisions[1]),
            zs: axis(min.z, max.z, divisions[2]),
        })
    }

    fn dims(&self) -> [usize; 3] {
        [self.xs.len() - 1, self.ys.len() - 1, self.zs.len() - 1]
    }

    fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.xs.len() * (j + self.ys.len() * k)
    }

    /// Meshes the grid; `region(i, j, k)` assigns each hex cell.
    pub fn build(&self, region: impl Fn(usize, usize, usize) -> Region) -> Result<Mesh> {
        for axis in [&self.xs, &self.ys, &self.zs] {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config("grid coordinates must be strictly increasing"));
            }
        }
        let [nx, ny, nz] = self.dims();
        let mut nodes = Vec::with_capacity(self.xs.len() * self.ys.len() * self.zs.len());
        for &z in &self.zs {
            for &y in &self.ys {
                for &x in &self.xs {
                    nodes.push(Vec3::new(x, y, z));
                }
            }
        }
        // Kuhn simplices: one per permutation of the axes
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut cells = Vec::with_capacity(6 * nx * ny * nz);
        let mut regions = Vec::with_capacity(6 * nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let r = region(i, j, k);
                    for perm in PERMS {
                        let mut ijk = [i, j, k];
                        let mut tet = [self.node_index(i, j, k); 4];
                        for (s, &axis) in perm.iter().enumerate() {
                            ijk[axis] += 1;
                            tet[s + 1] = self.node_index(ijk[0], ijk[1], ijk[2]);
                        }
                        cells.push(tet);
                        regions.push(r);
                    }
                }
            }
        }

        let (x0, x1) = (self.xs[0], self.xs[nx]);
        let (y0, y1) = (self.ys[0], self.ys[ny]);
        let (z0, z1) = (self.zs[0], self.zs[nz]);
        let on = |face: &[usize; 3], pick: fn(&Vec3) -> f64, value: f64, nodes: &[Vec3]| {
            face.iter().all(|&n| pick(&nodes[n]) == value)
        };
        let node_copy = nodes.clone();
        Mesh::build(nodes, cells, regions, |face, own, other| {
            let nodes = &node_copy;
            if other.is_some() {
                return Some(BoundaryTag::Surface);
            }
            let top = on(face, |p| p.z, z1, nodes);
            let bottom = on(face, |p| p.z, z0, nodes);
            let side = on(face, |p| p.x, x0, nodes)
                || on(face, |p| p.x, x1, nodes)
                || on(face, |p| p.y, y0, nodes)
                || on(face, |p| p.y, y1, nodes);
            Some(match (own, top, bottom, side) {
                (Region::Vacuum, true, _, _) => BoundaryTag::Anode,
                (Region::Vacuum, _, true, _) => BoundaryTag::Surface,
                (Region::Vacuum, _, _, true) => BoundaryTag::Lateral,
                (Region::Metal, _, true, _) => BoundaryTag::MetalBase,
                (Region::Metal, true, _, _) => BoundaryTag::Surface,
                (Region::Metal, _, _, true) => BoundaryTag::MetalSide,
                _ => return None,
            })
        })
    }
}

/// Vacuum box (optionally over a metal slab), tagged: anode on top, lateral
/// sides, emitting surface at z = 0, metal sides and metal base below.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxMeshSpec {
    pub width: f64,
    pub depth: f64,
    /// Height of the vacuum gap above z = 0 (zero for a metal-only box).
    pub gap: f64,
    /// Thickness of the metal slab below z = 0 (zero for vacuum only).
    pub metal_height: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz_vacuum: usize,
    pub nz_metal: usize,
    /// Ratio between successive vacuum layer thicknesses, growing away from
    /// the surface (1 = uniform).
    pub grading: f64,
}

impl BoxMeshSpec {
    pub fn vacuum(width: f64, depth: f64, gap: f64, divisions: [usize; 3]) -> Self {
        Self {
            width,
            depth,
            gap,
            metal_height: 0.0,
            nx: divisions[0],
            ny: divisions[1],
            nz_vacuum: divisions[2],
            nz_metal: 0,
            grading: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::config("lateral mesh divisions must be positive"));
        }
        if !(self.width > 0.0 && self.depth > 0.0) {
            return Err(Error::config("box width and depth must be positive"));
        }
        if !(self.gap >= 0.0 && self.metal_height >= 0.0) || self.gap + self.metal_height <= 0.0 {
            return Err(Error::config("box must have positive height"));
        }
        if (self.gap > 0.0) != (self.nz_vacuum > 0) || (self.metal_height > 0.0) != (self.nz_metal > 0) {
            return Err(Error::config("each non-empty layer needs at least one division"));
        }
        if !(self.grading > 0.0) {
            return Err(Error::config("grading ratio must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn graded_axis(start: f64, length: f64, n: usize, ratio: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|i| ratio.powi(i as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(start);
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        out.push(if i + 1 == n { start + length } else { start + length * acc / total });
    }
    out
}

pub fn build_layered_box(spec: &BoxMeshSpec) -> Result<Mesh> {
    spec.validate()?;
    let mut zs = if spec.nz_metal > 0 {
        graded_axis(-spec.metal_height, spec.metal_height, spec.nz_metal, 1.0)
    } else {
        vec![0.0]
    };
    if spec.nz_vacuum > 0 {
        zs.extend(graded_axis(0.0, spec.gap, spec.nz_vacuum, spec.grading).into_iter().skip(1));
    }
    let grid = VoxelGrid {
        xs: graded_axis(0.0, spec.width, spec.nx, 1.0),
        ys: graded_axis(0.0, spec.depth, spec.ny, 1.0),
        zs,
    };
    let nz_metal = spec.nz_metal;
    grid.build(|_, _, k| if k < nz_metal { Region::Metal } else { Region::Vacuum })
}

/// Vacuum box `width x depth x gap` on top of the emitting plane z = 0.
pub fn build_box_mesh(width: f64, depth: f64, gap: f64, divisions: [usize; 3]) -> Result<Mesh> {
    build_layered_box(&BoxMeshSpec::vacuum(width, depth, gap, divisions))
}

/// Square metal post standing on a metal slab, surrounded by vacuum.
#[derive(Clone, Debug, PartialEq)]
pub struct PostSpec {
    pub width: f64,
    pub height: f64,
    pub slab: f64,
    pub post_width: f64,
    pub post_height: f64,
    /// Cell size in the lateral directions and vertically.
    pub spacing: f64,
}

impl Default for PostSpec {
    fn default() -> Self {
        Self {
            width: 8.0,
            height: 10.0,
            slab: 2.0,
            post_width: 2.0,
            post_height: 4.0,
            spacing: 1.0,
        }
    }
}

pub fn build_post_mesh(spec: &PostSpec) -> Result<Mesh> {
    let steps = |len: f64| (len / spec.spacing).round().max(1.0) as usize;
    let n_lat = steps(spec.width);
    let n_post = steps(spec.post_width).min(n_lat);
    let n_slab = steps(spec.slab);
    let n_tip = steps(spec.post_height);
    let n_vac = steps(spec.height).max(n_tip + 1);
    let grid = VoxelGrid {
        xs: graded_axis(0.0, spec.width, n_lat, 1.0),
        ys: graded_axis(0.0, spec.width, n_lat, 1.0),
        zs: {
            let mut z = graded_axis(-spec.slab, spec.slab, n_slab, 1.0);
            z.extend(graded_axis(0.0, spec.height, n_vac, 1.0).into_iter().skip(1));
            z
        },
    };
    let lo = (n_lat - n_post) / 2;
    let hi = lo + n_post;
    grid.build(|i, j, k| {
        let in_post = (lo..hi).contains(&i) && (lo..hi).contains(&j) && k < n_slab + n_tip;
        if k < n_slab || in_post {
            Region::Metal
        } else {
            Region::Vacuum
        }
    })
}
