//! Walking point location.

use super::{BoundaryTag, Mesh, Neighbor, TOL_INSIDE};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    /// The walk left the region through boundary face `face`.
    Outside { face: usize, tag: BoundaryTag },
}

impl Location {
    pub fn cell(self) -> Option<usize> {
        match self {
            Location::Inside(c) => Some(c),
            Location::Outside { .. } => None,
        }
    }
}

impl Mesh {
    /// Finds the cell containing `point` by walking from `hint` through the
    /// face with the most negative barycentric coordinate. The walk stays in
    /// the region of `hint`.
    ///
    /// When the most negative face is a boundary but another violated face
    /// leads to a cell, the walk continues there; this lets it round corners
    /// of non-convex regions. It reports `Outside` only when every violated
    /// face is a boundary.
    pub fn locate_cell(&self, point: &Vec3, hint: usize) -> Result<Location> {
        let max_steps = self.num_cells() + 1;
        let mut cell = hint;
        let mut prev = usize::MAX;
        for _ in 0..max_steps {
            let lambda = self.barycentric(point, cell);
            let mut order = [0usize, 1, 2, 3];
            order.sort_unstable_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
            if lambda[order[0]] >= -TOL_INSIDE {
                return Ok(Location::Inside(cell));
            }
            let mut exit = None;
            let mut next = None;
            for &i in &order {
                if lambda[i] >= -TOL_INSIDE {
                    break;
                }
                match self.neighbors(cell)[i] {
                    Neighbor::Cell(n) if n != prev => {
                        next = Some(n);
                        break;
                    }
                    Neighbor::Cell(_) => {}
                    Neighbor::Boundary(f) => {
                        exit.get_or_insert(f);
                    }
                }
            }
            match (next, exit) {
                (Some(n), _) => {
                    prev = cell;
                    cell = n;
                }
                (None, Some(face)) => {
                    return Ok(Location::Outside {
                        face,
                        tag: self.face(face).tag,
                    });
                }
                // only the way back is violated: numerical ping-pong on a shared face
                (None, None) => return Ok(Location::Inside(cell)),
            }
        }
        Err(Error::LocateCycle { steps: max_steps })
    }

    /// Follows the straight segment `from -> to` cell by cell, starting in
    /// `cell` (which should contain `from`). Returns the cell holding `to`,
    /// or the first boundary face the segment crosses. Unlike
    /// [`Mesh::locate_cell`] this is exact in non-convex regions.
    pub fn trace(&self, from: &Vec3, to: &Vec3, cell: usize) -> Result<Location> {
        let d = to - from;
        let max_steps = self.num_cells() + 1;
        let mut cell = cell;
        let mut prev = usize::MAX;
        for _ in 0..max_steps {
            let lambda = self.barycentric(to, cell);
            if lambda.iter().all(|&l| l >= -TOL_INSIDE) {
                return Ok(Location::Inside(cell));
            }
            let start = self.barycentric(from, cell);
            let grads = self.gradients(cell);
            // leave through the face whose coordinate reaches zero first
            let mut best: Option<(f64, usize)> = None;
            for i in 0..4 {
                let slope = grads[i].dot(&d);
                if slope >= 0.0 || lambda[i] >= -TOL_INSIDE {
                    continue;
                }
                if let Neighbor::Cell(n) = self.neighbors(cell)[i] {
                    if n == prev && best.is_some() {
                        continue;
                    }
                }
                let s = -start[i] / slope;
                if best.is_none_or(|(b, _)| s < b) {
                    best = Some((s, i));
                }
            }
            let Some((_, i)) = best else {
                return Ok(Location::Inside(cell));
            };
            match self.neighbors(cell)[i] {
                Neighbor::Cell(n) => {
                    prev = cell;
                    cell = n;
                }
                Neighbor::Boundary(face) => {
                    return Ok(Location::Outside { face, tag: self.face(face).tag });
                }
            }
        }
        Err(Error::LocateCycle { steps: max_steps })
    }

    /// Brute-force scan over all cells of `region`; the reference for
    /// [`Mesh::locate_cell`].
    pub fn locate_exhaustive(&self, point: &Vec3, region: super::Region) -> Option<usize> {
        self.cells_in(region).find(|&c| self.contains(point, c))
    }
}
