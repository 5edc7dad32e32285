//! Sub-quadrangles of surface triangles and uniform sampling on them.
//!
//! Each triangle is split into three quadrangles by joining its edge
//! midpoints to its centroid. The quadrangle at corner `A` of triangle `ABC`
//! is `A D O F` with `D`, `F` the midpoints of `AB`, `AC` and `O` the
//! centroid; it is the part of the triangle where `A` has the largest
//! barycentric weight.

use rand::Rng;

use super::Mesh;
use crate::Vec3;

/// Barycentric coordinates of a sub-quadrangle's area centroid with respect
/// to its triangle, corner vertex first.
pub const SUBQUAD_CENTROID: [f64; 3] = [11.0 / 18.0, 7.0 / 36.0, 7.0 / 36.0];

#[derive(Clone, Debug, PartialEq)]
pub struct SubQuad {
    pub face: usize,
    /// Local index (0..3) of the triangle vertex at the quadrangle's corner.
    pub corner: usize,
    /// Triangle vertices rotated so the corner comes first.
    pub triangle: [Vec3; 3],
    pub area: f64,
}

impl SubQuad {
    pub fn corner_point(&self) -> Vec3 {
        self.triangle[0]
    }

    /// Quadrangle vertices `A, D, O, F`.
    pub fn vertices(&self) -> [Vec3; 4] {
        let [a, b, c] = self.triangle;
        [a, 0.5 * (a + b), (a + b + c) / 3.0, 0.5 * (a + c)]
    }

    pub fn centroid(&self) -> Vec3 {
        let [a, b, c] = self.triangle;
        SUBQUAD_CENTROID[0] * a + SUBQUAD_CENTROID[1] * b + SUBQUAD_CENTROID[2] * c
    }

    /// Barycentric weights of the centroid in the face's own node order.
    pub fn centroid_weights(&self) -> [f64; 3] {
        let mut w = [0.0; 3];
        for (k, &s) in SUBQUAD_CENTROID.iter().enumerate() {
            w[(self.corner + k) % 3] = s;
        }
        w
    }
}

impl Mesh {
    /// The three sub-quadrangles of boundary face `face`.
    pub fn subquads(&self, face: usize) -> [SubQuad; 3] {
        let f = self.face(face);
        let p = f.nodes.map(|n| *self.node(n));
        std::array::from_fn(|corner| SubQuad {
            face,
            corner,
            triangle: [p[corner], p[(corner + 1) % 3], p[(corner + 2) % 3]],
            area: f.area / 3.0,
        })
    }
}

/// Barycentric coordinates of `p` projected onto the plane of `tri`.
pub fn triangle_barycentric(p: &Vec3, tri: &[Vec3; 3]) -> [f64; 3] {
    let v0 = tri[1] - tri[0];
    let v1 = tri[2] - tri[0];
    let v2 = p - tri[0];
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let l1 = (d11 * d20 - d01 * d21) / denom;
    let l2 = (d00 * d21 - d01 * d20) / denom;
    [1.0 - l1 - l2, l1, l2]
}

/// Uniform point on a sub-quadrangle: draw in the parallelogram spanned by
/// `AD` and `AF`, keep the draw if `A` has the largest barycentric weight.
/// Two thirds of the draws are accepted on average.
pub fn sample_point_in_subquad<R: Rng + ?Sized>(sq: &SubQuad, rng: &mut R) -> Vec3 {
    let [a, d, _, f] = sq.vertices();
    let ad = d - a;
    let af = f - a;
    loop {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let p = a + r1 * ad + r2 * af;
        let l = triangle_barycentric(&p, &sq.triangle);
        if l[0] >= l[1] && l[0] >= l[2] {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;
    use crate::rng::RngStream;

    fn polygon_area(v: &[Vec3]) -> f64 {
        let mut s = Vec3::zeros();
        for i in 0..v.len() {
            s += v[i].cross(&v[(i + 1) % v.len()]);
        }
        0.5 * s.norm()
    }

    #[test]
    fn subquads_tile_triangle() {
        let m = build_box_mesh(1.3, 0.7, 2.0, [2, 3, 2]).unwrap();
        for f in 0..m.faces().len() {
            let qs = m.subquads(f);
            let total: f64 = qs.iter().map(|q| polygon_area(&q.vertices())).sum();
            let area = m.face(f).area;
            assert!((total - area).abs() / area < 1e-12);
            for q in &qs {
                assert!((polygon_area(&q.vertices()) - area / 3.0).abs() / area < 1e-12);
            }
        }
    }

    #[test]
    fn centroid_weights_match_polygon_centroid() {
        let tri = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.2, 0.0), Vec3::new(0.5, 2.0, 0.0)];
        let sq = SubQuad { face: 0, corner: 0, triangle: tri, area: 0.0 };
        // centroid of polygon ADOF by triangle fan
        let v = sq.vertices();
        let mut c = Vec3::zeros();
        let mut total = 0.0;
        for i in 1..3 {
            let a = polygon_area(&[v[0], v[i], v[i + 1]]);
            c += a * (v[0] + v[i] + v[i + 1]) / 3.0;
            total += a;
        }
        c /= total;
        assert!((sq.centroid() - c).norm() < 1e-14);
    }

    #[test]
    fn samples_stay_in_corner_region() {
        let tri = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.2, 0.9, 0.0)];
        let sq = SubQuad { face: 0, corner: 0, triangle: tri, area: 0.0 };
        let mut rng = RngStream::from_seed(3);
        for _ in 0..10_000 {
            let p = sample_point_in_subquad(&sq, &mut rng);
            let l = triangle_barycentric(&p, &tri);
            assert!(l[0] >= l[1] && l[0] >= l[2]);
            assert!(l.iter().all(|&x| x >= -1e-12));
        }
    }
}
