use emitpic::fem::{
    add_neumann_flux, assemble_laplace, assemble_mass, boundary_flux, deposit_particles, eval_field, solve_cg,
    CgOptions, DofMap, Flux,
};
use emitpic::mesh::{build_box_mesh, BoundaryTag, Mesh, Region};
use emitpic::pic::Particle;
use emitpic::rng::RngStream;
use emitpic::{Error, Vec3};
use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;
use rand::Rng;

fn single_tet(p: [Vec3; 4]) -> Mesh {
    let cell = [0, 1, 2, 3];
    let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]].map(|f| (f, BoundaryTag::Lateral));
    Mesh::new(p.to_vec(), vec![cell], vec![Region::Vacuum], &faces).unwrap()
}

fn random_tet(rng: &mut RngStream) -> [Vec3; 4] {
    loop {
        let p: [Vec3; 4] = std::array::from_fn(|_| Vec3::new(rng.random(), rng.random(), rng.random()));
        let vol = (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))).abs() / 6.0;
        if vol > 0.01 {
            return p;
        }
    }
}

/// Shape-function gradients from the inverse of the interpolation matrix,
/// integrated with a symmetric 4-point rule.
fn stiffness_by_quadrature(p: &[Vec3; 4]) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    for (r, q) in p.iter().enumerate() {
        a.set_row(r, &nalgebra::RowVector4::new(1.0, q.x, q.y, q.z));
    }
    let coef = a.try_inverse().unwrap();
    let grad = |i: usize| Vec3::new(coef[(1, i)], coef[(2, i)], coef[(3, i)]);
    let vol = (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))).abs() / 6.0;
    let weights = Vector4::repeat(vol / 4.0);
    let mut m = Matrix4::zeros();
    for w in weights.iter() {
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] += w * grad(i).dot(&grad(j));
            }
        }
    }
    m
}

#[test]
fn unit_tet_stiffness_rows_sum_to_zero() {
    let m = single_tet([Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]);
    let sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    for i in 0..4 {
        let s: f64 = sys.matrix.row(i).map(|(_, v)| v).sum();
        assert!(s.abs() < 1e-15);
    }
    assert!((sys.matrix.get(0, 0) - 0.5).abs() < 1e-15);
    assert!(sys.rhs.iter().all(|&f| f == 0.0));
}

#[test]
fn stiffness_matches_quadrature() {
    let mut rng = RngStream::from_seed(17);
    for _ in 0..50 {
        let p = random_tet(&mut rng);
        let mesh = single_tet(p);
        let sys = assemble_laplace(&mesh, Region::Vacuum, |_| 1.0).unwrap();
        let oracle = stiffness_by_quadrature(&p);
        let cell = *mesh.cell(0);
        for a in 0..4 {
            for b in 0..4 {
                // the mesh may reorder the cell's vertices; compare by node id
                let (i, j) = (cell[a], cell[b]);
                assert!((sys.matrix.get(i, j) - oracle[(i, j)]).abs() < 1e-10 * oracle.abs().max());
            }
        }
    }
}

#[test]
fn nonpositive_coefficient_rejected() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [1, 1, 1]).unwrap();
    assert!(matches!(assemble_laplace(&m, Region::Vacuum, |_| 0.0), Err(Error::InvalidConfig(_))));
}

#[test]
fn global_matrix_symmetric_and_semidefinite() {
    let m = build_box_mesh(1.0, 2.0, 1.0, [2, 2, 2]).unwrap();
    let sys = assemble_laplace(&m, Region::Vacuum, |c| 1.0 + c as f64 * 0.1).unwrap();
    assert!(sys.matrix.is_symmetric(1e-14));
    let mut rng = RngStream::from_seed(3);
    let n = sys.dofs.len();
    for _ in 0..20 {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y = vec![0.0; n];
        sys.matrix.mul_vec(&x, &mut y);
        let q: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(q >= -1e-12);
    }
}

#[test]
fn mass_matrix_integrates_one() {
    let mut rng = RngStream::from_seed(8);
    let p = random_tet(&mut rng);
    let mesh = single_tet(p);
    let sys = assemble_laplace(&mesh, Region::Vacuum, |_| 1.0).unwrap();
    let dofs = DofMap::for_region(&mesh, Region::Vacuum);
    let c = assemble_mass(&mesh, &dofs, &sys.matrix, |_| 3.0);
    let total: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| c.get(i, j)).sum();
    assert!((total - 3.0 * mesh.volume(0)).abs() < 1e-14);
    assert!((c.get(0, 0) - 2.0 * c.get(0, 1)).abs() < 1e-15);
}

#[test]
fn neumann_flux_partition_of_unity() {
    let m = build_box_mesh(3.0, 2.0, 1.0, [3, 2, 2]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    add_neumann_flux(&mut sys, &m, BoundaryTag::Anode, Flux::Uniform(0.0)).unwrap();
    assert!(sys.rhs.iter().all(|&f| f == 0.0));
    add_neumann_flux(&mut sys, &m, BoundaryTag::Anode, Flux::Uniform(2.5)).unwrap();
    let total: f64 = sys.rhs.iter().sum();
    assert!((total - 2.5 * 6.0).abs() < 1e-12);
}

#[test]
fn neumann_flux_single_triangle() {
    // right triangle with legs 2 has area 2
    let p = [Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
    let cell = [0, 1, 2, 3];
    let faces = [
        ([1, 2, 3], BoundaryTag::Lateral),
        ([0, 2, 3], BoundaryTag::Lateral),
        ([0, 1, 3], BoundaryTag::Lateral),
        ([0, 1, 2], BoundaryTag::Anode),
    ];
    let m = Mesh::new(p.to_vec(), vec![cell], vec![Region::Vacuum], &faces).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    add_neumann_flux(&mut sys, &m, BoundaryTag::Anode, Flux::Uniform(3.0)).unwrap();
    for n in 0..3 {
        assert!((sys.rhs[sys.dofs.dof(n).unwrap()] - 2.0).abs() < 1e-14);
    }
    assert_eq!(sys.rhs[sys.dofs.dof(3).unwrap()], 0.0);
    let err = add_neumann_flux(&mut sys, &m, BoundaryTag::MetalBase, Flux::Uniform(1.0));
    assert!(matches!(err, Err(Error::InvalidConfig(_))));
}

fn particles_in(mesh: &Mesh, rng: &mut RngStream, n: usize) -> Vec<Particle> {
    let b = mesh.bounds();
    (0..n)
        .map(|k| {
            let pos = b.min + b.extent().component_mul(&Vec3::new(rng.random(), rng.random(), rng.random()));
            let cell = mesh.locate_exhaustive(&pos, Region::Vacuum).unwrap();
            Particle { pos, vel: Vec3::zeros(), cell, id: k as u64 }
        })
        .collect()
}

#[test]
fn deposit_at_vertex_and_centroid() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [2, 2, 2]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    let c = 5;
    let vertex = m.cell(c)[2];
    let ps = [Particle { pos: *m.node(vertex), vel: Vec3::zeros(), cell: c, id: 0 }];
    deposit_particles(&mut sys, &m, &ps, 2.0).unwrap();
    for (d, f) in sys.rhs.iter().enumerate() {
        assert_eq!(*f, if sys.dofs.node(d) == vertex { 2.0 } else { 0.0 });
    }
    sys.rhs.iter_mut().for_each(|f| *f = 0.0);
    let ps = [Particle { pos: m.centroid(c), vel: Vec3::zeros(), cell: c, id: 0 }];
    deposit_particles(&mut sys, &m, &ps, 1.0).unwrap();
    for n in m.cell(c) {
        assert!((sys.rhs[sys.dofs.dof(*n).unwrap()] - 0.25).abs() < 1e-15);
    }
    assert_eq!(sys.rhs.iter().filter(|&&f| f != 0.0).count(), 4);
}

#[test]
fn deposit_conserves_charge() {
    let m = build_box_mesh(2.0, 1.0, 1.5, [3, 2, 4]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    let mut rng = RngStream::from_seed(21);
    let ps = particles_in(&m, &mut rng, 20_000);
    let factor = -1.602e-19 * 0.01 / 8.854e-12;
    deposit_particles(&mut sys, &m, &ps, factor).unwrap();
    let total: f64 = sys.rhs.iter().sum();
    let expected = ps.len() as f64 * factor;
    assert!(((total - expected) / expected).abs() < 1e-12);
}

#[test]
fn stale_cell_is_reported() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [2, 2, 2]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    let far = m.centroid(m.num_cells() - 1);
    let ps = [Particle { pos: far, vel: Vec3::zeros(), cell: 0, id: 0 }];
    assert!(matches!(deposit_particles(&mut sys, &m, &ps, 1.0), Err(Error::StaleCellIndex { cell: 0 })));
}

#[test]
fn zero_data_gives_zero_solution() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [3, 3, 3]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
    let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    assert!(phi.values.iter().all(|&v| v == 0.0));
}

#[test]
fn no_dirichlet_is_rejected() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [1, 1, 1]).unwrap();
    let sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    assert!(solve_cg(&sys, CgOptions::default(), None).is_err());
}

#[test]
fn iteration_cap_gives_no_convergence() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [4, 4, 4]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Anode, 1.0).unwrap();
    let opts = CgOptions { tol_rel: 1e-14, max_iter: 1 };
    assert!(matches!(solve_cg(&sys, opts, None), Err(Error::NoConvergence { .. })));
}

#[test]
fn neumann_anode_gives_linear_potential() {
    let e0 = 0.6e9;
    let d = 18.2e-9;
    let m = build_box_mesh(11.6e-9, 11.6e-9, d, [3, 3, 8]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
    add_neumann_flux(&mut sys, &m, BoundaryTag::Anode, Flux::Uniform(e0)).unwrap();
    let (phi, stats) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    assert!(stats.residual <= 1e-10);
    for (dof, v) in phi.values.iter().enumerate() {
        let z = m.node(phi.dofs.node(dof)).z;
        assert!((v - e0 * z).abs() <= 1e-8 * e0 * d, "z {z} phi {v}");
    }
    for c in 0..m.num_cells() {
        let e = eval_field(&m, &phi, c);
        assert!((e - Vec3::new(0.0, 0.0, -e0)).norm() <= 1e-8 * e0);
    }
}

#[test]
fn manufactured_linear_solution() {
    let m = build_box_mesh(1.0, 1.3, 0.7, [4, 5, 3]).unwrap();
    let exact = |p: &Vec3| p.x + 2.0 * p.y + 3.0 * p.z;
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    for tag in [BoundaryTag::Anode, BoundaryTag::Surface, BoundaryTag::Lateral] {
        for &f in m.faces_with_tag(tag) {
            for &n in &m.face(f).nodes {
                sys.constrain(sys.dofs.dof(n).unwrap(), exact(m.node(n)));
            }
        }
    }
    let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    for (dof, v) in phi.values.iter().enumerate() {
        assert!((v - exact(m.node(phi.dofs.node(dof)))).abs() < 1e-9);
    }
    let e = eval_field(&m, &phi, 7);
    assert!((e + Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-8);
}

#[test]
fn constant_potential_has_no_field() {
    let m = build_box_mesh(1.0, 1.0, 1.0, [2, 2, 2]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Surface, 4.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Anode, 4.0).unwrap();
    let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    for c in 0..m.num_cells() {
        assert!(eval_field(&m, &phi, c).norm() < 1e-9);
    }
}

/// `phi = z^2` with `-lap phi = -2`: max error of the cell gradient against
/// the exact gradient at the cell centroid.
fn quadratic_gradient_error(n: usize) -> f64 {
    let m = build_box_mesh(1.0, 1.0, 1.0, [n, n, n]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    let source = vec![-2.0; m.num_cells()];
    emitpic::fem::add_volume_source(&mut sys, &m, &source);
    sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Anode, 1.0).unwrap();
    let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    (0..m.num_cells())
        .map(|c| {
            let g = -eval_field(&m, &phi, c);
            (g - Vec3::new(0.0, 0.0, 2.0 * m.centroid(c).z)).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn gradient_converges_first_order() {
    let errs: Vec<f64> = [2, 4, 8].iter().map(|&n| quadratic_gradient_error(n)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0]);
        let order = (w[0] / w[1]).log2();
        assert!(order > 0.9, "errors {errs:?}");
    }
}

#[test]
fn diode_error_decreases_with_refinement() {
    // uniform space charge between plates: phi = V z/d + rho/(2 eps) z (d - z)
    let d = 1.0;
    let v = 1.0;
    let s = 4.0;
    let exact = |z: f64| v * z / d + s / 2.0 * z * (d - z);
    let mut last = f64::INFINITY;
    for n in [2, 4, 8, 16] {
        let m = build_box_mesh(0.5, 0.5, d, [1, 1, n]).unwrap();
        let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
        emitpic::fem::add_volume_source(&mut sys, &m, &vec![s; m.num_cells()]);
        sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
        sys.constrain_tag(&m, BoundaryTag::Anode, v).unwrap();
        let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
        let err = (0..phi.values.len())
            .map(|k| (phi.values[k] - exact(m.node(phi.dofs.node(k)).z)).abs())
            .fold(0.0, f64::max);
        let mid = (0..m.num_cells())
            .map(|c| (phi.interpolate(&m, c, &m.centroid(c)) - exact(m.centroid(c).z)).abs())
            .fold(err, f64::max);
        assert!(mid < last, "n = {n}: {mid} vs {last}");
        last = mid;
    }
}

#[test]
fn reaction_flux_recovers_plate_field() {
    let e0 = 2.0e8;
    let m = build_box_mesh(3.0, 2.0, 1.0, [3, 2, 5]).unwrap();
    let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
    sys.constrain_tag(&m, BoundaryTag::Surface, 0.0).unwrap();
    add_neumann_flux(&mut sys, &m, BoundaryTag::Anode, Flux::Uniform(e0)).unwrap();
    let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
    let flux = boundary_flux(&sys, &m, &phi, BoundaryTag::Surface).unwrap();
    // outward normal of the vacuum at the cathode is -z, so d(phi)/dn = -E0
    assert!((flux.total() + e0 * 6.0).abs() < 1e-9 * e0 * 6.0);
    for &n in &flux.nodes {
        assert!((flux.density(n).unwrap() + e0).abs() < 1e-8 * e0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deposit_touches_at_most_four_entries(seed in any::<u64>()) {
        let m = build_box_mesh(1.0, 1.0, 1.0, [3, 3, 3]).unwrap();
        let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
        let mut rng = RngStream::from_seed(seed);
        let ps = particles_in(&m, &mut rng, 1);
        deposit_particles(&mut sys, &m, &ps, 1.0).unwrap();
        prop_assert!(sys.rhs.iter().filter(|&&f| f != 0.0).count() <= 4);
        prop_assert!((sys.rhs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_charge_no_flux_gives_dirichlet_value(value in -10.0f64..10.0, n in 1usize..4) {
        let m = build_box_mesh(1.0, 1.0, 1.0, [n, n, n]).unwrap();
        let mut sys = assemble_laplace(&m, Region::Vacuum, |_| 1.0).unwrap();
        sys.constrain_tag(&m, BoundaryTag::Surface, value).unwrap();
        let (phi, _) = solve_cg(&sys, CgOptions::default(), None).unwrap();
        for v in &phi.values {
            prop_assert!((v - value).abs() <= 1e-9 * value.abs().max(1.0));
        }
    }
}
