use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tm_core::fem::{assemble_mass, assemble_stiffness, laplace_beltrami_eigs, solve_nonsymmetric, FemOperators};
use tm_core::{icosphere, SparseMatrix, SurfaceMesh};

fn m_inner(m: &SparseMatrix, a: &[f64], b: &[f64]) -> f64 {
    m.bilinear(a, b)
}

#[test]
fn sphere_spectrum_level5() {
    let mesh = icosphere(5).unwrap();
    let ops = FemOperators::new(&mesh).unwrap();
    let eig = laplace_beltrami_eigs(ops.mass(), ops.stiffness(), 16).unwrap();
    assert!(eig.values[0].abs() < 1e-8);
    for (range, target) in [(1..4, 2.0), (4..9, 6.0), (9..16, 12.0)] {
        for i in range {
            assert!((eig.values[i] - target).abs() < 0.01 * target, "λ{i} = {}", eig.values[i]);
        }
    }
    for i in 0..16 {
        for j in 0..=i {
            let g = m_inner(ops.mass(), &eig.vectors[i], &eig.vectors[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-8, "({i},{j}) = {g}");
        }
        if i > 0 {
            let aw = ops.stiffness().mul_vec(&eig.vectors[i]).unwrap();
            let mw = ops.mass().mul_vec(&eig.vectors[i]).unwrap();
            let res: f64 = aw.iter().zip(&mw).map(|(a, m)| (a - eig.values[i] * m).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = aw.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * norm);
        }
    }
}

#[test]
fn first_eigenvalue_converges_monotonically() {
    let mut prev = f64::INFINITY;
    for level in 2..=5 {
        let ops = FemOperators::new(&icosphere(level).unwrap()).unwrap();
        let l1 = laplace_beltrami_eigs(ops.mass(), ops.stiffness(), 2).unwrap().values[1];
        let err = (l1 - 2.0).abs();
        assert!(err < prev, "level {level}: {l1}");
        prev = err;
    }
}

#[test]
fn constants_are_in_the_kernel_of_the_shifted_system() {
    let mesh = icosphere(3).unwrap();
    let ops = FemOperators::new(&mesh).unwrap();
    let system = ops.mass().add_scaled(1.0, ops.stiffness(), 1.0).unwrap();
    let rhs = ops.mass().mul_vec(&vec![1.0; mesh.vertex_count()]).unwrap();
    let x = solve_nonsymmetric(&system, &rhs, 1e-12, 10 * mesh.vertex_count()).unwrap();
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn bicgstab_matches_dense_lu() {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut triplets = Vec::new();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for _ in 0..6 {
            let j = rng.random_range(0..n);
            if j != i {
                let v: f64 = rng.random_range(-1.0..1.0);
                triplets.push((i, j, v));
                dense[(i, j)] += v;
                off += v.abs();
            }
        }
        let diag = off + 1.0 + rng.random::<f64>();
        triplets.push((i, i, diag));
        dense[(i, i)] += diag;
    }
    let a = SparseMatrix::from_triplets(n, n, &triplets).unwrap();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = solve_nonsymmetric(&a, &b, 1e-12, 1000).unwrap();
    let exact = dense.lu().solve(&DVector::from_vec(b)).unwrap();
    for (xi, ei) in x.iter().zip(exact.iter()) {
        assert!((xi - ei).abs() < 1e-8);
    }
}

#[test]
fn mass_and_stiffness_properties_across_levels() {
    for level in 0..=4 {
        let mesh = icosphere(level).unwrap();
        let m = assemble_mass(&mesh);
        let a = assemble_stiffness(&mesh).unwrap();
        assert!((m.total() - mesh.surface_area()).abs() <= 1e-10 * mesh.surface_area());
        assert!(m.asymmetry() == 0.0 && a.asymmetry() < 1e-14);
        assert!(m.diagonal().iter().all(|&d| d > 0.0));
        let a1 = a.mul_vec(&vec![1.0; mesh.vertex_count()]).unwrap();
        assert!(a1.iter().all(|v| v.abs() <= 1e-10));
        let x: Vec<f64> = (0..mesh.vertex_count()).map(|i| (i as f64).sin()).collect();
        assert!(a.bilinear(&x, &x) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn assembly_independent_of_triangle_order(seed in any::<u64>()) {
        let mesh = icosphere(2).unwrap();
        let mut tris = mesh.triangles().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..tris.len()).rev() {
            tris.swap(i, rng.random_range(0..=i));
        }
        // also rotate each triangle's vertex list (orientation preserved)
        for t in tris.iter_mut() {
            t.rotate_left(rng.random_range(0..3));
        }
        let shuffled = SurfaceMesh::new(mesh.vertices().to_vec(), tris).unwrap();
        let (m1, m2) = (assemble_mass(&mesh), assemble_mass(&shuffled));
        let (a1, a2) = (assemble_stiffness(&mesh).unwrap(), assemble_stiffness(&shuffled).unwrap());
        for r in 0..mesh.vertex_count() {
            for (c, v) in m1.row(r) {
                prop_assert!((v - m2.get(r, c)).abs() <= 1e-13);
            }
            for (c, v) in a1.row(r) {
                prop_assert!((v - a2.get(r, c)).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn mass_total_equals_area_on_scaled_meshes(scale in 0.1f64..10.0, dx in -3.0f64..3.0) {
        let mesh = icosphere(2).unwrap().map_vertices(|p| [scale * p[0] + dx, scale * p[1], scale * p[2]]).unwrap();
        let m = assemble_mass(&mesh);
        let a = assemble_stiffness(&mesh).unwrap();
        prop_assert!((m.total() - mesh.surface_area()).abs() <= 1e-10 * mesh.surface_area());
        let a1 = a.mul_vec(&vec![1.0; mesh.vertex_count()]).unwrap();
        prop_assert!(a1.iter().all(|v| v.abs() <= 1e-10));
    }
}
