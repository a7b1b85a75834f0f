//! Property tests over random meshes and fields.

use std::sync::Arc;

use curlrec::broken::{edge_rule, jump_c, VectorField};
use curlrec::mesh::Mesh;
use curlrec::reconstruct::reconstruct;
use curlrec::BrokenField;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A square or L-shape mesh refined a few times at pseudo-random cells.
fn graded_mesh(l_shape: bool, marks: &[usize]) -> Mesh {
    let mut mesh = if l_shape { Mesh::l_shape(1) } else { Mesh::unit_square(2) };
    for &m in marks {
        let cell = m % mesh.num_cells();
        mesh = mesh.refine(&[cell]);
    }
    mesh
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_preserves_area_and_partition_of_unity(l_shape: bool, marks in prop::collection::vec(0usize..1000, 0..5)) {
        let coarse = graded_mesh(l_shape, &[]);
        let mesh = graded_mesh(l_shape, &marks);
        let area = |m: &Mesh| (0..m.num_cells()).map(|k| m.geometry(k).area()).sum::<f64>();
        prop_assert!((area(&coarse) - area(&mesh)).abs() < 1e-12);
        for k in 0..mesh.num_cells() {
            let x = mesh.geometry(k).centroid;
            let sum: f64 = mesh.cells()[k].iter().map(|&v| mesh.vertex_patch(v).hat(&mesh, k, x)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn reconstruction_is_conforming(l_shape: bool, marks in prop::collection::vec(0usize..1000, 0..3), p in 0usize..3, seed: u64) {
        let mesh = Arc::new(graded_mesh(l_shape, &marks));
        let eh = BrokenField::random(&mesh, p, 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let ec = reconstruct(&eh, p + 2).unwrap();
        let rule = edge_rule(2 * p + 4);
        for e in 0..mesh.num_edges() {
            prop_assert!(jump_c(&mesh, &ec, e, &rule).iter().all(|j| j.abs() < 1e-10));
        }
    }

    #[test]
    fn reconstruction_is_linear(seed: u64, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mesh = Arc::new(Mesh::l_shape(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = BrokenField::random(&mesh, 1, 2, &mut rng);
        let v = BrokenField::random(&mesh, 1, 2, &mut rng);
        let combined = reconstruct(&u.scaled(a).add(&v.scaled(b)), 3).unwrap();
        let (ru, rv) = (reconstruct(&u, 3).unwrap(), reconstruct(&v, 3).unwrap());
        for ((c, x), y) in combined.coefficients().iter().zip(ru.coefficients()).zip(rv.coefficients()) {
            prop_assert!((c - a * x - b * y).abs() < 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn conforming_summands_pass_through(seed: u64) {
        // Adding a field of degree p in H0(curl) shifts R by exactly that field.
        let mesh = Arc::new(Mesh::unit_square(2));
        let eh = BrokenField::random(&mesh, 2, 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let bubble = BrokenField::l2_project(&mesh, 2, |x| [x[1] * (1.0 - x[1]), x[0] * x[0] - x[0]]);
        let shifted = reconstruct(&eh.add(&bubble), 4).unwrap();
        let base = reconstruct(&eh, 4).unwrap();
        let rule = curlrec::quadrature::TriangleRule::exact_to(6);
        for k in 0..mesh.num_cells() {
            let g = mesh.geometry(k);
            for &xi in &rule.points {
                let x = g.to_physical(xi);
                let (s, b, e) = (shifted.value(k, x), base.value(k, x), bubble.value(k, x));
                prop_assert!((s[0] - b[0] - e[0]).abs() < 1e-9 && (s[1] - b[1] - e[1]).abs() < 1e-9);
            }
        }
    }
}
