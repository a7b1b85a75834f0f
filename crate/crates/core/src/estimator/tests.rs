use std::sync::Arc;

use super::*;
use crate::broken::basis::{dim, physical_values_and_gradients};
use crate::broken::Analytic;
use crate::dg::{DGConfig, MaterialModel};
use crate::mesh::Mesh;
use crate::problems::{Problem, ProblemKind};
use nalgebra::{DMatrix, DVector};

fn disc(n: usize, p: usize) -> Discretization {
    let mesh = Arc::new(Mesh::unit_square(n));
    let mat = MaterialModel::uniform(&mesh, 1.0, 1.0, 1.0).unwrap();
    Discretization::new(&mesh, mat, DGConfig::auto(&mesh, p)).unwrap()
}

#[test]
fn exact_quadratic_solution_has_vanishing_indicators() {
    let pb = Problem::standard(ProblemKind::Polynomial);
    let d = disc(2, 2);
    let source = SourceTerm::from_problem(&pb);
    let (eh, _) = d.solve(&source).unwrap();
    let exact = Analytic { value: move |x| pb.exact(x).unwrap(), curl: move |x| pb.exact_curl(x).unwrap() };
    let r = estimate(&d, &eh, &source, Some(&exact));
    assert!(r.total() <= 1e-8, "{}", r.total());
    assert!(r.total_div() <= 1e-8 && r.total_curl() <= 1e-8 && r.total_nc() <= 1e-8);
    assert_eq!(r.effectivity(), Some(Effectivity::Exact));
}

#[test]
fn zero_field_with_constant_source() {
    let d = disc(2, 1);
    let eh = BrokenField::zeros(d.mesh(), 1, 2);
    let r = estimate(&d, &eh, &SourceTerm::with_divergence(|_| [2.0, 2.0], |_| 0.0), None);
    for k in 0..d.mesh().num_cells() {
        let g = d.mesh().geometry(k);
        assert!(r.eta_div[k].abs() < 1e-14);
        let expect = g.diameter * (8.0 * g.area()).sqrt();
        assert!((r.eta_curl[k] - expect).abs() < 1e-12 * expect);
        assert_eq!(r.eta_nc[k], 0.0);
    }
    assert!(r.effectivity().is_none());
}

#[test]
fn divergence_term_by_hand_with_and_without_exact_divergence() {
    let d = disc(2, 2);
    let eh = BrokenField::zeros(d.mesh(), 2, 2);
    for source in [SourceTerm::with_divergence(|x| [x[0], 0.0], |_| 1.0), SourceTerm::new(|x| [x[0], 0.0])] {
        let r = estimate(&d, &eh, &source, None);
        assert_eq!(r.div_surrogate, !source.has_divergence());
        for k in 0..d.mesh().num_cells() {
            let g = d.mesh().geometry(k);
            let expect = g.diameter / 2.0 * g.area().sqrt();
            assert!((r.eta_div[k] - expect).abs() < 1e-12, "{} vs {expect}", r.eta_div[k]);
        }
    }
}

#[test]
fn nonconformity_indicator_by_hand() {
    // E_h = 0 on the left cell, -t_F on the right one: [E_h]^c = 1 on the
    // diagonal, +-1/sqrt2 on the two boundary edges of the right cell.
    let d = disc(1, 1);
    let mesh = d.mesh();
    let e = mesh.edges().iter().position(|e| !e.is_boundary()).unwrap();
    let edge = mesh.edges()[e].clone();
    let right = edge.right.unwrap();
    let t = edge.tangent;
    let mut eh = BrokenField::zeros(mesh, 1, 2);
    eh.cell_block_mut(right).copy_from_slice(BrokenField::l2_project(mesh, 1, |_| [-t[0], -t[1]]).cell_block(right));
    let r = estimate(&d, &eh, &SourceTerm::zero(), None);
    let s2 = 2f64.sqrt();
    // weight (omega^2 eps h + nu p^2/h) with h = sqrt2
    let weight = s2 + 1.0 / s2;
    assert!((r.eta_nc[edge.left].powi(2) - weight * s2).abs() < 1e-12);
    assert!((r.eta_nc[right].powi(2) - weight * (s2 + 1.0)).abs() < 1e-12);
}

#[test]
fn conforming_fields_have_no_nonconformity() {
    let d = disc(3, 2);
    let eh = BrokenField::l2_project(d.mesh(), 2, |x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])]);
    let r = estimate(&d, &eh, &SourceTerm::zero(), None);
    assert!(r.total_nc() < 1e-12);
}

#[test]
fn indicators_are_homogeneous() {
    let pb = Problem::standard(ProblemKind::Trigonometric);
    let d = disc(2, 1);
    let source = SourceTerm::from_problem(&pb);
    let (eh, _) = d.solve(&source).unwrap();
    let a = estimate(&d, &eh, &source, None);
    let b = estimate(&d, &eh.scaled(-3.0), &source.scaled(-3.0), None);
    for k in 0..d.mesh().num_cells() {
        for (x, y) in [(a.eta_div[k], b.eta_div[k]), (a.eta_curl[k], b.eta_curl[k]), (a.eta_nc[k], b.eta_nc[k])] {
            assert!((3.0 * x - y).abs() <= 1e-10 * y.max(1e-12));
        }
        let total = a.eta_cell(k).powi(2);
        assert!((total - a.eta_div[k].powi(2) - a.eta_curl[k].powi(2) - a.eta_nc[k].powi(2)).abs() <= 1e-15 * total);
    }
    let csv = a.to_csv();
    assert!(csv.starts_with("cell,eta_div,eta_curl,eta_nc,eta\n"));
    assert_eq!(csv.lines().count(), d.mesh().num_cells() + 1);
}

#[test]
fn oscillation_vanishes_for_polynomial_data_and_converges() {
    let d = disc(2, 2);
    let osc = oscillation(&d, &SourceTerm::with_divergence(|x| [x[0] * x[1], x[0] * x[0]], |x| x[1]));
    assert!(osc.iter().all(|o| *o < 1e-12));
    let rates: Vec<f64> = [2, 4]
        .iter()
        .map(|&n| {
            let d = disc(n, 1);
            let src = SourceTerm::with_divergence(|x| [x[0].sin(), 0.0], |x| x[0].cos());
            oscillation_terms(&d, &src).iter().sum::<f64>().sqrt()
        })
        .collect();
    assert!((rates[0] / rates[1]).log2() >= 2.0 - 0.1, "{rates:?}");
}

#[test]
fn oscillation_surrogate_dominates_true_minimum() {
    // minimize over J_h in P_p(K)^2 on one cell by least squares on a quadrature
    // discretization of both terms; the projection choice can only be larger.
    let d = disc(1, 1);
    let p = 1;
    let src = SourceTerm::with_divergence(
        |x| [(2.0 * x[0]).sin(), (x[1] * x[0]).exp()],
        |x| 2.0 * (2.0 * x[0]).cos() + x[0] * (x[1] * x[0]).exp(),
    );
    let k = 0;
    let mesh = d.mesh();
    let g = mesh.geometry(k);
    let hp = g.diameter / p as f64;
    let rule = crate::quadrature::TriangleRule::exact_to(16);
    let n = dim(p);
    let rows = 3 * rule.len();
    let mut a = DMatrix::<f64>::zeros(rows, 2 * n);
    let mut b = DVector::<f64>::zeros(rows);
    let mut phi = vec![0.0; n];
    let mut grad = vec![[0.0; 2]; n];
    for (q, (&xi, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let x = g.to_physical(xi);
        physical_values_and_gradients(g, p, x, &mut phi, &mut grad);
        let s = (w * g.det).sqrt() * hp;
        let j = src.value(x);
        for i in 0..n {
            a[(3 * q, i)] = s * phi[i];
            a[(3 * q + 1, n + i)] = s * phi[i];
            a[(3 * q + 2, i)] = s * grad[i][0];
            a[(3 * q + 2, n + i)] = s * grad[i][1];
        }
        b[3 * q] = s * j[0];
        b[3 * q + 1] = s * j[1];
        b[3 * q + 2] = s * src.divergence(x).unwrap();
    }
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-14).unwrap();
    let min = (&a * c - &b).norm_squared();
    let surrogate = oscillation_terms(&d, &src)[k];
    assert!(min <= surrogate * (1.0 + 1e-10), "{min} > {surrogate}");
    assert!(min > 0.0);
}

#[test]
fn efficiency_ratios_are_finite() {
    let pb = Problem::standard(ProblemKind::Trigonometric);
    let d = disc(2, 1);
    let source = SourceTerm::from_problem(&pb);
    let (eh, _) = d.solve(&source).unwrap();
    let exact = Analytic { value: move |x| pb.exact(x).unwrap(), curl: move |x| pb.exact_curl(x).unwrap() };
    let r = estimate(&d, &eh, &source, Some(&exact));
    let osc = oscillation(&d, &source);
    let ratios = local_efficiency_ratios(&d, &r, &osc);
    assert!(ratios.iter().all(|x| x.is_finite() && *x > 0.0));
    match r.effectivity().unwrap() {
        Effectivity::Value(v) => assert!(v > 1.0 && v < 100.0, "{v}"),
        Effectivity::Exact => panic!("trigonometric solution is not reproduced"),
    }
}
