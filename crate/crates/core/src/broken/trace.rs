//! Edge traces, jumps and averages. All samples are taken at the points of a
//! Gauss rule on the edge, parametrized from the lower to the higher vertex
//! index. Jumps are `left - right`; boundary edges use the single trace.

use rand::Rng;

use super::basis::{dim, physical_values};
use super::{BrokenField, VectorField};
use crate::error::FieldError;
use crate::mesh::{Mesh, Point};
use crate::quadrature::SegmentRule;

/// Edge rule with `p + 3` Gauss points.
pub fn edge_rule(degree: usize) -> SegmentRule {
    SegmentRule::gauss(degree + 3)
}

pub(crate) fn edge_points(mesh: &Mesh, edge: usize, rule: &SegmentRule) -> Vec<Point> {
    let e = &mesh.edges()[edge];
    rule.points.iter().map(|&s| e.point(mesh, s)).collect()
}

/// `v|_K . t_F` at the edge quadrature points.
pub fn tangential_trace(v: &BrokenField, cell: usize, edge: usize, rule: &SegmentRule) -> Result<Vec<f64>, FieldError> {
    let mesh = v.mesh();
    if mesh.local_edge(cell, edge).is_none() {
        return Err(FieldError::EdgeNotOnCell { edge, cell });
    }
    let t = mesh.edges()[edge].tangent;
    Ok(edge_points(mesh, edge, rule)
        .into_iter()
        .map(|x| {
            let val = v.value(cell, x);
            val[0] * t[0] + val[1] * t[1]
        })
        .collect())
}

fn one_sided<T>(mesh: &Mesh, edge: usize, rule: &SegmentRule, f: impl Fn(usize, Point) -> T) -> Vec<(T, Option<T>)> {
    let e = &mesh.edges()[edge];
    edge_points(mesh, edge, rule).into_iter().map(|x| (f(e.left, x), e.right.map(|r| f(r, x)))).collect()
}

/// Tangential jump `[v . t_F]`.
pub fn jump_c(mesh: &Mesh, v: &impl VectorField, edge: usize, rule: &SegmentRule) -> Vec<f64> {
    let t = mesh.edges()[edge].tangent;
    one_sided(mesh, edge, rule, |k, x| {
        let val = v.value(k, x);
        val[0] * t[0] + val[1] * t[1]
    })
    .into_iter()
    .map(|(l, r)| l - r.unwrap_or(0.0))
    .collect()
}

/// Normal jump `[v . n_F]`.
pub fn jump_d(mesh: &Mesh, v: &impl VectorField, edge: usize, rule: &SegmentRule) -> Vec<f64> {
    let n = mesh.edges()[edge].normal;
    one_sided(mesh, edge, rule, |k, x| {
        let val = v.value(k, x);
        val[0] * n[0] + val[1] * n[1]
    })
    .into_iter()
    .map(|(l, r)| l - r.unwrap_or(0.0))
    .collect()
}

/// Full-value average; the single trace on boundary edges.
pub fn avg_g(mesh: &Mesh, v: &impl VectorField, edge: usize, rule: &SegmentRule) -> Vec<[f64; 2]> {
    one_sided(mesh, edge, rule, |k, x| v.value(k, x))
        .into_iter()
        .map(|(l, r)| match r {
            Some(r) => [0.5 * (l[0] + r[0]), 0.5 * (l[1] + r[1])],
            None => l,
        })
        .collect()
}

/// Jump of the scalar broken curl on interior edges; zero on boundary edges.
pub fn scalar_jump_of_curl(mesh: &Mesh, v: &impl VectorField, edge: usize, rule: &SegmentRule) -> Vec<f64> {
    if mesh.edges()[edge].is_boundary() {
        return vec![0.0; rule.len()];
    }
    one_sided(mesh, edge, rule, |k, x| v.curl(k, x)).into_iter().map(|(l, r)| l - r.unwrap_or(0.0)).collect()
}

/// `∫_F f^2 ds` from samples at the points of `rule`.
pub fn edge_norm_squared(mesh: &Mesh, edge: usize, rule: &SegmentRule, samples: &[f64]) -> f64 {
    let len = mesh.edges()[edge].length;
    rule.weights.iter().zip(samples).map(|(w, f)| w * len * f * f).sum()
}

/// Trace ratio `||v||_{dK} / ((p^2 / h_K)^{1/2} ||v||_K)` for a scalar polynomial
/// given by its modal coefficients on `cell`.
pub fn trace_ratio(mesh: &Mesh, cell: usize, degree: usize, coeffs: &[f64]) -> f64 {
    let g = mesh.geometry(cell);
    let n = dim(degree);
    let rule = SegmentRule::gauss(degree + 2);
    let mut phi = vec![0.0; n];
    let mut boundary = 0.0;
    for &(e, _) in mesh.cell_edges(cell) {
        let edge = &mesh.edges()[e];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            physical_values(g, degree, edge.point(mesh, s), &mut phi);
            let v: f64 = coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum();
            boundary += w * edge.length * v * v;
        }
    }
    let interior: f64 = coeffs.iter().map(|c| c * c).sum();
    let p2 = (degree.max(1) * degree.max(1)) as f64;
    boundary.sqrt() / ((p2 / g.diameter).sqrt() * interior.sqrt())
}

/// Largest sampled discrete-trace ratio over all cells and `samples` random
/// polynomials of degree `p` per cell.
pub fn trace_inequality_ratio(mesh: &Mesh, degree: usize, samples: usize, rng: &mut impl Rng) -> f64 {
    let n = dim(degree);
    let mut worst: f64 = 0.0;
    let mut coeffs = vec![0.0; n];
    for k in 0..mesh.num_cells() {
        for _ in 0..samples {
            coeffs.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
            worst = worst.max(trace_ratio(mesh, k, degree, &coeffs));
        }
    }
    worst
}

/// Exact trace constant: `max_K sup_v ||v||_dK / ((p^2/h_K)^{1/2} ||v||_K)`,
/// the square root of the largest eigenvalue of the boundary mass matrix in
/// the orthonormal basis, scaled.
pub fn trace_constant(mesh: &Mesh, degree: usize) -> f64 {
    let n = dim(degree);
    let rule = SegmentRule::gauss(degree + 2);
    let p2 = (degree.max(1) * degree.max(1)) as f64;
    let mut phi = vec![0.0; n];
    (0..mesh.num_cells())
        .map(|k| {
            let g = mesh.geometry(k);
            let mut b = nalgebra::DMatrix::<f64>::zeros(n, n);
            for &(e, _) in mesh.cell_edges(k) {
                let edge = &mesh.edges()[e];
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    physical_values(g, degree, edge.point(mesh, s), &mut phi);
                    for i in 0..n {
                        for j in 0..n {
                            b[(i, j)] += w * edge.length * phi[i] * phi[j];
                        }
                    }
                }
            }
            let lmax = b.symmetric_eigenvalues().max();
            (lmax * g.diameter / p2).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broken::Analytic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn two_cells() -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(1))
    }

    fn diagonal(mesh: &Mesh) -> usize {
        mesh.edges().iter().position(|e| !e.is_boundary()).unwrap()
    }

    #[test]
    fn traces_of_tangent_and_normal() {
        let mesh = two_cells();
        let e = diagonal(&mesh);
        let edge = mesh.edges()[e].clone();
        let rule = edge_rule(1);
        let t = BrokenField::l2_project(&mesh, 0, |_| edge.tangent);
        let n = BrokenField::l2_project(&mesh, 0, |_| edge.normal);
        for k in edge.cells() {
            for v in tangential_trace(&t, k, e, &rule).unwrap() {
                assert!((v - 1.0).abs() < 1e-14);
            }
            for v in tangential_trace(&n, k, e, &rule).unwrap() {
                assert!(v.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn trace_on_diagonal_midpoint() {
        let mesh = two_cells();
        let e = diagonal(&mesh);
        let edge = &mesh.edges()[e];
        // diagonal runs (0,0)-(1,1), so t_F = ±(1,1)/sqrt2 and v.t = t_x / 2 at the midpoint
        assert!((edge.tangent[0].abs() - 0.5f64.sqrt()).abs() < 1e-15);
        let v = BrokenField::l2_project(&mesh, 1, |x| [x[1], 0.0]);
        let rule = SegmentRule::gauss(1); // single midpoint
        let tr = tangential_trace(&v, edge.left, e, &rule).unwrap();
        assert!((tr[0] - 0.5 * edge.tangent[0]).abs() < 1e-14, "{}", tr[0]);
    }

    #[test]
    fn edge_not_on_cell() {
        let mesh = Arc::new(Mesh::unit_square(2));
        let v = BrokenField::zeros(&mesh, 1, 2);
        let e = mesh.cell_edges(0)[0].0;
        let other = (0..mesh.num_cells()).find(|&k| mesh.local_edge(k, e).is_none()).unwrap();
        assert_eq!(
            tangential_trace(&v, other, e, &edge_rule(1)).unwrap_err(),
            FieldError::EdgeNotOnCell { edge: e, cell: other }
        );
    }

    #[test]
    fn jumps_by_hand() {
        let mesh = Arc::new(Mesh::unit_square(1));
        let rule = edge_rule(1);
        // continuous field: zero interior tangential jump
        let smooth = BrokenField::l2_project(&mesh, 2, |x| [x[0] * x[1], x[0] - x[1]]);
        for (e, edge) in mesh.edges().iter().enumerate() {
            if !edge.is_boundary() {
                assert!(jump_c(&mesh, &smooth, e, &rule).iter().all(|j| j.abs() < 1e-13));
            }
        }
        // (1,0) on the left cell, 0 on the right one: on the diagonal jump_c = t_x, jump_d = n_x
        let e = diagonal(&mesh);
        let edge = mesh.edges()[e].clone();
        let mut v = BrokenField::zeros(&mesh, 0, 2);
        // the first modal function is 1 / sqrt(|K|)
        v.cell_block_mut(edge.left)[0] = mesh.geometry(edge.left).area().sqrt();
        for j in jump_c(&mesh, &v, e, &rule) {
            assert!((j - edge.tangent[0]).abs() < 1e-14);
        }
        for j in jump_d(&mesh, &v, e, &rule) {
            assert!((j - edge.normal[0]).abs() < 1e-14);
        }
        // boundary edge, v = t_F: single-trace convention gives 1
        let (b, bedge) = mesh.edges().iter().enumerate().find(|(_, e)| e.is_boundary()).unwrap();
        let t = bedge.tangent;
        let tf = BrokenField::l2_project(&mesh, 0, |_| t);
        for j in jump_c(&mesh, &tf, b, &rule) {
            assert!((j - 1.0).abs() < 1e-14);
        }
        for a in avg_g(&mesh, &tf, b, &rule) {
            assert!((a[0] - t[0]).abs() < 1e-14 && (a[1] - t[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn jump_of_curl() {
        let mesh = Arc::new(Mesh::unit_square(1));
        let e = diagonal(&mesh);
        let edge = mesh.edges()[e].clone();
        let rule = edge_rule(1);
        let rotation =
            BrokenField::project_vector_with(
                &mesh,
                1,
                6,
                |k, x| {
                    if k == edge.left {
                        [-x[1], x[0]]
                    } else {
                        [0.0, 0.0]
                    }
                },
            );
        for j in scalar_jump_of_curl(&mesh, &rotation, e, &rule) {
            assert!((j - 2.0).abs() < 1e-12);
        }
        let smooth = Analytic { value: |x: Point| [x[1] * x[1], 0.0], curl: |x: Point| -2.0 * x[1] };
        assert!(scalar_jump_of_curl(&mesh, &smooth, e, &rule).iter().all(|j| j.abs() < 1e-14));
        let (b, _) = mesh.edges().iter().enumerate().find(|(_, e)| e.is_boundary()).unwrap();
        assert!(scalar_jump_of_curl(&mesh, &rotation, b, &rule).iter().all(|&j| j == 0.0));
    }

    #[test]
    fn trace_ratio_of_constant_on_right_triangle() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let c = mesh.geometry(0).area().sqrt(); // coefficient of the constant 1
        let r = trace_ratio(&mesh, 0, 1, &[c, 0.0, 0.0]);
        let expected = (2.0 + 2f64.sqrt()).sqrt() / ((1.0 / 2f64.sqrt()).sqrt() * 0.5f64.sqrt());
        assert!((r - expected).abs() < 1e-13, "{r} vs {expected}");
    }

    #[test]
    fn trace_ratio_scale_invariant_and_p_bounded() {
        let mesh = Mesh::unit_square(2);
        let big = mesh.scaled(2.0);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = trace_inequality_ratio(&mesh, 2, 20, &mut r1);
        let b = trace_inequality_ratio(&big, 2, 20, &mut r2);
        assert!((a - b).abs() < 1e-12 * a);
        let ratios: Vec<f64> =
            (1..=4).map(|p| trace_inequality_ratio(&mesh, p, 50, &mut ChaCha8Rng::seed_from_u64(p as u64))).collect();
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 6.0), "{ratios:?}");
        assert!(ratios.iter().all(|r| *r <= 1.3 * ratios[0]), "{ratios:?}");
    }

    #[test]
    fn exact_trace_constant_dominates_samples() {
        let mesh = Mesh::unit_square(2);
        let fine = mesh.refine_uniform();
        let exact: Vec<f64> = (1..=4).map(|p| trace_constant(&mesh, p)).collect();
        assert!(exact.iter().all(|c| *c <= 1.3 * exact[0]), "{exact:?}");
        for p in 1..=4 {
            let sampled = trace_inequality_ratio(&mesh, p, 30, &mut ChaCha8Rng::seed_from_u64(9));
            assert!(sampled <= exact[p - 1] * (1.0 + 1e-12));
            assert!((trace_constant(&fine, p) / exact[p - 1] - 1.0).abs() < 1e-10);
        }
        // constants are sup-attained: v = 1 on a cell gives the p = 1 lower bound
        let g = mesh.geometry(0);
        let perimeter: f64 = mesh.cell_edges(0).iter().map(|&(e, _)| mesh.edges()[e].length).sum();
        assert!(exact[0] >= (perimeter * g.diameter / g.area()).sqrt() - 1e-12);
    }
}
