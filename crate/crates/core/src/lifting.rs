//! Jump lifting `L`: the broken scalar field of degree `p` with
//! `(L(v), phi) = sum_F ([v]^c_F, {phi}_F)_F` for every broken scalar `phi`
//! of degree `p`. With an orthonormal basis the block on `K` is
//! `sum_{F in F_K} w_F int_F [v]^c phi_i`, `w_F = 1/2` inside and `1` on the boundary.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::broken::basis::{dim, physical_values};
use crate::broken::{jump_c, BrokenField, HatProduct, VectorField};
use crate::mesh::{Mesh, VertexPatch};
use crate::quadrature::{shifted_legendre, SegmentRule};

#[derive(Clone, Debug)]
pub struct LiftingOperator {
    mesh: Arc<Mesh>,
    degree: usize,
}

impl LiftingOperator {
    /// Lifting into broken polynomials of degree `degree`.
    pub fn new(mesh: &Arc<Mesh>, degree: usize) -> Self {
        LiftingOperator { mesh: mesh.clone(), degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Gauss rule exact for `[v]^c phi` with `v` up to degree `p + 1`.
    pub fn edge_rule(&self) -> SegmentRule {
        SegmentRule::gauss(self.degree + 3)
    }

    /// Lifting block on one cell.
    pub fn lift_cell(&self, v: &impl VectorField, cell: usize, rule: &SegmentRule) -> Vec<f64> {
        let mesh = &*self.mesh;
        let n = dim(self.degree);
        let geom = mesh.geometry(cell);
        let mut block = vec![0.0; n];
        let mut phi = vec![0.0; n];
        for &(e, _) in mesh.cell_edges(cell) {
            let edge = &mesh.edges()[e];
            let weight = if edge.is_boundary() { 1.0 } else { 0.5 };
            let jumps = jump_c(mesh, v, e, rule);
            for ((&s, &w), j) in rule.points.iter().zip(&rule.weights).zip(jumps) {
                physical_values(geom, self.degree, edge.point(mesh, s), &mut phi);
                let c = weight * w * edge.length * j;
                block.iter_mut().zip(&phi).for_each(|(b, p)| *b += c * p);
            }
        }
        block
    }

    /// `L(v)` on the whole mesh.
    pub fn lift(&self, v: &impl VectorField) -> BrokenField {
        let rule = self.edge_rule();
        let blocks: Vec<Vec<f64>> =
            (0..self.mesh.num_cells()).into_par_iter().map(|k| self.lift_cell(v, k, &rule)).collect();
        BrokenField::from_coefficients(&self.mesh, self.degree, 1, blocks.concat())
    }

    /// `L(psi_a v)` computed on the patch cells only; zero elsewhere. Since
    /// `psi_a v` vanishes outside the patch and on the rim, only edges of
    /// `F_a` and boundary edges through `a` contribute.
    pub fn lift_on_patch(&self, v: &impl VectorField, patch: &VertexPatch) -> BrokenField {
        let product = HatProduct { field: v, patch, mesh: &self.mesh };
        let rule = self.edge_rule();
        let mut out = BrokenField::zeros(&self.mesh, self.degree, 1);
        for &k in &patch.cells {
            let block = self.lift_cell(&product, k, &rule);
            out.cell_block_mut(k).copy_from_slice(&block);
        }
        out
    }
}

/// Per-cell ratios `||L(v)||_K / (sum_{F in F_K} p^2/h_K ||[v]^c||_F^2)^{1/2}`
/// with `L` into degree `p`; cells with vanishing jumps are skipped.
pub fn lifting_bound_ratio(v: &BrokenField, degree: usize) -> Vec<(usize, f64)> {
    let mesh = v.mesh().clone();
    let op = LiftingOperator::new(&mesh, degree);
    let lifted = op.lift(v);
    let rule = op.edge_rule();
    let p2 = (degree.max(1) * degree.max(1)) as f64;
    let jump_sq: Vec<f64> = (0..mesh.num_edges())
        .map(|e| {
            let len = mesh.edges()[e].length;
            jump_c(&mesh, v, e, &rule).iter().zip(&rule.weights).map(|(j, w)| w * len * j * j).sum()
        })
        .collect();
    (0..mesh.num_cells())
        .filter_map(|k| {
            let h = mesh.geometry(k).diameter;
            let denom: f64 = mesh.cell_edges(k).iter().map(|&(e, _)| p2 / h * jump_sq[e]).sum();
            (denom > 1e-28).then(|| (k, lifted.norm_squared_on(k).sqrt() / denom.sqrt()))
        })
        .collect()
}

/// Largest sampled lifting ratio over `samples` random fields of degree `p`.
pub fn lifting_constant(mesh: &Arc<Mesh>, degree: usize, samples: usize, rng: &mut impl Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let v = BrokenField::random(mesh, degree, 2, rng);
        for (_, r) in lifting_bound_ratio(&v, degree) {
            worst = worst.max(r);
        }
    }
    worst
}

/// Exact constant `max_K sup ||L(v)||_K / (sum_F p^2/h_K ||[v]^c||_F^2)^{1/2}`
/// over jumps of degree `jump_degree`. On each cell the jumps on its three edges
/// are independent polynomials, so the sup is the largest singular value of
/// the map from L2(F)-orthonormal edge Legendre coefficients to the lifting block.
pub fn lifting_constant_exact(mesh: &Mesh, degree: usize, jump_degree: usize) -> f64 {
    let n = dim(degree);
    let m = jump_degree + 1;
    let rule = SegmentRule::gauss(degree + jump_degree / 2 + 2);
    let p2 = (degree.max(1) * degree.max(1)) as f64;
    let mut phi = vec![0.0; n];
    (0..mesh.num_cells())
        .map(|k| {
            let geom = mesh.geometry(k);
            let mut map = DMatrix::<f64>::zeros(n, 3 * m);
            for (f, &(e, _)) in mesh.cell_edges(k).iter().enumerate() {
                let edge = &mesh.edges()[e];
                let weight = if edge.is_boundary() { 1.0 } else { 0.5 };
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    physical_values(geom, degree, edge.point(mesh, s), &mut phi);
                    let ell = shifted_legendre(m, s);
                    for (j, l) in ell.iter().enumerate() {
                        // orthonormal on F: sqrt((2j+1)/|F|) P_j
                        let lj = ((2 * j + 1) as f64 / edge.length).sqrt() * l;
                        for i in 0..n {
                            map[(i, f * m + j)] += weight * w * edge.length * phi[i] * lj;
                        }
                    }
                }
            }
            let sigma = map.singular_values().max();
            sigma * (geom.diameter / p2).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broken::avg_g;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_identity() {
        let mesh = Arc::new(Mesh::l_shape(2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 1..=3 {
            let v = BrokenField::random(&mesh, p + 1, 2, &mut rng);
            let phi = BrokenField::random(&mesh, p, 1, &mut rng);
            let op = LiftingOperator::new(&mesh, p);
            let lhs = op.lift(&v).dot(&phi);
            let rule = op.edge_rule();
            let mut rhs = 0.0;
            for (e, edge) in mesh.edges().iter().enumerate() {
                let jumps = jump_c(&mesh, &v, e, &rule);
                // avg_g on a scalar field stored as (phi, 0) gives {phi} in slot 0
                let avg = avg_g(&mesh, &phi, e, &rule);
                for ((w, j), a) in rule.weights.iter().zip(&jumps).zip(&avg) {
                    rhs += w * edge.length * j * a[0];
                }
            }
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()), "p={p}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_for_conforming_fields() {
        let mesh = Arc::new(Mesh::unit_square(3));
        // vanishing tangential trace on the boundary, continuous inside
        let v = BrokenField::l2_project(&mesh, 2, |x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])]);
        let l = LiftingOperator::new(&mesh, 1).lift(&v);
        assert!(l.l2_norm() < 1e-13);
    }

    #[test]
    fn linear_and_local() {
        let mesh = Arc::new(Mesh::unit_square(3));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = BrokenField::random(&mesh, 2, 2, &mut rng);
        let op = LiftingOperator::new(&mesh, 1);
        let l1 = op.lift(&v);
        let l2 = op.lift(&v.scaled(2.0));
        for (a, b) in l1.coefficients().iter().zip(l2.coefficients()) {
            assert!((2.0 * a - b).abs() < 1e-14 * (1.0 + b.abs()));
        }
        let k = 0;
        let mut far: Vec<usize> = (0..mesh.num_cells()).collect();
        far.retain(|&c| !mesh.face_neighborhood(k).contains(&c));
        let mut w = v.clone();
        for &c in &far {
            w.cell_block_mut(c).iter_mut().for_each(|x| *x += 1.5);
        }
        assert_eq!(op.lift(&w).cell_block(k), l1.cell_block(k));
    }

    #[test]
    fn matches_dense_assembly() {
        // v = 0 on the left cell and v = t_F (so v.t_F = 1) on the right cell
        let mesh = Arc::new(Mesh::unit_square(1));
        let e = mesh.edges().iter().position(|e| !e.is_boundary()).unwrap();
        let right = mesh.edges()[e].right.unwrap();
        let t = mesh.edges()[e].tangent;
        let mut v = BrokenField::zeros(&mesh, 0, 2);
        v.cell_block_mut(right).copy_from_slice(BrokenField::l2_project(&mesh, 0, |_| t).cell_block(right));
        let p = 2;
        let n = dim(p);
        let ncell = mesh.num_cells();
        // brute force: mass matrix and edge-by-edge right-hand side, both sides of each edge
        let mut mass = DMatrix::<f64>::zeros(ncell * n, ncell * n);
        let mut rhs = DVector::<f64>::zeros(ncell * n);
        let trule = crate::quadrature::TriangleRule::exact_to(2 * p);
        let rule = SegmentRule::gauss(6);
        let mut phi = vec![0.0; n];
        for k in 0..ncell {
            let g = mesh.geometry(k);
            for (&xi, &w) in trule.points.iter().zip(&trule.weights) {
                physical_values(g, p, g.to_physical(xi), &mut phi);
                for i in 0..n {
                    for j in 0..n {
                        mass[(k * n + i, k * n + j)] += w * g.det * phi[i] * phi[j];
                    }
                }
            }
        }
        for edge in mesh.edges() {
            let weight = if edge.is_boundary() { 1.0 } else { 0.5 };
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let x = edge.point(&mesh, s);
                let trace = |k: usize| {
                    let val = v.value(k, x);
                    val[0] * edge.tangent[0] + val[1] * edge.tangent[1]
                };
                let jump = trace(edge.left) - edge.right.map_or(0.0, trace);
                for k in edge.cells() {
                    physical_values(mesh.geometry(k), p, x, &mut phi);
                    for i in 0..n {
                        rhs[k * n + i] += w * edge.length * weight * jump * phi[i];
                    }
                }
            }
        }
        let expect = mass.lu().solve(&rhs).unwrap();
        let l = LiftingOperator::new(&mesh, p).lift(&v);
        for (a, b) in l.coefficients().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
        assert!(l.l2_norm() > 0.1);
    }

    #[test]
    fn patch_lift_matches_global_lift_of_product() {
        let mesh = Arc::new(Mesh::unit_square(3));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = BrokenField::random(&mesh, 1, 2, &mut rng);
        let op = LiftingOperator::new(&mesh, 1);
        for a in [0, 5, 7] {
            let patch = mesh.vertex_patch(a);
            let local = op.lift_on_patch(&v, &patch);
            let global = op.lift(&HatProduct { field: &v, patch: &patch, mesh: &mesh });
            for &k in &patch.cells {
                for (x, y) in local.cell_block(k).iter().zip(global.cell_block(k)) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn bound_ratios_h_and_p_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coarse = Arc::new(Mesh::unit_square(2));
        let fine = Arc::new(Mesh::unit_square(4));
        let exact: Vec<f64> = (1..=4).map(|p| lifting_constant_exact(&coarse, p, p)).collect();
        assert!(exact.iter().all(|r| r.is_finite() && *r <= 1.3 * exact[0]), "{exact:?}");
        for p in 1..=4 {
            let sampled = lifting_constant(&coarse, p, 20, &mut rng);
            assert!(sampled <= exact[p - 1] * (1.0 + 1e-12), "p={p}: {sampled} > {}", exact[p - 1]);
            let f = lifting_constant_exact(&fine, p, p);
            assert!((f / exact[p - 1] - 1.0).abs() < 1e-10, "p={p}: {f} vs {}", exact[p - 1]);
        }
        let smooth = BrokenField::l2_project(&coarse, 2, |x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])]);
        assert!(lifting_bound_ratio(&smooth, 2).is_empty());
    }
}
