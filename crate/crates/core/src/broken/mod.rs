//! Broken polynomial fields: cellwise polynomials of total degree `p` without
//! inter-cell continuity, stored as coefficients in a per-cell L2-orthonormal
//! modal basis.
//!
//! 2D operator dictionary: `curl v = d1 v2 - d2 v1` (vector to scalar) and
//! `rot phi = (d2 phi, -d1 phi)` (scalar to vector).

pub mod basis;
mod hat;
mod io;
mod trace;

use std::sync::Arc;

use rayon::prelude::*;

pub use hat::{multiply_by_hat, HatProduct};
pub use io::{read_field, write_field};
pub use trace::{
    avg_g, edge_norm_squared, edge_rule, jump_c, jump_d, scalar_jump_of_curl, tangential_trace, trace_constant,
    trace_inequality_ratio, trace_ratio,
};

use crate::mesh::{Mesh, Point};
use basis::{dim, physical_values, physical_values_and_gradients, BasisTable};

/// A vector field that can be evaluated cell by cell (broken or conforming).
pub trait VectorField: Sync {
    fn value(&self, cell: usize, x: Point) -> [f64; 2];
    fn curl(&self, cell: usize, x: Point) -> f64;
}

/// Closure-backed analytic vector field with a known curl.
pub struct Analytic<F, C> {
    pub value: F,
    pub curl: C,
}

impl<F, C> VectorField for Analytic<F, C>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    C: Fn(Point) -> f64 + Sync,
{
    fn value(&self, _cell: usize, x: Point) -> [f64; 2] {
        (self.value)(x)
    }
    fn curl(&self, _cell: usize, x: Point) -> f64 {
        (self.curl)(x)
    }
}

/// Default cell quadrature order for fields of degree `p`.
pub fn cell_order(degree: usize) -> usize {
    2 * degree + 4
}

#[derive(Clone, Debug)]
pub struct BrokenField {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    /// `coeffs[(cell * components + c) * dim + i]`
    coeffs: Vec<f64>,
}

impl BrokenField {
    pub fn zeros(mesh: &Arc<Mesh>, degree: usize, components: usize) -> Self {
        assert!(components == 1 || components == 2, "fields are scalar or 2-vector");
        assert!(degree <= basis::MAX_DEGREE, "degree {degree} exceeds {}", basis::MAX_DEGREE);
        BrokenField {
            mesh: mesh.clone(),
            degree,
            components,
            coeffs: vec![0.0; mesh.num_cells() * components * dim(degree)],
        }
    }

    pub fn from_coefficients(mesh: &Arc<Mesh>, degree: usize, components: usize, coeffs: Vec<f64>) -> Self {
        let f = Self::zeros(mesh, degree, components);
        assert_eq!(coeffs.len(), f.coeffs.len(), "coefficient vector length");
        BrokenField { coeffs, ..f }
    }

    /// L2-orthogonal projection of a vector field, quadrature exact to `order`.
    pub fn project_vector_with(
        mesh: &Arc<Mesh>,
        degree: usize,
        order: usize,
        f: impl Fn(usize, Point) -> [f64; 2] + Sync,
    ) -> Self {
        let n = dim(degree);
        let table = BasisTable::cached(degree, order);
        let blocks: Vec<Vec<f64>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let g = mesh.geometry(k);
                let s = g.det.sqrt();
                let mut block = vec![0.0; 2 * n];
                for (q, (&xi, &w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                    let v = f(k, g.to_physical(xi));
                    let phi = table.values_at(q);
                    for i in 0..n {
                        block[i] += w * s * v[0] * phi[i];
                        block[n + i] += w * s * v[1] * phi[i];
                    }
                }
                block
            })
            .collect();
        Self::from_coefficients(mesh, degree, 2, blocks.concat())
    }

    pub fn project_scalar_with(
        mesh: &Arc<Mesh>,
        degree: usize,
        order: usize,
        f: impl Fn(usize, Point) -> f64 + Sync,
    ) -> Self {
        let n = dim(degree);
        let table = BasisTable::cached(degree, order);
        let blocks: Vec<Vec<f64>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let g = mesh.geometry(k);
                let s = g.det.sqrt();
                let mut block = vec![0.0; n];
                for (q, (&xi, &w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                    let v = f(k, g.to_physical(xi));
                    for (b, phi) in block.iter_mut().zip(table.values_at(q)) {
                        *b += w * s * v * phi;
                    }
                }
                block
            })
            .collect();
        Self::from_coefficients(mesh, degree, 1, blocks.concat())
    }

    /// L2 projection of a pointwise vector field with the default order `2p + 4`.
    pub fn l2_project(mesh: &Arc<Mesh>, degree: usize, f: impl Fn(Point) -> [f64; 2] + Sync) -> Self {
        Self::project_vector_with(mesh, degree, cell_order(degree), |_, x| f(x))
    }

    pub fn l2_project_scalar(mesh: &Arc<Mesh>, degree: usize, f: impl Fn(Point) -> f64 + Sync) -> Self {
        Self::project_scalar_with(mesh, degree, cell_order(degree), |_, x| f(x))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_vector(&self) -> bool {
        self.components == 2
    }

    pub fn local_dim(&self) -> usize {
        dim(self.degree)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// All coefficients of one cell (components concatenated).
    pub fn cell_block(&self, cell: usize) -> &[f64] {
        let len = self.components * self.local_dim();
        &self.coeffs[cell * len..(cell + 1) * len]
    }

    pub fn cell_block_mut(&mut self, cell: usize) -> &mut [f64] {
        let len = self.components * self.local_dim();
        &mut self.coeffs[cell * len..(cell + 1) * len]
    }

    /// Scalar value (component 0) at `x` in `cell`.
    pub fn scalar_value(&self, cell: usize, x: Point) -> f64 {
        let n = self.local_dim();
        let mut phi = vec![0.0; n];
        physical_values(self.mesh.geometry(cell), self.degree, x, &mut phi);
        self.cell_block(cell)[..n].iter().zip(&phi).map(|(c, p)| c * p).sum()
    }

    /// Values and gradients of every component at `x`.
    pub fn jet(&self, cell: usize, x: Point) -> ([f64; 2], [[f64; 2]; 2]) {
        let n = self.local_dim();
        let mut phi = vec![0.0; n];
        let mut grad = vec![[0.0; 2]; n];
        physical_values_and_gradients(self.mesh.geometry(cell), self.degree, x, &mut phi, &mut grad);
        let block = self.cell_block(cell);
        let mut v = [0.0; 2];
        let mut d = [[0.0; 2]; 2];
        for c in 0..self.components {
            for i in 0..n {
                let a = block[c * n + i];
                v[c] += a * phi[i];
                d[c][0] += a * grad[i][0];
                d[c][1] += a * grad[i][1];
            }
        }
        (v, d)
    }

    pub fn gradient(&self, cell: usize, x: Point) -> [f64; 2] {
        self.jet(cell, x).1[0]
    }

    pub fn divergence(&self, cell: usize, x: Point) -> f64 {
        let d = self.jet(cell, x).1;
        d[0][0] + d[1][1]
    }

    /// Broken curl, cellwise exact: a scalar field of degree `p - 1` (`0` if `p = 0`).
    pub fn curl_h(&self) -> BrokenField {
        assert!(self.is_vector());
        let target = self.degree.saturating_sub(1);
        Self::project_scalar_with(&self.mesh, target, cell_order(self.degree), |k, x| VectorField::curl(self, k, x))
    }

    /// Broken divergence of a vector field, degree `p - 1`.
    pub fn div_h(&self) -> BrokenField {
        assert!(self.is_vector());
        let target = self.degree.saturating_sub(1);
        Self::project_scalar_with(&self.mesh, target, cell_order(self.degree), |k, x| self.divergence(k, x))
    }

    /// Broken `rot phi = (d2 phi, -d1 phi)` of a scalar field, degree `p - 1`.
    pub fn rot_h(&self) -> BrokenField {
        assert!(!self.is_vector());
        let target = self.degree.saturating_sub(1);
        Self::project_vector_with(&self.mesh, target, cell_order(self.degree), |k, x| {
            let g = self.gradient(k, x);
            [g[1], -g[0]]
        })
    }

    /// Same field in a higher-degree space (zero padding by hierarchy).
    pub fn elevate(&self, degree: usize) -> BrokenField {
        assert!(degree >= self.degree);
        let (n, m) = (self.local_dim(), dim(degree));
        let mut out = Self::zeros(&self.mesh, degree, self.components);
        for k in 0..self.mesh.num_cells() {
            for c in 0..self.components {
                let src = &self.cell_block(k)[c * n..(c + 1) * n];
                out.cell_block_mut(k)[c * m..c * m + n].copy_from_slice(src);
            }
        }
        out
    }

    pub fn norm_squared_on(&self, cell: usize) -> f64 {
        self.cell_block(cell).iter().map(|c| c * c).sum()
    }

    /// L2 norm; exact by orthonormality.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &BrokenField) -> f64 {
        self.check_compatible(other);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> BrokenField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &BrokenField) -> BrokenField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &BrokenField) -> BrokenField {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &BrokenField) -> BrokenField {
        self.check_compatible(other);
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += a * y);
        out
    }

    fn check_compatible(&self, other: &BrokenField) {
        assert!(
            Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.num_cells() == other.mesh.num_cells(),
            "fields live on different meshes"
        );
        assert_eq!((self.degree, self.components), (other.degree, other.components));
    }

    /// Random coefficients uniform in `[-1, 1]`.
    pub fn random(mesh: &Arc<Mesh>, degree: usize, components: usize, rng: &mut impl rand::Rng) -> Self {
        let mut f = Self::zeros(mesh, degree, components);
        f.coeffs.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
        f
    }
}

impl VectorField for BrokenField {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        let n = self.local_dim();
        let mut phi = vec![0.0; n];
        physical_values(self.mesh.geometry(cell), self.degree, x, &mut phi);
        let block = self.cell_block(cell);
        let mut v = [0.0; 2];
        for c in 0..self.components {
            v[c] = block[c * n..(c + 1) * n].iter().zip(&phi).map(|(a, p)| a * p).sum();
        }
        v
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        let d = self.jet(cell, x).1;
        d[1][0] - d[0][1]
    }
}

/// Integral over a cell with a triangle rule exact to `order`.
pub fn integrate_cell(mesh: &Mesh, cell: usize, order: usize, f: impl Fn(Point) -> f64) -> f64 {
    let rule = crate::quadrature::TriangleRule::cached(order);
    let g = mesh.geometry(cell);
    rule.points.iter().zip(&rule.weights).map(|(&xi, w)| w * g.det * f(g.to_physical(xi))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sq(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n))
    }

    fn l2_error(f: &BrokenField, g: impl Fn(Point) -> [f64; 2]) -> f64 {
        let mesh = f.mesh().clone();
        (0..mesh.num_cells())
            .map(|k| {
                integrate_cell(&mesh, k, 16, |x| {
                    let (a, b) = (f.value(k, x), g(x));
                    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                })
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn cellwise_orthonormality() {
        let mesh = Arc::new(Mesh::l_shape(2));
        for k in [0, 5, 17] {
            let n = dim(5);
            let mut phi = vec![0.0; n];
            let mut gram = vec![0.0; n * n];
            let rule = crate::quadrature::TriangleRule::cached(12);
            let g = mesh.geometry(k);
            for (&xi, w) in rule.points.iter().zip(&rule.weights) {
                physical_values(g, 5, g.to_physical(xi), &mut phi);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * g.det * phi[i] * phi[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let mesh = sq(2);
        for p in 0..4 {
            let c = BrokenField::l2_project(&mesh, p, |_| [1.0, 0.0]);
            assert!(l2_error(&c, |_| [1.0, 0.0]) < 1e-13);
        }
        let f = |x: Point| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])];
        let e = BrokenField::l2_project(&mesh, 2, f);
        assert!(l2_error(&e, f) < 1e-12);
        // idempotent
        let again = BrokenField::project_vector_with(&mesh, 2, 8, |k, x| e.value(k, x));
        assert!(again.sub(&e).l2_norm() < 1e-13);
    }

    #[test]
    fn projection_converges_at_rate_two_for_p1() {
        let f = |x: Point| [x[0].sin(), 0.0];
        let e1 = l2_error(&BrokenField::l2_project(&sq(2), 1, f), f);
        let e2 = l2_error(&BrokenField::l2_project(&sq(4), 1, f), f);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn projection_is_orthogonal() {
        let mesh = sq(2);
        let f = |x: Point| [(3.0 * x[0]).exp() * x[1], (x[0] * x[1]).cos()];
        let pf = BrokenField::l2_project(&mesh, 2, f);
        let n = dim(2);
        // Same rule as the projection (order 2p + 4) so only rounding remains.
        for k in 0..mesh.num_cells() {
            for i in 0..n {
                for c in 0..2 {
                    let r = integrate_cell(&mesh, k, cell_order(2), |x| {
                        let mut phi = vec![0.0; n];
                        physical_values(mesh.geometry(k), 2, x, &mut phi);
                        (f(x)[c] - pf.value(k, x)[c]) * phi[i]
                    });
                    assert!(r.abs() < 1e-12, "residual {r}");
                }
            }
        }
    }

    #[test]
    fn curls_and_rots() {
        let mesh = sq(2);
        let v = BrokenField::l2_project(&mesh, 1, |x| [-x[1], x[0]]);
        let c = v.curl_h();
        assert!(l2_error(&c.as_vector_of_scalar(), |_| [2.0, 0.0]) < 1e-12);
        let grad = BrokenField::l2_project(&mesh, 1, |x| [x[1], x[0]]);
        assert!(grad.curl_h().l2_norm() < 1e-12);
        let w = BrokenField::l2_project(&mesh, 2, |x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])]);
        let cw = w.curl_h();
        assert!(l2_error(&cw.as_vector_of_scalar(), |x| [2.0 * x[1] - 2.0 * x[0], 0.0]) < 1e-12);

        let constant = BrokenField::l2_project_scalar(&mesh, 1, |_| 3.0);
        assert!(constant.rot_h().l2_norm() < 1e-12);
        let phi = BrokenField::l2_project_scalar(&mesh, 1, |x| 2.0 * x[1] - 2.0 * x[0]);
        assert!(l2_error(&phi.rot_h(), |_| [2.0, 2.0]) < 1e-12);
        let r2 = BrokenField::l2_project_scalar(&mesh, 2, |x| x[0] * x[0] + x[1] * x[1]);
        let lap = r2.rot_h().elevate(1).curl_h();
        assert!(l2_error(&lap.as_vector_of_scalar(), |_| [-4.0, 0.0]) < 1e-12);
    }

    #[test]
    fn norm_is_coefficient_norm() {
        let mesh = sq(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = BrokenField::random(&mesh, 3, 2, &mut rng);
        let quad: f64 = (0..mesh.num_cells())
            .map(|k| {
                integrate_cell(&mesh, k, 10, |x| {
                    let v = f.value(k, x);
                    v[0] * v[0] + v[1] * v[1]
                })
            })
            .sum();
        assert!((quad.sqrt() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
        let per_cell: f64 = (0..mesh.num_cells()).map(|k| f.norm_squared_on(k)).sum();
        assert!((per_cell.sqrt() - f.l2_norm()).abs() < 1e-12);
    }

    impl BrokenField {
        /// Test helper: embed a scalar field as the first component of a vector field.
        fn as_vector_of_scalar(&self) -> BrokenField {
            let mesh = self.mesh.clone();
            BrokenField::project_vector_with(&mesh, self.degree, cell_order(self.degree), |k, x| {
                [self.scalar_value(k, x), 0.0]
            })
        }
    }
}
