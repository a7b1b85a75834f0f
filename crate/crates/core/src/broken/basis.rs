//! Hierarchical L2-orthonormal modal basis on the reference triangle.
//!
//! Built by Gram factorization of the mass matrix of collapsed-coordinate
//! orthogonal polynomials ordered by total degree. The factor is lower triangular, so the first
//! `(p+1)(p+2)/2` functions span `P_p` for every `p <= MAX_DEGREE`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::mesh::{CellGeometry, Point};
use crate::quadrature::TriangleRule;

pub const MAX_DEGREE: usize = 9;

pub const fn dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

#[derive(Debug)]
pub struct ModalBasis {
    exponents: Vec<(i32, i32)>,
    /// Row `i` holds the generator coefficients of basis function `i`.
    coeffs: Vec<f64>,
    n: usize,
}

impl ModalBasis {
    pub fn shared() -> &'static ModalBasis {
        static BASIS: OnceLock<ModalBasis> = OnceLock::new();
        BASIS.get_or_init(|| ModalBasis::build(MAX_DEGREE))
    }

    fn build(degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree as i32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = exponents.len();
        let rule = TriangleRule::exact_to(2 * degree);
        let mono: Vec<Vec<f64>> = rule.points.iter().map(|&xi| monomials(&exponents, xi)).collect();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for (m, w) in mono.iter().zip(&rule.weights) {
            for i in 0..n {
                for j in 0..=i {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        // Repeated Cholesky: C <- L^{-1} C with L L^T = C G C^T.
        let mut c = DMatrix::<f64>::identity(n, n);
        for _ in 0..3 {
            let g = &c * &gram * c.transpose();
            let g = 0.5 * (&g + g.transpose());
            let l = g.cholesky().expect("monomial Gram matrix is positive definite").l();
            let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonsingular factor");
            c = linv * c;
            for i in 0..n {
                for j in i + 1..n {
                    c[(i, j)] = 0.0;
                }
            }
        }
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                coeffs[i * n + j] = c[(i, j)];
            }
        }
        ModalBasis { exponents, coeffs, n }
    }

    /// Values of the first `dim(degree)` reference basis functions at `xi`.
    pub fn values(&self, degree: usize, xi: Point, out: &mut [f64]) {
        let n = dim(degree);
        let m = monomials(&self.exponents[..n], xi);
        for i in 0..n {
            let row = &self.coeffs[i * self.n..i * self.n + i + 1];
            out[i] = row.iter().zip(&m).map(|(c, v)| c * v).sum();
        }
    }

    /// Values and reference gradients.
    pub fn values_and_gradients(&self, degree: usize, xi: Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = dim(degree);
        let (m, dm) = monomials_with_gradients(&self.exponents[..n], xi);
        for i in 0..n {
            let row = &self.coeffs[i * self.n..i * self.n + i + 1];
            let mut v = 0.0;
            let mut g = [0.0; 2];
            for (j, c) in row.iter().enumerate() {
                v += c * m[j];
                g[0] += c * dm[j][0];
                g[1] += c * dm[j][1];
            }
            vals[i] = v;
            grads[i] = g;
        }
    }
}

/// Collapsed-coordinate orthogonal generators
/// `psi_ij = (1 - y)^i P_i(eta_1) P_j^{(2i+1,0)}(2y - 1)`, with the first factor
/// evaluated through the homogeneous Legendre recurrence so that nothing is
/// singular at the top vertex.
fn monomials(exponents: &[(i32, i32)], xi: Point) -> Vec<f64> {
    monomials_with_gradients(exponents, xi).0
}

fn monomials_with_gradients(exponents: &[(i32, i32)], xi: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
    let top = exponents.last().map_or(0, |&(a, b)| (a + b) as usize);
    // Q_k(s, t) = t^k P_k(s / t) with s = 2x - 1 + y, t = 1 - y
    let (s, t) = (2.0 * xi[0] - 1.0 + xi[1], 1.0 - xi[1]);
    let (ds, dt) = ([2.0, 1.0], [0.0, -1.0]);
    let mut q = vec![1.0; top + 1];
    let mut dq = vec![[0.0; 2]; top + 1];
    if top >= 1 {
        q[1] = s;
        dq[1] = ds;
    }
    for k in 2..=top {
        let kf = k as f64;
        let (a, b) = ((2.0 * kf - 1.0) / kf, (kf - 1.0) / kf);
        q[k] = a * s * q[k - 1] - b * t * t * q[k - 2];
        for d in 0..2 {
            dq[k][d] =
                a * (ds[d] * q[k - 1] + s * dq[k - 1][d]) - b * (2.0 * t * dt[d] * q[k - 2] + t * t * dq[k - 2][d]);
        }
    }
    let z = 2.0 * xi[1] - 1.0;
    let mut vals = Vec::with_capacity(exponents.len());
    let mut grads = Vec::with_capacity(exponents.len());
    for &(i, j) in exponents {
        let (i, j) = (i as usize, j as usize);
        let (pj, dpj) = jacobi(j, 2.0 * i as f64 + 1.0, z);
        vals.push(q[i] * pj);
        // d/dy of P_j(2y - 1) is 2 P_j'
        grads.push([dq[i][0] * pj, dq[i][1] * pj + q[i] * 2.0 * dpj]);
    }
    (vals, grads)
}

/// Jacobi polynomial `P_n^{(alpha,0)}(z)` and its derivative.
fn jacobi(n: usize, alpha: f64, z: f64) -> (f64, f64) {
    let (mut p0, mut d0) = (1.0, 0.0);
    if n == 0 {
        return (p0, d0);
    }
    let (mut p1, mut d1) = (0.5 * ((alpha + 2.0) * z + alpha), 0.5 * (alpha + 2.0));
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + alpha;
        let c0 = 2.0 * k * (k + alpha) * (c - 2.0);
        let c1 = (c - 1.0) * c * (c - 2.0);
        let c2 = (c - 1.0) * alpha * alpha;
        let c3 = 2.0 * (k + alpha - 1.0) * (k - 1.0) * c;
        let p2 = ((c1 * z + c2) * p1 - c3 * p0) / c0;
        let d2 = ((c1 * z + c2) * d1 + c1 * p1 - c3 * d0) / c0;
        (p0, d0, p1, d1) = (p1, d1, p2, d2);
    }
    (p1, d1)
}

/// Reference basis values and gradients tabulated at the points of a triangle rule.
#[derive(Debug)]
pub struct BasisTable {
    pub degree: usize,
    pub dim: usize,
    pub rule: Arc<TriangleRule>,
    /// `values[q * dim + i]`
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl BasisTable {
    pub fn cached(degree: usize, order: usize) -> Arc<BasisTable> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<BasisTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("basis table cache poisoned");
        guard.entry((degree, order)).or_insert_with(|| Arc::new(Self::build(degree, order))).clone()
    }

    fn build(degree: usize, order: usize) -> Self {
        let rule = TriangleRule::cached(order);
        let n = dim(degree);
        let basis = ModalBasis::shared();
        let mut values = vec![0.0; rule.len() * n];
        let mut gradients = vec![[0.0; 2]; rule.len() * n];
        for (q, &xi) in rule.points.iter().enumerate() {
            basis.values_and_gradients(degree, xi, &mut values[q * n..(q + 1) * n], &mut gradients[q * n..(q + 1) * n]);
        }
        BasisTable { degree, dim: n, rule, values, gradients }
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.dim..(q + 1) * self.dim]
    }

    pub fn gradients_at(&self, q: usize) -> &[[f64; 2]] {
        &self.gradients[q * self.dim..(q + 1) * self.dim]
    }
}

/// Physical basis values on a cell: reference values scaled by `det^{-1/2}`.
pub fn physical_values(geom: &CellGeometry, degree: usize, x: Point, out: &mut [f64]) {
    ModalBasis::shared().values(degree, geom.to_reference(x), out);
    let s = geom.det.sqrt().recip();
    out[..dim(degree)].iter_mut().for_each(|v| *v *= s);
}

/// Physical basis values and gradients on a cell.
pub fn physical_values_and_gradients(
    geom: &CellGeometry,
    degree: usize,
    x: Point,
    vals: &mut [f64],
    grads: &mut [[f64; 2]],
) {
    ModalBasis::shared().values_and_gradients(degree, geom.to_reference(x), vals, grads);
    let s = geom.det.sqrt().recip();
    for i in 0..dim(degree) {
        vals[i] *= s;
        let g = geom.push_gradient(grads[i]);
        grads[i] = [g[0] * s, g[1] * s];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_orthonormality() {
        let basis = ModalBasis::shared();
        let n = dim(MAX_DEGREE);
        let rule = TriangleRule::exact_to(2 * MAX_DEGREE);
        let mut gram = vec![0.0; n * n];
        let mut v = vec![0.0; n];
        for (&xi, w) in rule.points.iter().zip(&rule.weights) {
            basis.values(MAX_DEGREE, xi, &mut v);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] - expect).abs() < 1e-12, "({i},{j}) = {}", gram[i * n + j]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = ModalBasis::shared();
        let n = dim(4);
        let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
        let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
        let xi = [0.21, 0.37];
        basis.values_and_gradients(4, xi, &mut v, &mut g);
        let h = 1e-6;
        for d in 0..2 {
            let mut a = xi;
            let mut b = xi;
            a[d] += h;
            b[d] -= h;
            basis.values(4, a, &mut vp);
            basis.values(4, b, &mut vm);
            for i in 0..n {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - g[i][d]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
