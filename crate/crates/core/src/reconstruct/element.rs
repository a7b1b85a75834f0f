//! Reference first-kind Nédélec and Lagrange elements of degree `q` on the
//! triangle `(0,0), (1,0), (0,1)`, built as dual bases over modal spanning sets.
//!
//! Nédélec degrees of freedom: for local edge `i` (opposite local vertex `i`,
//! run from its lower to its higher local vertex with direction `d`),
//! `int_0^1 v . d P_k(2s - 1) ds` for `k < q`; then interior moments against
//! `P_{q-2}` modal functions times the unit vectors. Physical fields use the
//! covariant map `v = J^{-T} v_hat`, under which edge moments are invariant.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::broken::basis::{dim, ModalBasis};
use crate::mesh::{CellGeometry, Mesh, Point};
use crate::quadrature::{shifted_legendre, SegmentRule, TriangleRule};

pub const fn nedelec_dim(q: usize) -> usize {
    q * (q + 2)
}

/// Local vertex pairs of the three local edges.
pub(crate) const EDGE_VERTICES: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];
const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

fn shift(xi: Point) -> Point {
    [xi[0] - 1.0 / 3.0, xi[1] - 1.0 / 3.0]
}

#[derive(Debug)]
pub struct NedelecElement {
    pub q: usize,
    pub dim: usize,
    /// Column `j` holds the spanning-set coefficients of basis function `j`.
    coeffs: DMatrix<f64>,
}

impl NedelecElement {
    pub fn shared(q: usize) -> Arc<NedelecElement> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<NedelecElement>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("element cache poisoned");
        guard.entry(q).or_insert_with(|| Arc::new(Self::build(q))).clone()
    }

    fn build(q: usize) -> Self {
        assert!(q >= 1, "Nédélec degree must be positive");
        let n = nedelec_dim(q);
        let mut d = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let dofs = reference_dofs(q, |xi| spanning(q, xi).0[j]);
            for i in 0..n {
                d[(i, j)] = dofs[i];
            }
        }
        let coeffs = d.try_inverse().expect("Nédélec degrees of freedom are unisolvent");
        NedelecElement { q, dim: n, coeffs }
    }

    /// Reference values and curls of the basis functions at `xi`.
    pub fn eval(&self, xi: Point) -> (Vec<[f64; 2]>, Vec<f64>) {
        let (s, c) = spanning(self.q, xi);
        let mut vals = vec![[0.0; 2]; self.dim];
        let mut curls = vec![0.0; self.dim];
        for j in 0..self.dim {
            for m in 0..self.dim {
                let a = self.coeffs[(m, j)];
                if a != 0.0 {
                    vals[j][0] += a * s[m][0];
                    vals[j][1] += a * s[m][1];
                    curls[j] += a * c[m];
                }
            }
        }
        (vals, curls)
    }
}

/// Spanning set of `N_q`: `P_{q-1}^2` by modal functions, then
/// `(x - c)^perp` times homogeneous monomials of degree `q - 1` in `x - c`.
fn spanning(q: usize, xi: Point) -> (Vec<[f64; 2]>, Vec<f64>) {
    let m = dim(q - 1);
    let mut phi = vec![0.0; m];
    let mut grad = vec![[0.0; 2]; m];
    ModalBasis::shared().values_and_gradients(q - 1, xi, &mut phi, &mut grad);
    let mut vals = Vec::with_capacity(nedelec_dim(q));
    let mut curls = Vec::with_capacity(nedelec_dim(q));
    for i in 0..m {
        vals.push([phi[i], 0.0]);
        curls.push(-grad[i][1]);
        vals.push([0.0, phi[i]]);
        curls.push(grad[i][0]);
    }
    let [x, y] = shift(xi);
    let e = (q - 1) as i32;
    for j in 0..q as i32 {
        let mono = x.powi(e - j) * y.powi(j);
        vals.push([-y * mono, x * mono]);
        curls.push((q + 1) as f64 * mono);
    }
    (vals, curls)
}

/// Reference degrees of freedom of a reference field, in local orientation.
pub fn reference_dofs(q: usize, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nedelec_dim(q));
    let rule = SegmentRule::gauss(q + 2);
    for &(lo, hi) in &EDGE_VERTICES {
        let (a, b) = (REF_VERTICES[lo], REF_VERTICES[hi]);
        let dir = [b[0] - a[0], b[1] - a[1]];
        let mut moments = vec![0.0; q];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let v = f([a[0] + s * dir[0], a[1] + s * dir[1]]);
            let t = v[0] * dir[0] + v[1] * dir[1];
            for (m, l) in moments.iter_mut().zip(shifted_legendre(q, s)) {
                *m += w * t * l;
            }
        }
        out.extend(moments);
    }
    if q >= 2 {
        let m = dim(q - 2);
        let rule = TriangleRule::cached(2 * q + 2);
        let mut moments = vec![0.0; 2 * m];
        let mut phi = vec![0.0; m];
        for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
            ModalBasis::shared().values(q - 2, xi, &mut phi);
            let v = f(xi);
            for i in 0..m {
                moments[i] += w * v[0] * phi[i];
                moments[m + i] += w * v[1] * phi[i];
            }
        }
        out.extend(moments);
    }
    out
}

/// Global degree-of-freedom indices and orientation signs of the local
/// Nédélec basis on `cell`. Edge `e` owns `e q .. (e+1) q`, oriented from its
/// lower to its higher global vertex; interior blocks follow all edge blocks.
pub fn cell_dofs(mesh: &Mesh, q: usize, cell: usize) -> Vec<(usize, f64)> {
    let verts = mesh.cells()[cell];
    let mut out = Vec::with_capacity(nedelec_dim(q));
    for (i, &(lo, hi)) in EDGE_VERTICES.iter().enumerate() {
        let e = mesh.cell_edges(cell)[i].0;
        let reversed = verts[lo] > verts[hi];
        for k in 0..q {
            let sign = if reversed && k % 2 == 0 { -1.0 } else { 1.0 };
            out.push((e * q + k, sign));
        }
    }
    let interior = q * (q - 1);
    let base = mesh.num_edges() * q + cell * interior;
    out.extend((0..interior).map(|m| (base + m, 1.0)));
    out
}

pub fn global_dim(mesh: &Mesh, q: usize) -> usize {
    mesh.num_edges() * q + mesh.num_cells() * q * (q - 1)
}

/// Covariant map of a reference vector to a physical cell.
pub fn push_covariant(g: &CellGeometry, v: [f64; 2]) -> [f64; 2] {
    g.push_gradient(v)
}

/// Pull-back `J^T v` of a physical vector.
pub fn pull_covariant(g: &CellGeometry, v: [f64; 2]) -> [f64; 2] {
    let j = &g.jacobian;
    [j[0][0] * v[0] + j[1][0] * v[1], j[0][1] * v[0] + j[1][1] * v[1]]
}

/// Reference Nédélec values and curls at the points of a triangle rule.
#[derive(Debug)]
pub struct NedelecTable {
    pub dim: usize,
    pub rule: Arc<TriangleRule>,
    pub values: Vec<[f64; 2]>,
    pub curls: Vec<f64>,
}

impl NedelecTable {
    pub fn cached(q: usize, order: usize) -> Arc<NedelecTable> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<NedelecTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("table cache poisoned");
        guard
            .entry((q, order))
            .or_insert_with(|| {
                let el = NedelecElement::shared(q);
                let rule = TriangleRule::cached(order);
                let mut values = Vec::with_capacity(rule.len() * el.dim);
                let mut curls = Vec::with_capacity(rule.len() * el.dim);
                for &xi in &rule.points {
                    let (v, c) = el.eval(xi);
                    values.extend(v);
                    curls.extend(c);
                }
                Arc::new(NedelecTable { dim: el.dim, rule, values, curls })
            })
            .clone()
    }

    pub fn values_at(&self, point: usize) -> &[[f64; 2]] {
        &self.values[point * self.dim..(point + 1) * self.dim]
    }

    pub fn curls_at(&self, point: usize) -> &[f64] {
        &self.curls[point * self.dim..(point + 1) * self.dim]
    }
}

/// Continuous Lagrange element with equispaced nodes.
#[derive(Debug)]
pub struct LagrangeElement {
    pub q: usize,
    pub dim: usize,
    /// Nodes as integer barycentric multiples `(i0, i1, i2)`, `i0 + i1 + i2 = q`.
    pub nodes: Vec<[usize; 3]>,
    coeffs: DMatrix<f64>,
    /// Reference Nédélec degrees of freedom of the node function gradients
    /// (`nedelec_dim(q) x dim`), local orientation.
    pub gradient_dofs: DMatrix<f64>,
}

impl LagrangeElement {
    pub fn shared(q: usize) -> Arc<LagrangeElement> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LagrangeElement>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("element cache poisoned");
        guard.entry(q).or_insert_with(|| Arc::new(Self::build(q))).clone()
    }

    fn build(q: usize) -> Self {
        assert!(q >= 1);
        let mut nodes = Vec::with_capacity(dim(q));
        for i2 in 0..=q {
            for i1 in 0..=q - i2 {
                nodes.push([q - i1 - i2, i1, i2]);
            }
        }
        let n = nodes.len();
        let mut v = DMatrix::<f64>::zeros(n, n);
        let mut phi = vec![0.0; n];
        for (i, node) in nodes.iter().enumerate() {
            ModalBasis::shared().values(q, node_point(q, *node), &mut phi);
            for j in 0..n {
                v[(i, j)] = phi[j];
            }
        }
        let coeffs = v.try_inverse().expect("equispaced Lagrange nodes are unisolvent");
        let mut el = LagrangeElement { q, dim: n, nodes, coeffs, gradient_dofs: DMatrix::zeros(0, 0) };
        let mut g = DMatrix::<f64>::zeros(nedelec_dim(q), n);
        for l in 0..n {
            let dofs = reference_dofs(q, |xi| el.eval(xi).1[l]);
            for (i, d) in dofs.into_iter().enumerate() {
                g[(i, l)] = d;
            }
        }
        el.gradient_dofs = g;
        el
    }

    /// Reference values and gradients at `xi`.
    pub fn eval(&self, xi: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut phi = vec![0.0; self.dim];
        let mut grad = vec![[0.0; 2]; self.dim];
        ModalBasis::shared().values_and_gradients(self.q, xi, &mut phi, &mut grad);
        let mut vals = vec![0.0; self.dim];
        let mut grads = vec![[0.0; 2]; self.dim];
        for j in 0..self.dim {
            for m in 0..self.dim {
                let a = self.coeffs[(m, j)];
                vals[j] += a * phi[m];
                grads[j][0] += a * grad[m][0];
                grads[j][1] += a * grad[m][1];
            }
        }
        (vals, grads)
    }
}

pub fn node_point(q: usize, node: [usize; 3]) -> Point {
    [node[1] as f64 / q as f64, node[2] as f64 / q as f64]
}

/// Reference Lagrange values and gradients at the points of a triangle rule.
#[derive(Debug)]
pub struct LagrangeTable {
    pub dim: usize,
    pub rule: Arc<TriangleRule>,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl LagrangeTable {
    pub fn cached(q: usize, order: usize) -> Arc<LagrangeTable> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<LagrangeTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("table cache poisoned");
        guard
            .entry((q, order))
            .or_insert_with(|| {
                let el = LagrangeElement::shared(q);
                let rule = TriangleRule::cached(order);
                let mut values = Vec::with_capacity(rule.len() * el.dim);
                let mut gradients = Vec::with_capacity(rule.len() * el.dim);
                for &xi in &rule.points {
                    let (v, g) = el.eval(xi);
                    values.extend(v);
                    gradients.extend(g);
                }
                Arc::new(LagrangeTable { dim: el.dim, rule, values, gradients })
            })
            .clone()
    }

    pub fn values_at(&self, point: usize) -> &[f64] {
        &self.values[point * self.dim..(point + 1) * self.dim]
    }

    pub fn gradients_at(&self, point: usize) -> &[[f64; 2]] {
        &self.gradients[point * self.dim..(point + 1) * self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nedelec_dimension_and_duality() {
        for q in 1..=6 {
            let el = NedelecElement::shared(q);
            assert_eq!(el.dim, 3 * q + q * (q - 1));
            for j in 0..el.dim {
                let dofs = reference_dofs(q, |xi| el.eval(xi).0[j]);
                for (i, d) in dofs.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-9, "q={q} i={i} j={j} {d}");
                }
            }
        }
    }

    #[test]
    fn nedelec_curl_matches_finite_differences() {
        let el = NedelecElement::shared(3);
        let x = [0.21, 0.33];
        let h = 1e-6;
        let (_, c) = el.eval(x);
        let (px, _) = el.eval([x[0] + h, x[1]]);
        let (mx, _) = el.eval([x[0] - h, x[1]]);
        let (py, _) = el.eval([x[0], x[1] + h]);
        let (my, _) = el.eval([x[0], x[1] - h]);
        for j in 0..el.dim {
            let fd = (px[j][1] - mx[j][1]) / (2.0 * h) - (py[j][0] - my[j][0]) / (2.0 * h);
            assert!((fd - c[j]).abs() < 1e-5 * (1.0 + c[j].abs()), "{j}");
        }
    }

    #[test]
    fn nedelec_contains_full_lower_degree_polynomials() {
        // a P_{q-1} vector field is reproduced by its degrees of freedom
        let q = 3;
        let el = NedelecElement::shared(q);
        let f = |x: Point| [x[0] * x[1] - 0.5 * x[1] * x[1], 1.0 + x[0] * x[0]];
        let dofs = reference_dofs(q, f);
        for x in [[0.1, 0.2], [0.6, 0.3], [0.05, 0.9]] {
            let (v, _) = el.eval(x);
            let mut s = [0.0; 2];
            for j in 0..el.dim {
                s[0] += dofs[j] * v[j][0];
                s[1] += dofs[j] * v[j][1];
            }
            let e = f(x);
            assert!((s[0] - e[0]).abs() < 1e-10 && (s[1] - e[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn lagrange_nodal_interpolation() {
        for q in 1..=6 {
            let el = LagrangeElement::shared(q);
            assert_eq!(el.dim, dim(q));
            for (i, node) in el.nodes.iter().enumerate() {
                let (v, _) = el.eval(node_point(q, *node));
                for (j, val) in v.iter().enumerate() {
                    assert!((val - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
            // partition of unity and zero total gradient
            let (v, g) = el.eval([0.27, 0.41]);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(g.iter().map(|g| g[0].abs() + g[1].abs()).sum::<f64>() > 0.0);
            let gs = g.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!(gs[0].abs() < 1e-9 && gs[1].abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_embed_into_nedelec() {
        let q = 4;
        let lag = LagrangeElement::shared(q);
        let ned = NedelecElement::shared(q);
        let x = [0.3, 0.15];
        let (_, g) = lag.eval(x);
        let (v, c) = ned.eval(x);
        for l in 0..lag.dim {
            let mut s = [0.0; 2];
            let mut curl = 0.0;
            for i in 0..ned.dim {
                s[0] += lag.gradient_dofs[(i, l)] * v[i][0];
                s[1] += lag.gradient_dofs[(i, l)] * v[i][1];
                curl += lag.gradient_dofs[(i, l)] * c[i];
            }
            assert!((s[0] - g[l][0]).abs() < 1e-9 && (s[1] - g[l][1]).abs() < 1e-9);
            assert!(curl.abs() < 1e-8);
        }
    }
}
