//! `H_0(curl)`-conforming reconstruction `R(E_h) = sum_a E_a` of a broken
//! vector field by local problems on vertex patches, discretized with
//! first-kind Nédélec elements of degree `q`.
//!
//! On the patch of `a`: `U_a` minimizes `||curl U - r_a||` over the
//! discretely divergence-free part of `N_{q,0}(omega_a)` with
//! `r_a = curl_h(psi_a E_h) - L(psi_a E_h)`, and `theta_a` in `S_{q,0}(omega_a)`
//! is the Galerkin projection of `psi_a E_h` onto gradients. Then
//! `E_a = U_a + grad theta_a`.

pub mod element;
mod patch;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

pub use element::{global_dim, nedelec_dim, LagrangeElement, NedelecElement};
pub use patch::{solve_patch_curl, solve_patch_poisson, NodalSpace, PatchSolution, PatchSpaces};

use crate::broken::{edge_norm_squared, edge_rule, jump_c, scalar_jump_of_curl, BrokenField, HatProduct, VectorField};
use crate::error::{FieldError, ParseError, ReconstructionError};
use crate::lifting::LiftingOperator;
use crate::mesh::{Mesh, Point};
use crate::quadrature::SegmentRule;
use element::{cell_dofs, pull_covariant, reference_dofs, NedelecTable};
use patch::{for_each_point, nodal_system, solve_nodal_projection, solve_patch};

/// Default reconstruction degree for input of degree `p`.
pub fn default_degree(p: usize) -> usize {
    p + 2
}

/// A global Nédélec field of degree `q` over the whole mesh.
#[derive(Clone, Debug)]
pub struct ConformingField {
    mesh: Arc<Mesh>,
    q: usize,
    coefficients: Vec<f64>,
}

impl ConformingField {
    pub fn zeros(mesh: &Arc<Mesh>, q: usize) -> Self {
        assert!(q >= 1);
        ConformingField { mesh: mesh.clone(), q, coefficients: vec![0.0; global_dim(mesh, q)] }
    }

    pub fn from_coefficients(mesh: &Arc<Mesh>, q: usize, coefficients: Vec<f64>) -> Result<Self, FieldError> {
        let expected = global_dim(mesh, q);
        if coefficients.len() != expected {
            return Err(FieldError::DofCountMismatch { expected, found: coefficients.len() });
        }
        Ok(ConformingField { mesh: mesh.clone(), q, coefficients })
    }

    /// Canonical interpolant of a field; edge moments are read from the
    /// `left` cell of each edge, so `f` should be tangentially continuous.
    pub fn interpolate(mesh: &Arc<Mesh>, q: usize, f: &impl VectorField) -> Self {
        let mut out = Self::zeros(mesh, q);
        for k in 0..mesh.num_cells() {
            let g = mesh.geometry(k);
            let dofs = reference_dofs(q, |xi| pull_covariant(g, f.value(k, g.to_physical(xi))));
            for (i, ((global, sign), value)) in cell_dofs(mesh, q, k).into_iter().zip(dofs).enumerate() {
                if i < 3 * q && mesh.edges()[global / q].left != k {
                    continue;
                }
                out.coefficients[global] = sign * value;
            }
        }
        out
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn num_dofs(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Coefficients of the reference basis on `cell`, orientation applied.
    pub fn local_coefficients(&self, cell: usize) -> Vec<f64> {
        cell_dofs(&self.mesh, self.q, cell).into_iter().map(|(g, s)| s * self.coefficients[g]).collect()
    }

    /// Largest tangential jump over interior edges and largest tangential
    /// trace on boundary edges, sampled at the points of `rule`.
    pub fn conformity_defect(&self, rule: &SegmentRule) -> (f64, f64) {
        let mut jump: f64 = 0.0;
        let mut trace: f64 = 0.0;
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            let m = jump_c(&self.mesh, self, e, rule).into_iter().fold(0.0, |a: f64, b| a.max(b.abs()));
            if edge.is_boundary() {
                trace = trace.max(m);
            } else {
                jump = jump.max(m);
            }
        }
        (jump, trace)
    }

    /// `nedelec q ndof` followed by one coefficient per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nedelec {} {}", self.q, self.coefficients.len()).unwrap();
        for c in &self.coefficients {
            writeln!(out, "{c:.16e}").unwrap();
        }
        out
    }

    pub fn from_text(mesh: &Arc<Mesh>, text: &str) -> Result<Self, FieldError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(ParseError::UnexpectedEof { expected: "nedelec header" })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let bad = || ParseError::Syntax { line, message: "expected `nedelec q ndof`".to_string() };
        if parts.len() != 3 || parts[0] != "nedelec" {
            return Err(bad().into());
        }
        let q: usize = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad().into());
        }
        let mut coefficients = Vec::with_capacity(n);
        for (line, row) in lines {
            let v: f64 =
                row.parse().map_err(|_| ParseError::Syntax { line, message: "malformed coefficient".to_string() })?;
            coefficients.push(v);
        }
        if coefficients.len() != n {
            return Err(ParseError::UnexpectedEof { expected: "coefficient rows" }.into());
        }
        Self::from_coefficients(mesh, q, coefficients)
    }

    fn eval(&self, cell: usize, x: Point) -> ([f64; 2], f64) {
        let g = self.mesh.geometry(cell);
        let (vals, curls) = NedelecElement::shared(self.q).eval(g.to_reference(x));
        let c = self.local_coefficients(cell);
        let mut v = [0.0; 2];
        let mut curl = 0.0;
        for j in 0..c.len() {
            v[0] += c[j] * vals[j][0];
            v[1] += c[j] * vals[j][1];
            curl += c[j] * curls[j];
        }
        (g.push_gradient(v), curl / g.det)
    }
}

impl VectorField for ConformingField {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        self.eval(cell, x).0
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        self.eval(cell, x).1
    }
}

/// A patch-local Nédélec field, zero outside the patch.
pub struct PatchField<'a> {
    pub mesh: &'a Mesh,
    pub spaces: &'a PatchSpaces,
    pub coefficients: &'a [f64],
}

impl PatchField<'_> {
    fn eval(&self, cell: usize, x: Point) -> ([f64; 2], f64) {
        let Ok(c) = self.spaces.patch.cells.binary_search(&cell) else {
            return ([0.0; 2], 0.0);
        };
        let g = self.mesh.geometry(cell);
        let (vals, curls) = NedelecElement::shared(self.spaces.q).eval(g.to_reference(x));
        let mut v = [0.0; 2];
        let mut curl = 0.0;
        for (j, dof) in self.spaces.cell_edge_dofs[c].iter().enumerate() {
            if let Some((i, s)) = dof {
                let a = s * self.coefficients[*i];
                v[0] += a * vals[j][0];
                v[1] += a * vals[j][1];
                curl += a * curls[j];
            }
        }
        (g.push_gradient(v), curl / g.det)
    }
}

impl VectorField for PatchField<'_> {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        self.eval(cell, x).0
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        self.eval(cell, x).1
    }
}

/// Right-hand side `curl_h(psi_a E_h) - L(psi_a E_h)` of the patch curl problem,
/// with the lifting into degree `p` of `E_h`.
fn curl_rhs<'a>(eh: &'a BrokenField, spaces: &'a PatchSpaces) -> impl Fn(usize, Point) -> f64 + 'a {
    let mesh = eh.mesh();
    let lift = LiftingOperator::new(mesh, eh.degree()).lift_on_patch(eh, &spaces.patch);
    let patch = &spaces.patch;
    move |k, x| {
        let product = HatProduct { field: eh, patch, mesh };
        product.curl(k, x) - lift.scalar_value(k, x)
    }
}

/// All local solves of one vertex patch.
pub fn solve_vertex(eh: &BrokenField, spaces: &PatchSpaces) -> Result<PatchSolution, ReconstructionError> {
    solve_patch(eh.mesh(), spaces, eh, curl_rhs(eh, spaces))
}

fn check_degree(eh: &BrokenField, q: usize) -> Result<(), ReconstructionError> {
    let min = (eh.degree() + 1).max(1);
    if q < min {
        return Err(ReconstructionError::DegreeTooLow { q, min });
    }
    Ok(())
}

/// The reconstruction together with its patch data, in vertex order.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub field: ConformingField,
    pub spaces: Vec<PatchSpaces>,
    pub solutions: Vec<PatchSolution>,
}

impl Reconstruction {
    pub fn patch_field(&self, vertex: usize) -> PatchField<'_> {
        PatchField { mesh: self.field.mesh(), spaces: &self.spaces[vertex], coefficients: &self.solutions[vertex].e_a }
    }

    /// Largest relative residual of the patch saddle-point solves.
    pub fn max_residual(&self) -> f64 {
        self.solutions.iter().map(|s| s.residual).fold(0.0, f64::max)
    }
}

pub fn reconstruct_with_patches(eh: &BrokenField, q: usize) -> Result<Reconstruction, ReconstructionError> {
    assert!(eh.is_vector());
    check_degree(eh, q)?;
    let mesh = eh.mesh().clone();
    let results: Vec<Result<(PatchSpaces, PatchSolution), ReconstructionError>> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|a| {
            let spaces = PatchSpaces::new(&mesh, &mesh.vertex_patch(a), q);
            let sol = solve_vertex(eh, &spaces)?;
            Ok((spaces, sol))
        })
        .collect();
    let mut field = ConformingField::zeros(&mesh, q);
    let mut spaces = Vec::with_capacity(results.len());
    let mut solutions = Vec::with_capacity(results.len());
    for r in results {
        let (s, sol) = r?;
        for (&g, c) in s.edge_dofs.iter().zip(&sol.e_a) {
            field.coefficients[g] += c;
        }
        spaces.push(s);
        solutions.push(sol);
    }
    Ok(Reconstruction { field, spaces, solutions })
}

/// `R(E_h)` with reconstruction degree `q >= p + 1`.
pub fn reconstruct(eh: &BrokenField, q: usize) -> Result<ConformingField, ReconstructionError> {
    Ok(reconstruct_with_patches(eh, q)?.field)
}

/// Cellwise `||E_c - E_h||_K^2` and `||curl(E_c - E_h)||_K^2`.
pub fn difference_norms(ec: &ConformingField, eh: &BrokenField) -> Vec<(f64, f64)> {
    let mesh = ec.mesh().clone();
    let q = ec.degree();
    let table = NedelecTable::cached(q, 2 * q.max(eh.degree()) + 2);
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let g = mesh.geometry(k);
            let c = ec.local_coefficients(k);
            let mut l2 = 0.0;
            let mut curl = 0.0;
            for (p, (&xi, &w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                let mut v = [0.0; 2];
                let mut rc = 0.0;
                for (j, (val, cu)) in table.values_at(p).iter().zip(table.curls_at(p)).enumerate() {
                    v[0] += c[j] * val[0];
                    v[1] += c[j] * val[1];
                    rc += c[j] * cu;
                }
                let v = g.push_gradient(v);
                let x = g.to_physical(xi);
                let e = eh.value(k, x);
                let d = [v[0] - e[0], v[1] - e[1]];
                l2 += w * g.det * (d[0] * d[0] + d[1] * d[1]);
                curl += w * g.det * (rc / g.det - eh.curl(k, x)).powi(2);
            }
            (l2, curl)
        })
        .collect()
}

/// Measured constants of the two bounds on `R(E_h) - E_h`; `None` marks
/// conforming input (vanishing jump terms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremRatios {
    pub curl: Option<f64>,
    pub l2: Option<f64>,
    pub curl_error: f64,
    pub l2_error: f64,
    pub curl_jumps: f64,
    pub l2_jumps: f64,
}

/// `ratio_curl = ||curl_h(E_c - E_h)|| / {sum_K (h_K/p) ||[curl_h E_h]||^2_{dK \ dOmega} + (p^2/h_K) ||[E_h]^c||^2_{dK}}^{1/2}`,
/// `ratio_L2 = ||E_c - E_h|| / {sum_K h_K ||[E_h]^c||^2_{dK}}^{1/2}`; `p` is
/// taken as at least one.
pub fn theorem_ratios(eh: &BrokenField, ec: &ConformingField) -> TheoremRatios {
    let mesh = eh.mesh();
    let p = eh.degree().max(1) as f64;
    let rule = edge_rule(eh.degree() + 1);
    let tang: Vec<f64> =
        (0..mesh.num_edges()).map(|e| edge_norm_squared(mesh, e, &rule, &jump_c(mesh, eh, e, &rule))).collect();
    let curl_jump: Vec<f64> = (0..mesh.num_edges())
        .map(|e| edge_norm_squared(mesh, e, &rule, &scalar_jump_of_curl(mesh, eh, e, &rule)))
        .collect();
    let mut den_curl = 0.0;
    let mut den_l2 = 0.0;
    for k in 0..mesh.num_cells() {
        let h = mesh.geometry(k).diameter;
        for &(e, _) in mesh.cell_edges(k) {
            den_curl += h / p * curl_jump[e] + p * p / h * tang[e];
            den_l2 += h * tang[e];
        }
    }
    let norms = difference_norms(ec, eh);
    let l2_error = norms.iter().map(|n| n.0).sum::<f64>().sqrt();
    let curl_error = norms.iter().map(|n| n.1).sum::<f64>().sqrt();
    let scale = eh.l2_norm().max(f64::MIN_POSITIVE);
    let ratio = |num: f64, den2: f64| {
        let den = den2.sqrt();
        (den > 1e-12 * scale).then(|| num / den)
    };
    TheoremRatios {
        curl: ratio(curl_error, den_curl),
        l2: ratio(l2_error, den_l2),
        curl_error,
        l2_error,
        curl_jumps: den_curl.sqrt(),
        l2_jumps: den_l2.sqrt(),
    }
}

/// Poincaré quotient of one patch:
/// `||E_a - psi_a E_h|| / (h_a {||curl_h(E_a - psi_a E_h)||^2 + sum_{F in F_a} h_F^{-1} ||[psi_a E_h]^c||_F^2}^{1/2})`,
/// `None` when the denominator vanishes.
pub fn poincare_ratio_of(eh: &BrokenField, spaces: &PatchSpaces, solution: &PatchSolution) -> Option<f64> {
    let mesh = eh.mesh();
    let patch = &spaces.patch;
    let product = HatProduct { field: eh, patch, mesh };
    let mut num = 0.0;
    let mut curl = 0.0;
    for_each_point(mesh, spaces, |d| {
        let k = patch.cells[d.cell_index];
        let mut v = [0.0; 2];
        let mut c = 0.0;
        for (j, dof) in spaces.cell_edge_dofs[d.cell_index].iter().enumerate() {
            if let Some((i, s)) = dof {
                let a = s * solution.e_a[*i];
                v[0] += a * d.ned_values[j][0];
                v[1] += a * d.ned_values[j][1];
                c += a * d.ned_curls[j];
            }
        }
        let w = product.value(k, d.x);
        num += d.weight * ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2));
        curl += d.weight * (c - product.curl(k, d.x)).powi(2);
    });
    let rule = edge_rule(eh.degree() + 1);
    let jumps: f64 = patch
        .edges
        .iter()
        .map(|&e| edge_norm_squared(mesh, e, &rule, &jump_c(mesh, &product, e, &rule)) / mesh.edges()[e].length)
        .sum();
    let den = patch.diameter * (curl + jumps).sqrt();
    let scale = product_norm(mesh, spaces, &product).max(f64::MIN_POSITIVE);
    (den > 1e-12 * scale).then(|| num.sqrt() / den)
}

fn product_norm(mesh: &Mesh, spaces: &PatchSpaces, f: &impl VectorField) -> f64 {
    let mut s = 0.0;
    for_each_point(mesh, spaces, |d| {
        let v = f.value(spaces.patch.cells[d.cell_index], d.x);
        s += d.weight * (v[0] * v[0] + v[1] * v[1]);
    });
    s.sqrt()
}

/// Poincaré quotients of all patches, in vertex order.
pub fn poincare_ratios(eh: &BrokenField, q: usize) -> Result<Vec<Option<f64>>, ReconstructionError> {
    let rec = reconstruct_with_patches(eh, q)?;
    Ok(rec.spaces.iter().zip(&rec.solutions).map(|(s, sol)| poincare_ratio_of(eh, s, sol)).collect())
}

/// Poincaré quotient of the patch of `vertex`.
pub fn poincare_ratio(eh: &BrokenField, vertex: usize, q: usize) -> Result<Option<f64>, ReconstructionError> {
    check_degree(eh, q)?;
    let mesh = eh.mesh();
    let spaces = PatchSpaces::new(mesh, &mesh.vertex_patch(vertex), q);
    let sol = solve_vertex(eh, &spaces)?;
    Ok(poincare_ratio_of(eh, &spaces, &sol))
}

/// Residuals of the discrete Helmholtz splitting `v = (v - grad xi) + grad xi`
/// with `xi` in `S_q(omega_a)` solving the Neumann problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HelmholtzResiduals {
    /// `| ||v||^2 - ||v - grad xi||^2 - ||grad xi||^2 |`.
    pub pythagoras_defect: f64,
    /// `max_w |(v - grad xi, grad w)|` over the nodal basis.
    pub projection_residual: f64,
    pub norm: f64,
    pub gradient_norm: f64,
    pub remainder_norm: f64,
}

pub fn helmholtz_check(mesh: &Mesh, vertex: usize, v: &impl VectorField, q: usize) -> HelmholtzResiduals {
    let spaces = PatchSpaces::new(mesh, &mesh.vertex_patch(vertex), q.max(1));
    let nodal = NodalSpace::new(mesh, &spaces.patch, spaces.q, true);
    let xi = solve_nodal_projection(mesh, &spaces, &nodal, |k, x| v.value(k, x), Some(0))
        .expect("pinned Neumann stiffness matrix is positive definite");
    let (a, b) = nodal_system(mesh, &spaces, &nodal, |k, x| v.value(k, x));
    let residual = b - a * DVector::from_column_slice(&xi);
    let mut norm = 0.0;
    let mut grad = 0.0;
    let mut rem = 0.0;
    for_each_point(mesh, &spaces, |d| {
        let val = v.value(spaces.patch.cells[d.cell_index], d.x);
        let mut g = [0.0; 2];
        for (l, node) in nodal.cell_nodes[d.cell_index].iter().enumerate() {
            if let Some(i) = node {
                g[0] += xi[*i] * d.lag_gradients[l][0];
                g[1] += xi[*i] * d.lag_gradients[l][1];
            }
        }
        norm += d.weight * (val[0] * val[0] + val[1] * val[1]);
        grad += d.weight * (g[0] * g[0] + g[1] * g[1]);
        rem += d.weight * ((val[0] - g[0]).powi(2) + (val[1] - g[1]).powi(2));
    });
    HelmholtzResiduals {
        pythagoras_defect: (norm - rem - grad).abs(),
        projection_residual: residual.amax(),
        norm: norm.sqrt(),
        gradient_norm: grad.sqrt(),
        remainder_norm: rem.sqrt(),
    }
}
