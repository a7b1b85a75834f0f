//! Symmetric interior penalty dG discretization of
//! `omega^2 eps E + rot(nu curl E) = J` with `E x n = 0` on the boundary:
//!
//! `b_h(v, w) = omega^2 (eps v, w) + (nu curl_h v, curl_h w) + eta_* s_h(v, w)
//!            - sum_F [({nu curl_h v}, [w]^c)_F + ([v]^c, {nu curl_h w})_F]`
//!
//! with `s_h(v, w) = sum_F nu_F^# p^2/h_F ([v]^c, [w]^c)_F`. The consistency
//! terms carry a minus sign because `[w]^c` is the jump of `w . t_F`, and
//! `(rot s, w)_K = (s, curl w)_K - int_dK s (w . t_K)`.

pub mod matrix;

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

pub use matrix::{pcg, solve_dense, solve_spd, BlockMatrix, SolveStats, DENSE_LIMIT};

use crate::broken::basis::{dim, physical_values_and_gradients, BasisTable};
use crate::broken::{cell_order, edge_rule, integrate_cell, jump_c, BrokenField, VectorField};
use crate::error::SolverError;
use crate::lifting::{lifting_constant_exact, LiftingOperator};
use crate::mesh::{Mesh, Point};
use crate::problems::Problem;

/// Piecewise constant `eps`, `nu` and a frequency `omega > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialModel {
    eps: Vec<f64>,
    nu: Vec<f64>,
    omega: f64,
}

impl MaterialModel {
    pub fn new(eps: Vec<f64>, nu: Vec<f64>, omega: f64) -> Result<Self, SolverError> {
        assert_eq!(eps.len(), nu.len());
        for (name, values) in [("eps", &eps), ("nu", &nu)] {
            if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                return Err(SolverError::InvalidMaterial { name, cell, value });
            }
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(SolverError::InvalidMaterial { name: "omega", cell: 0, value: omega });
        }
        Ok(MaterialModel { eps, nu, omega })
    }

    pub fn uniform(mesh: &Mesh, omega: f64, eps: f64, nu: f64) -> Result<Self, SolverError> {
        Self::new(vec![eps; mesh.num_cells()], vec![nu; mesh.num_cells()], omega)
    }

    pub fn for_problem(mesh: &Mesh, problem: &Problem) -> Result<Self, SolverError> {
        Self::uniform(mesh, problem.omega, problem.eps, problem.nu)
    }

    pub fn eps(&self, cell: usize) -> f64 {
        self.eps[cell]
    }

    pub fn nu(&self, cell: usize) -> f64 {
        self.nu[cell]
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `eps_F^#`: the larger value of the two cells sharing `edge`.
    pub fn eps_sharp(&self, mesh: &Mesh, edge: usize) -> f64 {
        mesh.edges()[edge].cells().map(|k| self.eps[k]).fold(0.0, f64::max)
    }

    pub fn nu_sharp(&self, mesh: &Mesh, edge: usize) -> f64 {
        mesh.edges()[edge].cells().map(|k| self.nu[k]).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DGConfig {
    pub degree: usize,
    pub eta_star: f64,
    /// Relative residual tolerance of the iterative solver.
    pub tol: f64,
    pub max_iter: usize,
}

impl DGConfig {
    pub fn new(degree: usize, eta_star: f64) -> Self {
        DGConfig { degree, eta_star, tol: 1e-10, max_iter: 20_000 }
    }

    /// Penalty from [`auto_eta_star`].
    pub fn auto(mesh: &Mesh, degree: usize) -> Self {
        Self::new(degree, auto_eta_star(mesh, degree))
    }
}

/// `max(10, 1/2 + 2 * 1.5 * C_lift^2)` with `C_lift` the exact lifting
/// constant of the mesh for jumps and target of degree `p`.
pub fn auto_eta_star(mesh: &Mesh, degree: usize) -> f64 {
    let c = lifting_constant_exact(mesh, degree, degree);
    (0.5 + 2.0 * 1.5 * c * c).max(10.0)
}

type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Right-hand side `J` and optionally its exact divergence.
#[derive(Clone)]
pub struct SourceTerm {
    j: VectorFn,
    div_j: Option<ScalarFn>,
}

impl SourceTerm {
    pub fn new(j: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        SourceTerm { j: Arc::new(j), div_j: None }
    }

    pub fn with_divergence(
        j: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        div_j: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SourceTerm { j: Arc::new(j), div_j: Some(Arc::new(div_j)) }
    }

    pub fn zero() -> Self {
        Self::with_divergence(|_| [0.0, 0.0], |_| 0.0)
    }

    pub fn from_problem(problem: &Problem) -> Self {
        let (a, b) = (*problem, *problem);
        Self::with_divergence(move |x| a.source(x), move |x| b.div_source(x))
    }

    pub fn value(&self, x: Point) -> [f64; 2] {
        (self.j)(x)
    }

    pub fn divergence(&self, x: Point) -> Option<f64> {
        self.div_j.as_ref().map(|d| d(x))
    }

    pub fn has_divergence(&self) -> bool {
        self.div_j.is_some()
    }

    /// `lambda J`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let j = self.j.clone();
        SourceTerm {
            j: Arc::new(move |x| {
                let v = j(x);
                [lambda * v[0], lambda * v[1]]
            }),
            div_j: self.div_j.clone().map(|d| Arc::new(move |x| lambda * d(x)) as ScalarFn),
        }
    }
}

/// Physical basis data of a vector field of degree `p` at one point: tangential
/// traces against `t` and curls of the `2 * dim(p)` vector modes.
fn vector_modes(mesh: &Mesh, cell: usize, degree: usize, x: Point, t: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    let n = dim(degree);
    let mut phi = vec![0.0; n];
    let mut grad = vec![[0.0; 2]; n];
    physical_values_and_gradients(mesh.geometry(cell), degree, x, &mut phi, &mut grad);
    let mut trace = vec![0.0; 2 * n];
    let mut curl = vec![0.0; 2 * n];
    for i in 0..n {
        trace[i] = phi[i] * t[0];
        trace[n + i] = phi[i] * t[1];
        curl[i] = -grad[i][1];
        curl[n + i] = grad[i][0];
    }
    (trace, curl)
}

/// The dG discretization on one mesh: cached system matrices and the norms,
/// forms and solution procedures built on them.
pub struct Discretization {
    mesh: Arc<Mesh>,
    materials: MaterialModel,
    config: DGConfig,
    matrix: OnceLock<BlockMatrix>,
    norm_matrix: OnceLock<BlockMatrix>,
}

impl Discretization {
    pub fn new(mesh: &Arc<Mesh>, materials: MaterialModel, config: DGConfig) -> Result<Self, SolverError> {
        if config.degree == 0 {
            return Err(SolverError::DegreeTooLow(0));
        }
        assert!(config.degree <= crate::broken::basis::MAX_DEGREE);
        assert_eq!(materials.eps.len(), mesh.num_cells(), "one material value per cell");
        Ok(Discretization {
            mesh: mesh.clone(),
            materials,
            config,
            matrix: OnceLock::new(),
            norm_matrix: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn materials(&self) -> &MaterialModel {
        &self.materials
    }

    pub fn config(&self) -> &DGConfig {
        &self.config
    }

    pub fn degree(&self) -> usize {
        self.config.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_cells() * 2 * dim(self.degree())
    }

    /// `omega^2 eps_K I + nu_K (curl phi_j, curl phi_i)_K` in the orthonormal basis.
    fn cell_matrix(&self, cell: usize) -> DMatrix<f64> {
        let p = self.degree();
        let n = dim(p);
        let table = BasisTable::cached(p, cell_order(p));
        let g = self.mesh.geometry(cell);
        let s = g.det.sqrt().recip();
        let w2 = self.materials.omega * self.materials.omega;
        let mut m = DMatrix::identity(2 * n, 2 * n) * (w2 * self.materials.eps[cell]);
        let mut curl = vec![0.0; 2 * n];
        let nu = self.materials.nu[cell];
        for (q, &w) in table.rule.weights.iter().enumerate() {
            for (i, gr) in table.gradients_at(q).iter().enumerate() {
                let gp = g.push_gradient(*gr);
                curl[i] = -gp[1] * s;
                curl[n + i] = gp[0] * s;
            }
            let c = w * g.det * nu;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    m[(a, b)] += c * curl[a] * curl[b];
                }
            }
        }
        m
    }

    /// Tiles contributed by one edge: penalty `scale * nu_F^# p^2/h_F ([v],[w])`
    /// and, if requested, the two consistency terms.
    fn edge_blocks(&self, edge: usize, scale: f64, consistency: bool) -> Vec<(usize, usize, DMatrix<f64>)> {
        let mesh = &*self.mesh;
        let p = self.degree();
        let m = 2 * dim(p);
        let e = &mesh.edges()[edge];
        let rule = edge_rule(p);
        let alpha = if e.is_boundary() { 1.0 } else { 0.5 };
        let pen = scale * self.materials.nu_sharp(mesh, edge) * (p * p) as f64 / e.length;
        let sides: Vec<(usize, f64)> = std::iter::once((e.left, 1.0)).chain(e.right.map(|r| (r, -1.0))).collect();
        let mut blocks: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, m); sides.len() * sides.len()];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let x = e.point(mesh, s);
            let modes: Vec<_> = sides.iter().map(|&(k, _)| vector_modes(mesh, k, p, x, e.tangent)).collect();
            let wl = w * e.length;
            for (ri, &(kr, sr)) in sides.iter().enumerate() {
                for (si, &(ks, ss)) in sides.iter().enumerate() {
                    let (tr, cr) = &modes[ri];
                    let (ts, cs) = &modes[si];
                    let (nr, ns) = (self.materials.nu[kr], self.materials.nu[ks]);
                    let block = &mut blocks[ri * sides.len() + si];
                    for b in 0..m {
                        for a in 0..m {
                            let mut val = pen * sr * ss * tr[b] * ts[a];
                            if consistency {
                                val -= alpha * ns * cs[a] * sr * tr[b] + ss * ts[a] * alpha * nr * cr[b];
                            }
                            block[(b, a)] += wl * val;
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(blocks.len());
        for (ri, &(kr, _)) in sides.iter().enumerate() {
            for (si, &(ks, _)) in sides.iter().enumerate() {
                out.push((kr, ks, blocks[ri * sides.len() + si].clone()));
            }
        }
        out
    }

    fn assemble_with(&self, cells: bool, scale: f64, consistency: bool) -> BlockMatrix {
        let mesh = &*self.mesh;
        let m = 2 * dim(self.degree());
        let mut a = BlockMatrix::new(mesh.num_cells(), m);
        if cells {
            let local: Vec<DMatrix<f64>> = (0..mesh.num_cells()).into_par_iter().map(|k| self.cell_matrix(k)).collect();
            for (k, block) in local.iter().enumerate() {
                a.add_block(k, k, block);
            }
        }
        let edges: Vec<_> =
            (0..mesh.num_edges()).into_par_iter().map(|e| self.edge_blocks(e, scale, consistency)).collect();
        for tiles in &edges {
            for (r, c, block) in tiles {
                a.add_block(*r, *c, block);
            }
        }
        a
    }

    /// The matrix of `b_h`.
    pub fn matrix(&self) -> &BlockMatrix {
        self.matrix.get_or_init(|| self.assemble_with(true, self.config.eta_star, true))
    }

    /// The matrix of the squared dG norm `omega^2 ||v||_eps^2 + ||curl_h v||_nu^2 + s_h(v, v)`.
    pub fn norm_matrix(&self) -> &BlockMatrix {
        self.norm_matrix.get_or_init(|| self.assemble_with(true, 1.0, false))
    }

    /// The matrix of `s_h` (no `eta_*`).
    pub fn stabilization_matrix(&self) -> BlockMatrix {
        self.assemble_with(false, 1.0, false)
    }

    /// The cellwise part `omega^2 (eps v, w) + (nu curl_h v, curl_h w)`.
    pub fn volume_matrix(&self) -> BlockMatrix {
        let mesh = &*self.mesh;
        let mut a = BlockMatrix::new(mesh.num_cells(), 2 * dim(self.degree()));
        for k in 0..mesh.num_cells() {
            a.add_block(k, k, &self.cell_matrix(k));
        }
        a
    }

    /// `rhs_i = (J, phi_i)`.
    pub fn rhs(&self, source: &SourceTerm) -> Vec<f64> {
        let p = self.degree();
        BrokenField::project_vector_with(&self.mesh, p, cell_order(p) + 4, |_, x| source.value(x))
            .coefficients()
            .to_vec()
    }

    pub fn assemble(&self, source: &SourceTerm) -> (&BlockMatrix, Vec<f64>) {
        (self.matrix(), self.rhs(source))
    }

    pub fn solve(&self, source: &SourceTerm) -> Result<(BrokenField, SolveStats), SolverError> {
        let (a, b) = self.assemble(source);
        let (x, stats) = solve_spd(a, &b, self.config.tol, self.config.max_iter)?;
        Ok((BrokenField::from_coefficients(&self.mesh, self.degree(), 2, x), stats))
    }

    fn check(&self, v: &BrokenField) {
        assert!(v.is_vector() && v.degree() == self.degree(), "field must be a degree-p vector field");
    }

    pub fn bilinear(&self, v: &BrokenField, w: &BrokenField) -> f64 {
        self.check(v);
        self.check(w);
        self.matrix().form(v.coefficients(), w.coefficients())
    }

    /// `s_h(v, w)` for broken fields of any degree.
    pub fn stabilization(&self, v: &impl VectorField, w: &impl VectorField) -> f64 {
        let mesh = &*self.mesh;
        let p = self.degree();
        let rule = edge_rule(p + 1);
        (0..mesh.num_edges())
            .map(|e| {
                let edge = &mesh.edges()[e];
                let jv = jump_c(mesh, v, e, &rule);
                let jw = jump_c(mesh, w, e, &rule);
                let integral: f64 =
                    rule.weights.iter().zip(jv.iter().zip(&jw)).map(|(q, (a, b))| q * a * b).sum::<f64>() * edge.length;
                self.materials.nu_sharp(mesh, e) * (p * p) as f64 / edge.length * integral
            })
            .sum()
    }

    pub fn dg_norm(&self, v: &BrokenField) -> f64 {
        self.check(v);
        self.norm_matrix().form(v.coefficients(), v.coefficients()).max(0.0).sqrt()
    }

    /// Smallest sampled `b_h(v, v) / |||v|||^2` over random fields.
    pub fn coercivity_check(&self, samples: usize, rng: &mut impl Rng) -> f64 {
        (0..samples)
            .map(|_| {
                let v = BrokenField::random(&self.mesh, self.degree(), 2, rng);
                self.bilinear(&v, &v) / self.dg_norm(&v).powi(2)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact coercivity constant: the smallest generalized eigenvalue of
    /// `(b_h, |||.|||^2)`. Dense, for small meshes.
    pub fn coercivity_exact(&self) -> Result<f64, SolverError> {
        let n = self.norm_matrix().to_dense();
        let a = self.matrix().to_dense();
        let l = n.cholesky().ok_or(SolverError::NotPositiveDefinite)?.l();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
            .ok_or(SolverError::NotPositiveDefinite)?;
        let m = &linv * a * linv.transpose();
        let m = 0.5 * (&m + m.transpose());
        Ok(m.symmetric_eigenvalues().min())
    }

    /// `D_ij = (L(phi_i), nu curl_h phi_j)` for all vector modes; the lifting
    /// form of the consistency terms is `-(D + D^T)`.
    pub fn lifting_consistency_matrix(&self) -> DMatrix<f64> {
        let p = self.degree();
        let ndof = self.num_dofs();
        let op = LiftingOperator::new(&self.mesh, p);
        let unit = |i: usize| {
            let mut c = vec![0.0; ndof];
            c[i] = 1.0;
            BrokenField::from_coefficients(&self.mesh, p, 2, c)
        };
        let lifts: Vec<BrokenField> = (0..ndof).into_par_iter().map(|i| op.lift(&unit(i))).collect();
        let curls: Vec<BrokenField> = (0..ndof)
            .into_par_iter()
            .map(|j| {
                let mut c = unit(j).curl_h().elevate(p);
                for k in 0..self.mesh.num_cells() {
                    let nu = self.materials.nu[k];
                    c.cell_block_mut(k).iter_mut().for_each(|x| *x *= nu);
                }
                c
            })
            .collect();
        DMatrix::from_fn(ndof, ndof, |i, j| lifts[i].dot(&curls[j]))
    }

    /// `|||e|||_#` restricted to each cell (squared), for an exact solution
    /// `exact` with known curl and its dG approximation `eh`.
    pub fn error_measure(&self, exact: &impl VectorField, eh: &BrokenField) -> ErrorMeasure {
        let mesh = &*self.mesh;
        let p = self.degree();
        let order = cell_order(eh.degree().max(p)) + 6;
        let w2 = self.materials.omega * self.materials.omega;
        let rule = edge_rule(eh.degree() + 1);
        let edge_jumps: Vec<f64> = (0..mesh.num_edges())
            .into_par_iter()
            .map(|e| {
                let len = mesh.edges()[e].length;
                let j = jump_c(mesh, eh, e, &rule);
                let sq: f64 = j.iter().zip(&rule.weights).map(|(a, w)| w * a * a).sum::<f64>() * len;
                self.materials.nu_sharp(mesh, e) * sq
            })
            .collect();
        let per_cell = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let l2 = integrate_cell(mesh, k, order, |x| {
                    let (a, b) = (exact.value(k, x), eh.value(k, x));
                    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                });
                let curl = integrate_cell(mesh, k, order, |x| (exact.curl(k, x) - eh.curl(k, x)).powi(2));
                let h = mesh.geometry(k).diameter;
                let jumps: f64 = mesh.cell_edges(k).iter().map(|&(e, _)| edge_jumps[e]).sum();
                w2 * self.materials.eps[k] * l2 + self.materials.nu[k] * curl + (p * p) as f64 / h * jumps
            })
            .collect();
        ErrorMeasure { per_cell }
    }

    /// The extended form `b_#(u, w)` for fields split into a conforming part
    /// (evaluable, with exact curl) and a broken polynomial part; liftings and
    /// penalties act on the broken parts only.
    pub fn extended_bilinear(&self, u: &Split<'_>, w: &Split<'_>) -> f64 {
        let mesh = &*self.mesh;
        let p = self.degree();
        let op = LiftingOperator::new(&self.mesh, p);
        let lu = u.broken.map(|b| op.lift(b));
        let lw = w.broken.map(|b| op.lift(b));
        let w2 = self.materials.omega * self.materials.omega;
        let deg = [u.broken, w.broken].iter().flatten().map(|b| b.degree()).max().unwrap_or(p).max(p);
        let order = cell_order(deg) + 6;
        let volume: f64 = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let (eps, nu) = (self.materials.eps[k], self.materials.nu[k]);
                integrate_cell(mesh, k, order, |x| {
                    let (a, b) = (u.value(k, x), w.value(k, x));
                    let (ca, cb) = (u.curl(k, x), w.curl(k, x));
                    let mut val = w2 * eps * (a[0] * b[0] + a[1] * b[1]) + nu * ca * cb;
                    if let Some(l) = &lu {
                        val -= nu * l.scalar_value(k, x) * cb;
                    }
                    if let Some(l) = &lw {
                        val -= nu * l.scalar_value(k, x) * ca;
                    }
                    val
                })
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let penalty = match (u.broken, w.broken) {
            (Some(a), Some(b)) => self.config.eta_star * self.stabilization(a, b),
            _ => 0.0,
        };
        volume + penalty
    }
}

/// A field `conforming + broken`, either part optional.
#[derive(Clone, Copy, Default)]
pub struct Split<'a> {
    pub conforming: Option<&'a dyn VectorField>,
    pub broken: Option<&'a BrokenField>,
}

impl Split<'_> {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        let mut v = [0.0; 2];
        for part in [self.conforming, self.broken.map(|b| b as &dyn VectorField)].into_iter().flatten() {
            let a = part.value(cell, x);
            v[0] += a[0];
            v[1] += a[1];
        }
        v
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        [self.conforming, self.broken.map(|b| b as &dyn VectorField)]
            .into_iter()
            .flatten()
            .map(|part| part.curl(cell, x))
            .sum()
    }
}

/// Squared cellwise contributions of the error measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMeasure {
    pub per_cell: Vec<f64>,
}

impl ErrorMeasure {
    pub fn total(&self) -> f64 {
        self.per_cell.iter().sum::<f64>().sqrt()
    }

    pub fn cell(&self, k: usize) -> f64 {
        self.per_cell[k].sqrt()
    }

    /// Measure restricted to a cell subset.
    pub fn on(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&k| self.per_cell[k]).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests;
