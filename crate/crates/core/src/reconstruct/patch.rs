use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::element::{cell_dofs, LagrangeElement, LagrangeTable, NedelecTable};
use crate::broken::{HatProduct, VectorField};
use crate::error::ReconstructionError;
use crate::mesh::{Mesh, Point, VertexPatch};

/// Identity of a Lagrange node shared between cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum NodeKey {
    Vertex(usize),
    /// Edge and the node's distance (in units of `h/q`) from the lower endpoint.
    Edge(usize, usize),
    Cell(usize, usize),
}

/// Continuous degree-`q` Lagrange space on the patch cells.
#[derive(Clone, Debug)]
pub struct NodalSpace {
    pub dim: usize,
    /// Per patch cell, the space index of each local node (`None` if removed).
    pub cell_nodes: Vec<Vec<Option<usize>>>,
}

impl NodalSpace {
    /// `with_boundary = false` drops the nodes on the patch boundary (`S_{q,0}`).
    pub fn new(mesh: &Mesh, patch: &VertexPatch, q: usize, with_boundary: bool) -> Self {
        let el = LagrangeElement::shared(q);
        let on_rim = |key: &NodeKey| match *key {
            NodeKey::Vertex(v) => v != patch.vertex || patch.on_boundary,
            NodeKey::Edge(e, _) => patch.boundary.binary_search(&e).is_ok(),
            NodeKey::Cell(..) => false,
        };
        let keys: Vec<Vec<NodeKey>> = patch
            .cells
            .iter()
            .map(|&k| {
                let verts = mesh.cells()[k];
                el.nodes
                    .iter()
                    .enumerate()
                    .map(|(m, node)| {
                        let nonzero: Vec<usize> = (0..3).filter(|&i| node[i] > 0).collect();
                        match nonzero.len() {
                            1 => NodeKey::Vertex(verts[nonzero[0]]),
                            2 => {
                                let opposite = (0..3).find(|&i| node[i] == 0).unwrap();
                                let e = mesh.cell_edges(k)[opposite].0;
                                let upper = mesh.edges()[e].endpoints[1];
                                let i = nonzero.iter().copied().find(|&i| verts[i] == upper).unwrap();
                                NodeKey::Edge(e, node[i])
                            }
                            _ => NodeKey::Cell(k, m),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut index = BTreeMap::new();
        for key in keys.iter().flatten() {
            if with_boundary || !on_rim(key) {
                index.insert(*key, 0);
            }
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let cell_nodes = keys.iter().map(|ks| ks.iter().map(|k| index.get(k).copied()).collect()).collect();
        NodalSpace { dim: index.len(), cell_nodes }
    }
}

/// Discrete local spaces of one vertex patch: `N_{q,0}(omega_a)` and `S_{q,0}(omega_a)`.
#[derive(Clone, Debug)]
pub struct PatchSpaces {
    pub patch: VertexPatch,
    pub q: usize,
    /// Global Nédélec degrees of freedom of the space, ascending.
    pub edge_dofs: Vec<usize>,
    /// Per patch cell: `(space index, sign)` of each local Nédélec function.
    pub cell_edge_dofs: Vec<Vec<Option<(usize, f64)>>>,
    pub nodal: NodalSpace,
}

impl PatchSpaces {
    pub fn new(mesh: &Mesh, patch: &VertexPatch, q: usize) -> Self {
        let removed = |g: usize| g < mesh.num_edges() * q && patch.boundary.binary_search(&(g / q)).is_ok();
        let all: Vec<Vec<(usize, f64)>> = patch.cells.iter().map(|&k| cell_dofs(mesh, q, k)).collect();
        let mut edge_dofs: Vec<usize> = all.iter().flatten().map(|&(g, _)| g).filter(|&g| !removed(g)).collect();
        edge_dofs.sort_unstable();
        edge_dofs.dedup();
        let cell_edge_dofs = all
            .iter()
            .map(|dofs| dofs.iter().map(|&(g, s)| edge_dofs.binary_search(&g).ok().map(|i| (i, s))).collect())
            .collect();
        PatchSpaces {
            patch: patch.clone(),
            q,
            edge_dofs,
            cell_edge_dofs,
            nodal: NodalSpace::new(mesh, patch, q, false),
        }
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dofs.len()
    }

    pub fn nodal_dim(&self) -> usize {
        self.nodal.dim
    }

    pub(crate) fn order(&self) -> usize {
        2 * self.q + 2
    }

    /// Patch-local Nédélec coefficients of the gradients of the nodal basis.
    pub fn gradient_matrix(&self) -> DMatrix<f64> {
        let lag = LagrangeElement::shared(self.q);
        let mut g = DMatrix::<f64>::zeros(self.edge_dim(), self.nodal_dim());
        for (c, ned) in self.cell_edge_dofs.iter().enumerate() {
            for (l, node) in self.nodal.cell_nodes[c].iter().enumerate() {
                let Some(node) = node else { continue };
                for (i, dof) in ned.iter().enumerate() {
                    if let Some((row, sign)) = dof {
                        let v = sign * lag.gradient_dofs[(i, l)];
                        if v != 0.0 {
                            g[(*row, *node)] = v;
                        }
                    }
                }
            }
        }
        g
    }
}

/// Local solutions of one patch; all coefficient vectors are patch-local.
#[derive(Clone, Debug)]
pub struct PatchSolution {
    pub u: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub theta: Vec<f64>,
    /// `E_a = U_a + grad theta_a` in the patch Nédélec space.
    pub e_a: Vec<f64>,
    /// Relative residual of the saddle-point solve.
    pub residual: f64,
}

/// Iterates over the quadrature points of the patch cells with physical basis data.
pub(crate) struct CellData {
    pub cell_index: usize,
    pub x: Point,
    pub weight: f64,
    pub ned_values: Vec<[f64; 2]>,
    pub ned_curls: Vec<f64>,
    pub lag_gradients: Vec<[f64; 2]>,
}

pub(crate) fn for_each_point(mesh: &Mesh, spaces: &PatchSpaces, mut f: impl FnMut(&CellData)) {
    let q = spaces.q;
    let ned = NedelecTable::cached(q, spaces.order());
    let lag = LagrangeTable::cached(q, spaces.order());
    for (c, &k) in spaces.patch.cells.iter().enumerate() {
        let g = mesh.geometry(k);
        for (p, (&xi, &w)) in ned.rule.points.iter().zip(&ned.rule.weights).enumerate() {
            let data = CellData {
                cell_index: c,
                x: g.to_physical(xi),
                weight: w * g.det,
                ned_values: ned.values_at(p).iter().map(|&v| g.push_gradient(v)).collect(),
                ned_curls: ned.curls_at(p).iter().map(|&v| v / g.det).collect(),
                lag_gradients: lag.gradients_at(p).iter().map(|&v| g.push_gradient(v)).collect(),
            };
            f(&data);
        }
    }
}

/// Signed physical Nédélec values scattered to space indices.
fn signed<'a>(
    dofs: &'a [Option<(usize, f64)>],
    values: &'a [[f64; 2]],
    curls: &'a [f64],
) -> impl Iterator<Item = (usize, [f64; 2], f64)> + 'a {
    dofs.iter()
        .enumerate()
        .filter_map(move |(i, d)| d.map(|(r, s)| (r, [s * values[i][0], s * values[i][1]], s * curls[i])))
}

fn nodal_entries<'a>(
    nodes: &'a [Option<usize>],
    grads: &'a [[f64; 2]],
) -> impl Iterator<Item = (usize, [f64; 2])> + 'a {
    nodes.iter().enumerate().filter_map(move |(l, n)| n.map(|r| (r, grads[l])))
}

/// `(curl U, curl W) = (rhs, curl W)` for all `W` in `N_{q,0}` with
/// `(U, grad v) = 0` for all `v` in `S_{q,0}`, by a direct solve of the saddle-point system.
pub fn solve_patch_curl(
    mesh: &Mesh,
    spaces: &PatchSpaces,
    rhs: impl Fn(usize, Point) -> f64,
) -> Result<(Vec<f64>, Vec<f64>, f64), ReconstructionError> {
    let (n, m) = (spaces.edge_dim(), spaces.nodal_dim());
    let mut k = DMatrix::<f64>::zeros(n + m, n + m);
    let mut f = DVector::<f64>::zeros(n + m);
    for_each_point(mesh, spaces, |d| {
        let cell = spaces.patch.cells[d.cell_index];
        let r = rhs(cell, d.x);
        let dofs = &spaces.cell_edge_dofs[d.cell_index];
        let nodes = &spaces.nodal.cell_nodes[d.cell_index];
        for (i, vi, ci) in signed(dofs, &d.ned_values, &d.ned_curls) {
            f[i] += d.weight * r * ci;
            for (j, _, cj) in signed(dofs, &d.ned_values, &d.ned_curls) {
                k[(i, j)] += d.weight * ci * cj;
            }
            for (l, g) in nodal_entries(nodes, &d.lag_gradients) {
                let b = d.weight * (vi[0] * g[0] + vi[1] * g[1]);
                k[(n + l, i)] += b;
                k[(i, n + l)] += b;
            }
        }
    });
    let singular = ReconstructionError::SingularPatch { vertex: spaces.patch.vertex };
    if n + m == 0 {
        return Ok((Vec::new(), Vec::new(), 0.0));
    }
    let lu = k.clone().lu();
    let mut x = lu.solve(&f).ok_or(singular.clone())?;
    let scale = f.norm().max(f64::MIN_POSITIVE);
    let mut residual = (&f - &k * &x).norm() / scale;
    // one step of iterative refinement
    if residual > 1e-12 {
        let r = &f - &k * &x;
        x += lu.solve(&r).ok_or(singular.clone())?;
        residual = (&f - &k * &x).norm() / scale;
    }
    if !residual.is_finite() || (f.norm() > 0.0 && residual > 1e-8) {
        return Err(singular);
    }
    if f.norm() == 0.0 {
        residual = 0.0;
    }
    Ok((x.rows(0, n).iter().copied().collect(), x.rows(n, m).iter().copied().collect(), residual))
}

/// `(grad theta, grad v) = (psi_a E_h, grad v)` for all `v` in `S_{q,0}`.
pub fn solve_patch_poisson(
    mesh: &Mesh,
    spaces: &PatchSpaces,
    field: &impl VectorField,
) -> Result<Vec<f64>, ReconstructionError> {
    let product = HatProduct { field, patch: &spaces.patch, mesh };
    solve_nodal_projection(mesh, spaces, &spaces.nodal, |k, x| product.value(k, x), None)
        .ok_or(ReconstructionError::SingularPatch { vertex: spaces.patch.vertex })
}

/// Galerkin projection of `v` onto gradients of `nodal`: SPD solve, with
/// `pinned` removed from the unknowns (value zero) for pure Neumann spaces.
pub(crate) fn solve_nodal_projection(
    mesh: &Mesh,
    spaces: &PatchSpaces,
    nodal: &NodalSpace,
    v: impl Fn(usize, Point) -> [f64; 2],
    pinned: Option<usize>,
) -> Option<Vec<f64>> {
    let (a, b) = nodal_system(mesh, spaces, nodal, v);
    let keep: Vec<usize> = (0..nodal.dim).filter(|&i| Some(i) != pinned).collect();
    if keep.is_empty() {
        return Some(vec![0.0; nodal.dim]);
    }
    let a = a.select_rows(&keep).select_columns(&keep);
    let b = b.select_rows(&keep);
    let x = a.cholesky()?.solve(&b);
    let mut out = vec![0.0; nodal.dim];
    for (i, &r) in keep.iter().enumerate() {
        out[r] = x[i];
    }
    Some(out)
}

/// Stiffness matrix and load `(v, grad s_i)` of a nodal space.
pub(crate) fn nodal_system(
    mesh: &Mesh,
    spaces: &PatchSpaces,
    nodal: &NodalSpace,
    v: impl Fn(usize, Point) -> [f64; 2],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = nodal.dim;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for_each_point(mesh, spaces, |d| {
        let cell = spaces.patch.cells[d.cell_index];
        let val = v(cell, d.x);
        let nodes = &nodal.cell_nodes[d.cell_index];
        for (i, gi) in nodal_entries(nodes, &d.lag_gradients) {
            b[i] += d.weight * (val[0] * gi[0] + val[1] * gi[1]);
            for (j, gj) in nodal_entries(nodes, &d.lag_gradients) {
                a[(i, j)] += d.weight * (gi[0] * gj[0] + gi[1] * gj[1]);
            }
        }
    });
    (a, b)
}

/// Full patch solve: `U_a`, `theta_a` and `E_a = U_a + grad theta_a` for the
/// data `psi_a E_h` with curl right-hand side `rhs`.
pub(crate) fn solve_patch(
    mesh: &Mesh,
    spaces: &PatchSpaces,
    field: &impl VectorField,
    rhs: impl Fn(usize, Point) -> f64,
) -> Result<PatchSolution, ReconstructionError> {
    let (u, multiplier, residual) = solve_patch_curl(mesh, spaces, rhs)?;
    let theta = solve_patch_poisson(mesh, spaces, field)?;
    let g = spaces.gradient_matrix();
    let grad = &g * DVector::from_column_slice(&theta);
    let e_a = u.iter().zip(grad.iter()).map(|(a, b)| a + b).collect();
    Ok(PatchSolution { u, multiplier, theta, e_a, residual })
}
