//! Conforming 2D triangular meshes.
//!
//! Cells are stored counterclockwise with their refinement edge opposite the
//! first vertex. Local edge `i` of a cell is the edge opposite local vertex `i`.
//! Edges are numbered by their sorted endpoint pairs; an interior edge is
//! oriented by the normal pointing out of the incident cell with the smaller
//! index (`left`), a boundary edge by the outward normal.

mod io;
mod patch;
mod refine;

use std::collections::BTreeMap;

pub use io::{read_mesh, write_mesh};
pub use patch::VertexPatch;

use crate::error::MeshError;

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Vertex indices, ascending.
    pub endpoints: [usize; 2],
    pub normal: [f64; 2],
    /// `normal` rotated by +90 degrees.
    pub tangent: [f64; 2],
    pub left: usize,
    pub right: Option<usize>,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// Point at parameter `s` in `[0, 1]`, running from `endpoints[0]` to `endpoints[1]`.
    pub fn point(&self, mesh: &Mesh, s: f64) -> Point {
        let a = mesh.vertices[self.endpoints[0]];
        let b = mesh.vertices[self.endpoints[1]];
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }

    /// Un-normalized direction `x1 - x0` along the ascending vertex order.
    pub fn direction(&self, mesh: &Mesh) -> [f64; 2] {
        let a = mesh.vertices[self.endpoints[0]];
        let b = mesh.vertices[self.endpoints[1]];
        [b[0] - a[0], b[1] - a[1]]
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.left).chain(self.right)
    }
}

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are `x1 - x0` and `x2 - x0`.
    pub jacobian: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    /// Jacobian determinant, twice the area.
    pub det: f64,
    pub diameter: f64,
    pub inradius: f64,
    pub centroid: Point,
}

impl CellGeometry {
    fn new(x: [Point; 3]) -> Self {
        let j = [[x[1][0] - x[0][0], x[2][0] - x[0][0]], [x[1][1] - x[0][1], x[2][1] - x[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inverse = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let lengths = [dist(x[1], x[2]), dist(x[2], x[0]), dist(x[0], x[1])];
        let perimeter: f64 = lengths.iter().sum();
        let diameter = lengths.iter().cloned().fold(0.0, f64::max);
        CellGeometry {
            origin: x[0],
            jacobian: j,
            inverse,
            det,
            diameter,
            inradius: det / perimeter,
            centroid: [(x[0][0] + x[1][0] + x[2][0]) / 3.0, (x[0][1] + x[1][1] + x[2][1]) / 3.0],
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1], self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1]]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let g = &self.inverse;
        [g[0][0] * d[0] + g[0][1] * d[1], g[1][0] * d[0] + g[1][1] * d[1]]
    }

    /// Maps a reference gradient to the physical one (`J^{-T} g`).
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let inv = &self.inverse;
        [inv[0][0] * g[0] + inv[1][0] * g[1], inv[0][1] * g[0] + inv[1][1] * g[1]]
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let xi = self.to_reference(x);
        [1.0 - xi[0] - xi[1], xi[0], xi[1]]
    }

    /// Constant gradients of the three barycentric coordinates.
    pub fn barycentric_gradients(&self) -> [[f64; 2]; 3] {
        let g1 = self.push_gradient([1.0, 0.0]);
        let g2 = self.push_gradient([0.0, 1.0]);
        [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Per cell and local edge: global edge index and incidence sign `n_K . n_F`.
    cell_edges: Vec<[(usize, f64); 3]>,
    patch_index: Vec<Vec<usize>>,
    geometry: Vec<CellGeometry>,
    boundary_vertex: Vec<bool>,
    h_max: f64,
    kappa: f64,
}

impl Mesh {
    /// Builds a mesh from counterclockwise cells. Each cell is rotated so that
    /// its longest edge (first one on ties) is opposite the first vertex.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let cells = cells
            .into_iter()
            .map(|c| {
                let len = |i: usize| {
                    let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
                    vertices.get(a).zip(vertices.get(b)).map_or(0.0, |(a, b)| dist(*a, *b))
                };
                let mut best = 0;
                for i in 1..3 {
                    if len(i) > len(best) {
                        best = i;
                    }
                }
                [c[best], c[(best + 1) % 3], c[(best + 2) % 3]]
            })
            .collect();
        Self::from_tagged(vertices, cells)
    }

    /// Builds a mesh keeping the given vertex order of every cell.
    pub fn from_tagged(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut used = vec![false; nv];
        let mut seen = BTreeMap::new();
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= nv {
                    return Err(MeshError::InvalidVertex { cell: k, vertex: v });
                }
                used[v] = true;
            }
            let mut key = *c;
            key.sort_unstable();
            if key[0] == key[1] || key[1] == key[2] {
                return Err(MeshError::InvertedCell { cell: k, area: 0.0 });
            }
            if let Some(first) = seen.insert(key, k) {
                return Err(MeshError::DuplicateCell { first, second: k });
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingVertex { vertex: v });
        }

        let geometry: Vec<CellGeometry> =
            cells.iter().map(|c| CellGeometry::new([vertices[c[0]], vertices[c[1]], vertices[c[2]]])).collect();
        for (k, g) in geometry.iter().enumerate() {
            if g.det <= 0.0 {
                return Err(MeshError::InvertedCell { cell: k, area: g.area() });
            }
        }

        let mut incidence: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (k, c) in cells.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
                incidence.entry((a.min(b), a.max(b))).or_default().push((k, i));
            }
        }

        let mut edges = Vec::with_capacity(incidence.len());
        let mut cell_edges = vec![[(0usize, 1.0f64); 3]; cells.len()];
        let mut boundary_vertex = vec![false; nv];
        for (&(a, b), inc) in &incidence {
            if inc.len() > 2 {
                return Err(MeshError::NonConforming { edge: [a, b] });
            }
            let (left, li) = inc[0];
            let right = inc.get(1).map(|&(k, _)| k);
            let c = cells[left];
            let (p, q) = (vertices[c[(li + 1) % 3]], vertices[c[(li + 2) % 3]]);
            let length = dist(p, q);
            let normal = [(q[1] - p[1]) / length, -(q[0] - p[0]) / length];
            let e = edges.len();
            for &(k, i) in inc {
                let cc = cells[k];
                let (p, q) = (vertices[cc[(i + 1) % 3]], vertices[cc[(i + 2) % 3]]);
                let nk = [q[1] - p[1], -(q[0] - p[0])];
                let iota = if nk[0] * normal[0] + nk[1] * normal[1] > 0.0 { 1.0 } else { -1.0 };
                cell_edges[k][i] = (e, iota);
            }
            if right.is_none() {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
            edges.push(Edge { endpoints: [a, b], normal, tangent: [-normal[1], normal[0]], left, right, length });
        }

        // A vertex in the relative interior of a boundary edge is a hanging node.
        for e in edges.iter().filter(|e| e.is_boundary()) {
            let (p, q) = (vertices[e.endpoints[0]], vertices[e.endpoints[1]]);
            let tol = 1e-12 * e.length;
            for (v, x) in vertices.iter().enumerate() {
                if !boundary_vertex[v] || e.endpoints.contains(&v) {
                    continue;
                }
                let cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
                let along = (q[0] - p[0]) * (x[0] - p[0]) + (q[1] - p[1]) * (x[1] - p[1]);
                if cross.abs() <= tol * e.length && along > 0.0 && along < e.length * e.length {
                    return Err(MeshError::NonConforming { edge: e.endpoints });
                }
            }
        }

        let mut patch_index = vec![Vec::new(); nv];
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                patch_index[v].push(k);
            }
        }
        let h_max = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);
        let kappa = geometry.iter().map(|g| g.diameter / g.inradius).fold(0.0, f64::max);
        Ok(Mesh { vertices, cells, edges, cell_edges, patch_index, geometry, boundary_vertex, h_max, kappa })
    }

    /// `[0,1]^2` split into `n x n` squares, each cut along its `(i,j)-(i+1,j+1)` diagonal.
    pub fn unit_square(n: usize) -> Self {
        Self::structured(n, &[(0.0, 0.0)], 1.0)
    }

    /// `[-1,1]^2` minus `[0,1] x [-1,0]`, three unit squares each split as in
    /// [`Mesh::unit_square`].
    pub fn l_shape(n: usize) -> Self {
        Self::structured(n, &[(-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0)], 1.0)
    }

    fn structured(n: usize, blocks: &[(f64, f64)], size: f64) -> Self {
        assert!(n >= 1, "mesh resolution must be positive");
        let h = size / n as f64;
        let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        let scale = n as f64 / size;
        for &(x0, y0) in blocks {
            let (bi, bj) = ((x0 * scale).round() as i64, (y0 * scale).round() as i64);
            let mut vid = |i: i64, j: i64| {
                *index.entry((bi + i, bj + j)).or_insert_with(|| {
                    vertices.push([x0 + i as f64 * h, y0 + j as f64 * h]);
                    vertices.len() - 1
                })
            };
            for j in 0..n as i64 {
                for i in 0..n as i64 {
                    let a = vid(i, j);
                    let b = vid(i + 1, j);
                    let c = vid(i + 1, j + 1);
                    let d = vid(i, j + 1);
                    // Right angle first, so the diagonal is the refinement edge.
                    cells.push([b, c, a]);
                    cells.push([d, a, c]);
                }
            }
        }
        Self::from_tagged(vertices, cells).expect("structured mesh is conforming")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_edges(&self, cell: usize) -> &[(usize, f64); 3] {
        &self.cell_edges[cell]
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    /// Cells containing vertex `v`, ascending.
    pub fn cells_around(&self, v: usize) -> &[usize] {
        &self.patch_index[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Shape regularity: max over cells of diameter / inradius.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    /// The other cell across `edge`, seen from `cell`.
    pub fn neighbor(&self, cell: usize, edge: usize) -> Option<usize> {
        let e = &self.edges[edge];
        if e.left == cell {
            e.right
        } else {
            Some(e.left)
        }
    }

    /// Cells sharing an edge with `cell`, including `cell` itself.
    pub fn face_neighborhood(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![cell];
        for &(e, _) in &self.cell_edges[cell] {
            if let Some(n) = self.neighbor(cell, e) {
                out.push(n);
            }
        }
        out.sort_unstable();
        out
    }

    /// Local index (0..3) of `edge` in `cell`.
    pub fn local_edge(&self, cell: usize, edge: usize) -> Option<usize> {
        self.cell_edges[cell].iter().position(|&(e, _)| e == edge)
    }

    /// Locates the cell containing `x` (first match in index order).
    pub fn locate(&self, x: Point) -> Option<usize> {
        self.geometry.iter().position(|g| {
            let l = g.barycentric(x);
            l.iter().all(|&t| t >= -1e-12)
        })
    }

    /// Hat function of vertex `v` evaluated at `x` inside `cell`.
    pub fn hat(&self, v: usize, cell: usize, x: Point) -> f64 {
        match self.cells[cell].iter().position(|&w| w == v) {
            Some(i) => self.geometry[cell].barycentric(x)[i],
            None => 0.0,
        }
    }

    /// Gradient of the hat function of `v` on `cell`.
    pub fn hat_gradient(&self, v: usize, cell: usize) -> [f64; 2] {
        match self.cells[cell].iter().position(|&w| w == v) {
            Some(i) => self.geometry[cell].barycentric_gradients()[i],
            None => [0.0, 0.0],
        }
    }

    pub fn vertex_patch(&self, v: usize) -> VertexPatch {
        VertexPatch::new(self, v)
    }

    /// Uniform scaling of all coordinates.
    pub fn scaled(&self, factor: f64) -> Mesh {
        let vertices = self.vertices.iter().map(|x| [x[0] * factor, x[1] * factor]).collect();
        Mesh::from_tagged(vertices, self.cells.clone()).expect("scaling preserves conformity")
    }

    /// Newest-vertex bisection of the marked cells plus the conforming closure.
    pub fn refine(&self, marked: &[usize]) -> Mesh {
        refine::bisect(self, marked)
    }

    /// Every cell bisected twice, which halves all cell diameters.
    pub fn refine_uniform(&self) -> Mesh {
        let all: Vec<usize> = (0..self.num_cells()).collect();
        let once = self.refine(&all);
        let all: Vec<usize> = (0..once.num_cells()).collect();
        once.refine(&all)
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force edge count of the structured mesh by listing every cell
    /// side as a sorted pair.
    fn enumerate_edges(mesh: &Mesh) -> (usize, usize) {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for c in mesh.cells() {
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let interior = count.values().filter(|&&m| m == 2).count();
        (interior, count.len() - interior)
    }

    #[test]
    fn diagonal_split_square() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_interior_edges(), 1);
    }

    #[test]
    fn structured_edge_counts() {
        for n in 1..=4usize {
            let m = Mesh::unit_square(n);
            let (interior, boundary) = enumerate_edges(&m);
            assert_eq!(interior, 3 * n * n - 2 * n);
            assert_eq!(boundary, 4 * n);
            assert_eq!(m.num_interior_edges(), interior);
            assert_eq!(m.num_edges() - m.num_interior_edges(), boundary);
            let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
            assert_eq!(euler, 1);
        }
    }

    #[test]
    fn clockwise_cell_is_rejected() {
        let err = Mesh::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, MeshError::InvertedCell { cell: 0, .. }));
    }

    #[test]
    fn hanging_vertex_is_rejected() {
        // Left square split in two, right square split at the midpoint of the shared side.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0], [1.0, 0.5]];
        let cells = vec![[0, 1, 2], [0, 2, 3], [1, 4, 6], [4, 5, 6], [6, 5, 2]];
        let err = Mesh::new(v, cells).unwrap_err();
        assert!(matches!(err, MeshError::NonConforming { .. }), "{err:?}");
    }

    #[test]
    fn dangling_and_duplicate() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        assert!(matches!(Mesh::new(v.clone(), vec![[0, 1, 2]]).unwrap_err(), MeshError::DanglingVertex { vertex: 3 }));
        assert!(matches!(
            Mesh::new(v[..3].to_vec(), vec![[0, 1, 2], [1, 2, 0]]).unwrap_err(),
            MeshError::DuplicateCell { .. }
        ));
    }

    #[test]
    fn square_sizes() {
        let m1 = Mesh::unit_square(1);
        assert_eq!(m1.num_cells(), 2);
        assert!((m1.h_max() - 2f64.sqrt()).abs() < 1e-15);
        let m2 = Mesh::unit_square(2);
        assert_eq!(m2.num_cells(), 8);
        assert!((m2.h_max() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let l = Mesh::l_shape(1);
        assert_eq!(l.num_cells(), 6);
        let area: f64 = (0..l.num_cells()).map(|k| l.geometry(k).area()).sum();
        assert!((area - 3.0).abs() < 1e-14);
        // kappa is n-independent on structured meshes
        assert!((Mesh::unit_square(7).kappa() - m1.kappa()).abs() < 1e-12);
    }

    #[test]
    fn orientation_and_iota() {
        let m = Mesh::l_shape(2);
        for (e, edge) in m.edges().iter().enumerate() {
            let n = edge.normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
            assert!((n[0] * edge.tangent[0] + n[1] * edge.tangent[1]).abs() < 1e-15);
            if let Some(r) = edge.right {
                assert!(edge.left < r);
            }
            // normal points out of the left cell
            let g = m.geometry(edge.left);
            let mid = edge.point(&m, 0.5);
            let out = [mid[0] - g.centroid[0], mid[1] - g.centroid[1]];
            assert!(out[0] * n[0] + out[1] * n[1] > 0.0);
            let li = m.local_edge(edge.left, e).unwrap();
            assert_eq!(m.cell_edges(edge.left)[li].1, 1.0);
            if let Some(r) = edge.right {
                let ri = m.local_edge(r, e).unwrap();
                assert_eq!(m.cell_edges(r)[ri].1, -1.0);
            }
        }
    }
}
