use super::{dist, Mesh, Point};

/// Cells sharing a vertex together with the edge sets used by the patch problems.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexPatch {
    pub vertex: usize,
    /// Cells containing `vertex`, ascending.
    pub cells: Vec<usize>,
    /// Edges containing `vertex`.
    pub edges: Vec<usize>,
    /// Edges on the patch boundary not containing `vertex`; empty for boundary vertices.
    pub rim: Vec<usize>,
    /// Edges opposite `vertex` in the patch cells (where the hat function vanishes),
    /// kept for every vertex.
    pub opposite: Vec<usize>,
    /// Edges lying on the boundary of the patch domain.
    pub boundary: Vec<usize>,
    pub diameter: f64,
    pub on_boundary: bool,
}

impl VertexPatch {
    pub(super) fn new(mesh: &Mesh, vertex: usize) -> Self {
        let cells = mesh.cells_around(vertex).to_vec();
        let mut edges = Vec::new();
        let mut opposite = Vec::new();
        let mut count: Vec<(usize, usize)> = Vec::new();
        for &k in &cells {
            for &(e, _) in mesh.cell_edges(k) {
                if mesh.edges()[e].endpoints.contains(&vertex) {
                    edges.push(e);
                } else {
                    opposite.push(e);
                }
                match count.iter_mut().find(|(f, _)| *f == e) {
                    Some(c) => c.1 += 1,
                    None => count.push((e, 1)),
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        opposite.sort_unstable();
        let mut boundary: Vec<usize> = count.into_iter().filter(|&(_, m)| m == 1).map(|(e, _)| e).collect();
        boundary.sort_unstable();
        let on_boundary = mesh.is_boundary_vertex(vertex);
        let rim = if on_boundary { Vec::new() } else { opposite.clone() };

        let mut pts: Vec<Point> = cells.iter().flat_map(|&k| mesh.cells()[k]).map(|v| mesh.vertices()[v]).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut diameter: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                diameter = diameter.max(dist(*a, *b));
            }
        }
        VertexPatch { vertex, cells, edges, rim, opposite, boundary, diameter, on_boundary }
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn hat(&self, mesh: &Mesh, cell: usize, x: Point) -> f64 {
        mesh.hat(self.vertex, cell, x)
    }
}
