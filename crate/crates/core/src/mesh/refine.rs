use std::collections::{BTreeMap, BTreeSet};

use super::{Mesh, Point};

/// Newest-vertex bisection. A cell `(v0, v1, v2)` is split at the midpoint `m`
/// of `v1 v2` into `(m, v0, v1)` and `(m, v2, v0)`; cells touching a split edge
/// are bisected until no hanging node remains.
pub(super) fn bisect(mesh: &Mesh, marked: &[usize]) -> Mesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let mut vertices: Vec<Point> = mesh.vertices().to_vec();
    let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut cells: Vec<[usize; 3]> = mesh.cells().to_vec();
    let mut to_split: BTreeSet<usize> = marked.iter().copied().collect();

    loop {
        let mut next = Vec::with_capacity(cells.len() + to_split.len());
        let mut changed = false;
        for (k, c) in cells.iter().enumerate() {
            let hanging = (0..3).any(|i| midpoints.contains_key(&key(c[i], c[(i + 1) % 3])));
            if !(to_split.contains(&k) || hanging) {
                next.push(*c);
                continue;
            }
            changed = true;
            let [v0, v1, v2] = *c;
            let m = *midpoints.entry(key(v1, v2)).or_insert_with(|| {
                let (a, b) = (vertices[v1], vertices[v2]);
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                vertices.len() - 1
            });
            next.push([m, v0, v1]);
            next.push([m, v2, v0]);
        }
        cells = next;
        to_split.clear();
        if !changed {
            break;
        }
    }
    Mesh::from_tagged(vertices, cells).expect("bisection keeps the mesh conforming")
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}
