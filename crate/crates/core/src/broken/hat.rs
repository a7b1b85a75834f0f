use super::basis::{dim, BasisTable};
use super::{cell_order, BrokenField, VectorField};
use crate::mesh::{Point, VertexPatch};

/// The product `psi_a v` of a hat function and a vector field, evaluated lazily.
pub struct HatProduct<'a, V: VectorField> {
    pub field: &'a V,
    pub patch: &'a VertexPatch,
    pub mesh: &'a crate::mesh::Mesh,
}

impl<V: VectorField> VectorField for HatProduct<'_, V> {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        if !self.patch.contains_cell(cell) {
            return [0.0, 0.0];
        }
        let psi = self.mesh.hat(self.patch.vertex, cell, x);
        let v = self.field.value(cell, x);
        [psi * v[0], psi * v[1]]
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        if !self.patch.contains_cell(cell) {
            return 0.0;
        }
        let psi = self.mesh.hat(self.patch.vertex, cell, x);
        let g = self.mesh.hat_gradient(self.patch.vertex, cell);
        let v = self.field.value(cell, x);
        psi * self.field.curl(cell, x) + g[0] * v[1] - g[1] * v[0]
    }
}

/// `psi_a v` as a broken field of degree `p + 1`, zero outside the patch.
pub fn multiply_by_hat(v: &BrokenField, patch: &VertexPatch) -> BrokenField {
    assert!(v.is_vector());
    let mesh = v.mesh().clone();
    let degree = v.degree() + 1;
    let n = dim(degree);
    let table = BasisTable::cached(degree, cell_order(degree));
    let product = HatProduct { field: v, patch, mesh: &mesh };
    let mut out = BrokenField::zeros(&mesh, degree, 2);
    for &k in &patch.cells {
        let g = mesh.geometry(k);
        let s = g.det.sqrt();
        let block = out.cell_block_mut(k);
        for (q, (&xi, &w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
            let val = product.value(k, g.to_physical(xi));
            for (i, phi) in table.values_at(q).iter().enumerate() {
                block[i] += w * s * val[0] * phi;
                block[n + i] += w * s * val[1] * phi;
            }
        }
    }
    out
}
