//! Cell-block sparse symmetric matrices, block-Jacobi PCG and a dense fallback.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::SolverError;

/// Square matrix made of dense `block x block` tiles; row `r` lists its
/// nonzero tiles by ascending column.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    block: usize,
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl BlockMatrix {
    pub fn new(nblocks: usize, block: usize) -> Self {
        BlockMatrix { block, rows: vec![Vec::new(); nblocks] }
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn num_blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.block * self.rows.len()
    }

    /// Adds `m` to tile `(r, c)`.
    pub fn add_block(&mut self, r: usize, c: usize, m: &DMatrix<f64>) {
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |(col, _)| *col) {
            Ok(i) => row[i].1 += m,
            Err(i) => row.insert(i, (c, m.clone())),
        }
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&DMatrix<f64>> {
        let row = &self.rows[r];
        row.binary_search_by_key(&c, |(col, _)| *col).ok().map(|i| &row[i].1)
    }

    pub fn row_blocks(&self, r: usize) -> &[(usize, DMatrix<f64>)] {
        &self.rows[r]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let b = self.block;
        self.block(i / b, j / b).map_or(0.0, |m| m[(i % b, j % b)])
    }

    /// `y = A x`, parallel over block rows; each row sums in a fixed order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b = self.block;
        let rows: Vec<Vec<f64>> = self
            .rows
            .par_iter()
            .map(|row| {
                let mut y = vec![0.0; b];
                for (c, m) in row {
                    let xs = &x[c * b..(c + 1) * b];
                    for j in 0..b {
                        let xj = xs[j];
                        if xj != 0.0 {
                            for i in 0..b {
                                y[i] += m[(i, j)] * xj;
                            }
                        }
                    }
                }
                y
            })
            .collect();
        rows.concat()
    }

    /// `x^T A y`
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            for (c, m) in row {
                scale = scale.max(m.amax());
                match self.block(*c, r) {
                    Some(t) => worst = worst.max((m - t.transpose()).amax()),
                    None => worst = worst.max(m.amax()),
                }
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let b = self.block;
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, m) in row {
                d.view_mut((r * b, c * b), (b, b)).copy_from(m);
            }
        }
        d
    }

    /// Coordinate text dump, one `i j value` line per stored nonzero.
    pub fn to_coordinate_text(&self) -> String {
        let b = self.block;
        let mut out = String::new();
        for (r, row) in self.rows.iter().enumerate() {
            for i in 0..b {
                for (c, m) in row {
                    for j in 0..b {
                        if m[(i, j)] != 0.0 {
                            writeln!(out, "{} {} {:.16e}", r * b + i, c * b + j, m[(i, j)]).unwrap();
                        }
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub direct: bool,
}

/// Systems with fewer unknowns than this are factorized densely.
pub const DENSE_LIMIT: usize = 2000;

/// Solves `A x = b` for SPD `A`: dense Cholesky below [`DENSE_LIMIT`] unknowns,
/// block-Jacobi preconditioned CG otherwise.
pub fn solve_spd(a: &BlockMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats), SolverError> {
    if a.dim() < DENSE_LIMIT {
        solve_dense(a, b)
    } else {
        pcg(a, b, tol, max_iter)
    }
}

pub fn solve_dense(a: &BlockMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let chol = a.to_dense().cholesky().ok_or(SolverError::NotPositiveDefinite)?;
    let x = chol.solve(&DVector::from_column_slice(b));
    let x: Vec<f64> = x.iter().copied().collect();
    let r = residual_norm(a, &x, b);
    let bn = dot(b, b).sqrt();
    let stats = SolveStats { iterations: 0, relative_residual: if bn > 0.0 { r / bn } else { r }, direct: true };
    Ok((x, stats))
}

fn residual_norm(a: &BlockMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply(x);
    ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt()
}

/// Preconditioned CG with the inverse diagonal tiles as preconditioner.
pub fn pcg(a: &BlockMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let bs = a.block_size();
    let n = a.dim();
    let inverses: Vec<_> = (0..a.num_blocks())
        .into_par_iter()
        .map(|r| {
            let d = a.block(r, r).cloned().unwrap_or_else(|| DMatrix::identity(bs, bs));
            d.cholesky().ok_or(SolverError::NotPositiveDefinite)
        })
        .collect::<Result<_, _>>()?;
    let precondition = |r: &[f64]| -> Vec<f64> {
        let parts: Vec<Vec<f64>> = inverses
            .par_iter()
            .enumerate()
            .map(|(k, c)| c.solve(&DVector::from_column_slice(&r[k * bs..(k + 1) * bs])).iter().copied().collect())
            .collect();
        parts.concat()
    };
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0, direct: false }));
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            // confirm with a true residual to guard against drift
            let true_rel = residual_norm(a, &x, b) / bnorm;
            if true_rel <= 10.0 * tol {
                return Ok((x, SolveStats { iterations: it, relative_residual: true_rel, direct: false }));
            }
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(SolverError::NoConvergence { iterations: max_iter, residual: residual_norm(a, &x, b) / bnorm })
}
