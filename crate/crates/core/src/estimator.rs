//! Residual indicators `eta_div,K`, `eta_curl,K`, `eta_nc,K`, data oscillation
//! and effectivity/efficiency ratios.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::broken::{
    cell_order, edge_rule, integrate_cell, jump_c, jump_d, scalar_jump_of_curl, BrokenField, VectorField,
};
use crate::dg::{Discretization, ErrorMeasure, SourceTerm};
use crate::mesh::Point;

/// Totals below this are treated as an exactly reproduced solution.
pub const EXACT_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorReport {
    pub eta_div: Vec<f64>,
    pub eta_curl: Vec<f64>,
    pub eta_nc: Vec<f64>,
    /// `true` when `div J` came from a degree `p + 1` projection of `J`.
    pub div_surrogate: bool,
    /// Per-cell `|||e|||_{#,K}` when an exact solution was supplied.
    pub error: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Effectivity {
    Value(f64),
    /// The error measure vanished (up to [`EXACT_THRESHOLD`]).
    Exact,
}

impl Effectivity {
    pub fn value(&self) -> Option<f64> {
        match self {
            Effectivity::Value(v) => Some(*v),
            Effectivity::Exact => None,
        }
    }
}

impl std::fmt::Display for Effectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Effectivity::Value(v) => write!(f, "{v:.6e}"),
            Effectivity::Exact => f.write_str("exact"),
        }
    }
}

fn rss(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl IndicatorReport {
    pub fn num_cells(&self) -> usize {
        self.eta_div.len()
    }

    /// `eta_K = (eta_div,K^2 + eta_curl,K^2 + eta_nc,K^2)^{1/2}`.
    pub fn eta_cell(&self, k: usize) -> f64 {
        (self.eta_div[k].powi(2) + self.eta_curl[k].powi(2) + self.eta_nc[k].powi(2)).sqrt()
    }

    pub fn eta_cells(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|k| self.eta_cell(k)).collect()
    }

    pub fn total(&self) -> f64 {
        rss(&self.eta_cells())
    }

    pub fn total_div(&self) -> f64 {
        rss(&self.eta_div)
    }

    pub fn total_curl(&self) -> f64 {
        rss(&self.eta_curl)
    }

    pub fn total_nc(&self) -> f64 {
        rss(&self.eta_nc)
    }

    pub fn error_total(&self) -> Option<f64> {
        self.error.as_ref().map(|e| rss(e))
    }

    /// `eta / |||e|||_#`; absent without an exact solution.
    pub fn effectivity(&self) -> Option<Effectivity> {
        self.error_total().map(|e| effectivity(self.total(), e))
    }

    /// CSV with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,eta_div,eta_curl,eta_nc,eta");
        if self.error.is_some() {
            out.push_str(",err_sharp");
        }
        out.push('\n');
        for k in 0..self.num_cells() {
            write!(
                out,
                "{k},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.eta_div[k],
                self.eta_curl[k],
                self.eta_nc[k],
                self.eta_cell(k)
            )
            .unwrap();
            if let Some(e) = &self.error {
                write!(out, ",{:.10e}", e[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn effectivity(eta: f64, error: f64) -> Effectivity {
    if error <= EXACT_THRESHOLD {
        Effectivity::Exact
    } else {
        Effectivity::Value(eta / error)
    }
}

/// Divergence of `J` at `x` in `cell`: exact when available, otherwise from
/// the degree `p + 1` projection.
struct Divergence<'a> {
    source: &'a SourceTerm,
    projection: Option<BrokenField>,
}

impl<'a> Divergence<'a> {
    fn new(disc: &Discretization, source: &'a SourceTerm) -> Self {
        let projection = (!source.has_divergence()).then(|| {
            let p = disc.degree() + 1;
            BrokenField::project_vector_with(disc.mesh(), p, cell_order(p) + 4, |_, x| source.value(x))
        });
        Divergence { source, projection }
    }

    fn at(&self, cell: usize, x: Point) -> f64 {
        match &self.projection {
            Some(f) => f.divergence(cell, x),
            None => self.source.divergence(x).unwrap(),
        }
    }
}

/// Squared edge norms shared by the indicators.
struct EdgeJumps {
    /// `||[eps E_h]^d||^2` (interior edges)
    normal: Vec<f64>,
    /// `||[nu curl_h E_h]||^2` (interior edges)
    flux: Vec<f64>,
    /// `||[curl_h E_h]||^2` (interior edges)
    curl: Vec<f64>,
    /// `||[E_h]^c||^2` (all edges)
    tangential: Vec<f64>,
}

fn edge_jumps(disc: &Discretization, eh: &BrokenField) -> EdgeJumps {
    let mesh = &**disc.mesh();
    let mat = disc.materials();
    let rule = edge_rule(eh.degree() + 1);
    let sq =
        |len: f64, vals: &[f64]| -> f64 { vals.iter().zip(&rule.weights).map(|(v, w)| w * v * v).sum::<f64>() * len };
    let per_edge: Vec<[f64; 4]> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let edge = &mesh.edges()[e];
            let tangential = sq(edge.length, &jump_c(mesh, eh, e, &rule));
            if edge.is_boundary() {
                return [0.0, 0.0, 0.0, tangential];
            }
            let eps_weighted = Weighted { field: eh, weight: |k| mat.eps(k) };
            let nu_weighted = Weighted { field: eh, weight: |k| mat.nu(k) };
            [
                sq(edge.length, &jump_d(mesh, &eps_weighted, e, &rule)),
                sq(edge.length, &scalar_jump_of_curl(mesh, &nu_weighted, e, &rule)),
                sq(edge.length, &scalar_jump_of_curl(mesh, eh, e, &rule)),
                tangential,
            ]
        })
        .collect();
    EdgeJumps {
        normal: per_edge.iter().map(|v| v[0]).collect(),
        flux: per_edge.iter().map(|v| v[1]).collect(),
        curl: per_edge.iter().map(|v| v[2]).collect(),
        tangential: per_edge.iter().map(|v| v[3]).collect(),
    }
}

/// A field scaled by a piecewise constant cell weight.
struct Weighted<'a, W: Fn(usize) -> f64> {
    field: &'a BrokenField,
    weight: W,
}

impl<W: Fn(usize) -> f64 + Sync> VectorField for Weighted<'_, W> {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        let v = self.field.value(cell, x);
        let w = (self.weight)(cell);
        [w * v[0], w * v[1]]
    }

    fn curl(&self, cell: usize, x: Point) -> f64 {
        (self.weight)(cell) * self.field.curl(cell, x)
    }
}

/// Indicators of `eh` for the source `source`; `exact` adds the per-cell error measure.
pub fn estimate(
    disc: &Discretization,
    eh: &BrokenField,
    source: &SourceTerm,
    exact: Option<&dyn VectorField>,
) -> IndicatorReport {
    let mesh = &**disc.mesh();
    let mat = disc.materials();
    let p = disc.degree() as f64;
    let w2 = mat.omega() * mat.omega();
    let jumps = edge_jumps(disc, eh);
    let div_j = Divergence::new(disc, source);
    let curl = eh.curl_h();
    let order = cell_order(eh.degree()) + 6;
    let cells: Vec<[f64; 3]> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let h = mesh.geometry(k).diameter;
            let (eps, nu) = (mat.eps(k), mat.nu(k));
            let div_res = integrate_cell(mesh, k, order, |x| (div_j.at(k, x) - w2 * eps * eh.divergence(k, x)).powi(2));
            let curl_res = integrate_cell(mesh, k, order, |x| {
                let j = source.value(x);
                let e = eh.value(k, x);
                let g = curl.gradient(k, x);
                let r = [j[0] - w2 * eps * e[0] - nu * g[1], j[1] - w2 * eps * e[1] + nu * g[0]];
                r[0] * r[0] + r[1] * r[1]
            });
            let (mut normal, mut flux, mut tangential_pen, mut nc) = (0.0, 0.0, 0.0, 0.0);
            for &(e, _) in mesh.cell_edges(k) {
                let nu_f = mat.nu_sharp(mesh, e);
                let eps_f = mat.eps_sharp(mesh, e);
                normal += jumps.normal[e];
                flux += jumps.flux[e];
                tangential_pen += nu_f * p * p / h * jumps.tangential[e];
                nc += nu_f * h / p * jumps.curl[e] + (w2 * eps_f * h + nu_f * p * p / h) * jumps.tangential[e];
            }
            let hp = h / p;
            let eta_div = ((hp * hp * div_res / w2 + w2 * hp * normal) / eps).sqrt();
            let eta_curl = ((hp * hp * curl_res + hp * flux + tangential_pen) / nu).sqrt();
            [eta_div, eta_curl, nc.sqrt()]
        })
        .collect();
    let error = exact.map(|u| {
        let m: ErrorMeasure = disc.error_measure(&DynField(u), eh);
        m.per_cell.iter().map(|v| v.sqrt()).collect()
    });
    IndicatorReport {
        eta_div: cells.iter().map(|c| c[0]).collect(),
        eta_curl: cells.iter().map(|c| c[1]).collect(),
        eta_nc: cells.iter().map(|c| c[2]).collect(),
        div_surrogate: !source.has_divergence(),
        error,
    }
}

struct DynField<'a>(&'a dyn VectorField);

impl VectorField for DynField<'_> {
    fn value(&self, cell: usize, x: Point) -> [f64; 2] {
        self.0.value(cell, x)
    }
    fn curl(&self, cell: usize, x: Point) -> f64 {
        self.0.curl(cell, x)
    }
}

/// Per-cell oscillation terms `(1/nu)(h/p)^2 ||J - Pi_p J||^2 + (1/(omega^2 eps))(h/p)^2 ||div(J - Pi_p J)||^2`
/// (squared), with `Pi_p` the componentwise L2 projection.
pub fn oscillation_terms(disc: &Discretization, source: &SourceTerm) -> Vec<f64> {
    let mesh = &**disc.mesh();
    let mat = disc.materials();
    let p = disc.degree();
    let order = cell_order(p) + 8;
    let proj = BrokenField::project_vector_with(disc.mesh(), p, order, |_, x| source.value(x));
    let div_j = Divergence::new(disc, source);
    let w2 = mat.omega() * mat.omega();
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let hp = mesh.geometry(k).diameter / p as f64;
            let l2 = integrate_cell(mesh, k, order, |x| {
                let (j, q) = (source.value(x), proj.value(k, x));
                (j[0] - q[0]).powi(2) + (j[1] - q[1]).powi(2)
            });
            let div = integrate_cell(mesh, k, order, |x| (div_j.at(k, x) - proj.divergence(k, x)).powi(2));
            hp * hp * (l2 / mat.nu(k) + div / (w2 * mat.eps(k)))
        })
        .collect()
}

/// `osc_{K^f}` for every cell, `K^f` being `K` and its face neighbours.
pub fn oscillation(disc: &Discretization, source: &SourceTerm) -> Vec<f64> {
    let terms = oscillation_terms(disc, source);
    let mesh = disc.mesh();
    (0..mesh.num_cells()).map(|k| mesh.face_neighborhood(k).iter().map(|&c| terms[c]).sum::<f64>().sqrt()).collect()
}

/// `eta_K / (|||e|||_{#,K^f} + osc_{K^f})` per cell.
pub fn local_efficiency_ratios(disc: &Discretization, report: &IndicatorReport, osc: &[f64]) -> Vec<f64> {
    let err = report.error.as_ref().expect("efficiency needs the error measure");
    let mesh = disc.mesh();
    (0..mesh.num_cells())
        .map(|k| {
            let patch = mesh.face_neighborhood(k);
            let e = patch.iter().map(|&c| err[c] * err[c]).sum::<f64>().sqrt();
            report.eta_cell(k) / (e + osc[k])
        })
        .collect()
}

#[cfg(test)]
mod tests;
