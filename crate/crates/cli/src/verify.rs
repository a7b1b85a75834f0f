//! Oracle suite: each check compares a measured quantity against a bound.

use std::fmt;
use std::sync::Arc;

use curlrec::broken::{edge_rule, integrate_cell, trace_constant, trace_inequality_ratio, VectorField};
use curlrec::lifting::{lifting_constant, lifting_constant_exact};
use curlrec::mesh::Mesh;
use curlrec::quadrature::{SegmentRule, TriangleRule};
use curlrec::reconstruct::{helmholtz_check, poincare_ratio_of, reconstruct, reconstruct_with_patches, theorem_ratios};
use curlrec::BrokenField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{discretization, load_mesh, mesh_at_level, solve_on};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{real, Table};
use crate::Output;

/// Allowed relative spread `max / min - 1` of h- and p-uniform quantities.
pub const UNIFORMITY: f64 = 0.25;
/// Allowed growth of the trace and lifting constants over the `p = 1` value.
pub const P_UNIFORMITY: f64 = 1.3;
const ROUNDOFF: f64 = 1e-10;
const SAMPLES: usize = 20;
const COERCIVITY_SAMPLES: usize = 100;
const HELMHOLTZ_FIELDS: usize = 50;
const CONFORMITY_FIELDS: usize = 20;
const CONFORMITY_DEGREES: std::ops::RangeInclusive<usize> = 0..=3;
/// Refinements skipped before the h-uniformity levels start.
pub const PREASYMPTOTIC_LEVELS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub oracle: &'static str,
    pub p: Option<usize>,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub note: String,
}

impl Check {
    fn at_most(oracle: &'static str, p: Option<usize>, measured: f64, bound: f64) -> Self {
        Check { oracle, p, measured, relation: Relation::AtMost, bound, note: String::new() }
    }

    fn at_least(oracle: &'static str, p: Option<usize>, measured: f64, bound: f64) -> Self {
        Check { oracle, p, measured, relation: Relation::AtLeast, bound, note: String::new() }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.measured <= self.bound,
            Relation::AtLeast => self.measured >= self.bound,
        }
    }
}

/// `max / min - 1` of positive values.
pub fn variation(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min - 1.0
}

/// `sum_a psi_a = 1` and `sum_a grad psi_a = 0` on every cell, summing the
/// hat functions of all patches that contain the cell.
pub fn partition_of_unity_defect(mesh: &Mesh) -> f64 {
    let rule = TriangleRule::cached(4);
    let mut sums = vec![vec![0.0; rule.len()]; mesh.num_cells()];
    let mut grads = vec![[0.0; 2]; mesh.num_cells()];
    for a in 0..mesh.num_vertices() {
        let patch = mesh.vertex_patch(a);
        for &k in &patch.cells {
            let g = mesh.geometry(k);
            for (i, &xi) in rule.points.iter().enumerate() {
                sums[k][i] += patch.hat(mesh, k, g.to_physical(xi));
            }
            let d = mesh.hat_gradient(a, k);
            grads[k][0] += d[0];
            grads[k][1] += d[1];
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..mesh.num_cells() {
        let h = mesh.geometry(k).diameter;
        worst = sums[k].iter().fold(worst, |w, s| w.max((s - 1.0).abs()));
        worst = worst.max(h * grads[k][0].abs()).max(h * grads[k][1].abs());
    }
    worst
}

/// Relative defects of the two elementwise integration-by-parts identities
/// summed over the mesh,
/// `sum_K (curl v, phi)_K - (v, rot phi)_K = sum_F ([v.t_F phi], 1)_F` and
/// `sum_K (div v, phi)_K + (v, grad phi)_K = sum_F ([v.n_F phi], 1)_F`,
/// for broken `v` and `phi` of degree `p`. `flip` reverses every edge
/// orientation in the edge sums.
pub fn integration_by_parts_defect(v: &BrokenField, phi: &BrokenField, flip: bool) -> (f64, f64) {
    let mesh = v.mesh();
    let p = v.degree().max(phi.degree());
    let order = 2 * p + 1;
    let (mut curl_cells, mut div_cells, mut scale_curl, mut scale_div) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..mesh.num_cells() {
        let c = integrate_cell(mesh, k, order, |x| {
            let g = phi.gradient(k, x);
            let val = v.value(k, x);
            v.curl(k, x) * phi.scalar_value(k, x) - (val[0] * g[1] - val[1] * g[0])
        });
        let d = integrate_cell(mesh, k, order, |x| {
            let g = phi.gradient(k, x);
            let val = v.value(k, x);
            v.divergence(k, x) * phi.scalar_value(k, x) + val[0] * g[0] + val[1] * g[1]
        });
        curl_cells += c;
        div_cells += d;
        scale_curl += c.abs();
        scale_div += d.abs();
    }
    let sign = if flip { -1.0 } else { 1.0 };
    let rule = SegmentRule::gauss(p + 2);
    let (mut curl_edges, mut div_edges) = (0.0, 0.0);
    for edge in mesh.edges() {
        let (t, n) = (edge.tangent, edge.normal);
        let (mut c, mut d) = (0.0, 0.0);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let x = edge.point(mesh, s);
            for (k, side) in std::iter::once((edge.left, 1.0)).chain(edge.right.map(|r| (r, -1.0))) {
                let val = v.value(k, x);
                let f = phi.scalar_value(k, x);
                c += side * w * edge.length * (val[0] * t[0] + val[1] * t[1]) * f;
                d += side * w * edge.length * (val[0] * n[0] + val[1] * n[1]) * f;
            }
        }
        curl_edges += sign * c;
        div_edges += sign * d;
        scale_curl += c.abs();
        scale_div += d.abs();
    }
    ((curl_cells - curl_edges).abs() / scale_curl, (div_cells - div_edges).abs() / scale_div)
}

fn degrees(cfg: &RunConfig) -> std::ops::RangeInclusive<usize> {
    1..=cfg.p_max()
}

/// Constants on levels 0, 1, 2 for the h-uniformity checks.
fn constant_levels(cfg: &RunConfig, base: &Mesh) -> Vec<Mesh> {
    (0..3).map(|l| mesh_at_level(cfg, base, l)).collect()
}

fn constants(
    name: &'static str,
    cfg: &RunConfig,
    meshes: &[Mesh],
    rng: &mut ChaCha8Rng,
    exact: impl Fn(&Mesh, usize) -> f64,
    sampled: impl Fn(&Mesh, usize, &mut ChaCha8Rng) -> f64,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut by_p = Vec::new();
    for p in degrees(cfg) {
        let c = exact(&meshes[0], p);
        let s = sampled(&meshes[0], p, rng);
        checks.push(Check::at_most(name, Some(p), s, c * (1.0 + ROUNDOFF)).note("sampled ratio vs exact constant"));
        let per_level: Vec<f64> = meshes.iter().map(|m| exact(m, p)).collect();
        checks.push(
            Check::at_most(name, Some(p), variation(&per_level), UNIFORMITY)
                .note("exact constant, spread over 3 levels"),
        );
        by_p.push(c);
    }
    let growth = by_p.iter().fold(0.0, |m: f64, c| m.max(c / by_p[0]));
    checks.push(Check::at_most(name, None, growth, P_UNIFORMITY).note("exact constant, max over p / value at p = 1"));
    checks
}

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = load_mesh(&cfg.mesh)?;
    let mesh = Arc::new(base.clone());
    let mut checks = vec![Check::at_most("partition_of_unity", None, partition_of_unity_defect(&mesh), 1e-12)];

    for p in degrees(cfg) {
        let v = BrokenField::random(&mesh, p, 2, &mut rng);
        let phi = BrokenField::random(&mesh, p, 1, &mut rng);
        let (c, d) = integration_by_parts_defect(&v, &phi, cfg.flip_orientation);
        checks.push(
            Check::at_most("integration_by_parts", Some(p), c.max(d), ROUNDOFF).note("curl and divergence forms"),
        );
    }

    let levels = constant_levels(cfg, &base);
    checks.extend(constants("trace_inequality", cfg, &levels, &mut rng, trace_constant, |m, p, rng| {
        trace_inequality_ratio(m, p, SAMPLES, rng)
    }));
    checks.extend(constants(
        "lifting_bound",
        cfg,
        &levels,
        &mut rng,
        |m, p| lifting_constant_exact(m, p, p),
        |m, p, rng| lifting_constant(&Arc::new(m.clone()), p, SAMPLES, rng),
    ));

    for p in degrees(cfg) {
        let disc = discretization(cfg, &mesh, p)?;
        let c = disc.coercivity_check(COERCIVITY_SAMPLES, &mut rng);
        checks.push(
            Check::at_least("coercivity", Some(p), c, 0.5 - ROUNDOFF)
                .note(format!("min of {COERCIVITY_SAMPLES} samples, eta_star={}", real(disc.config().eta_star))),
        );
    }

    let mut helmholtz: f64 = 0.0;
    for i in 0..HELMHOLTZ_FIELDS {
        let p = 1 + i % cfg.p_max();
        let vertex = rng.gen_range(0..mesh.num_vertices());
        let v = BrokenField::random(&mesh, p, 2, &mut rng);
        let r = helmholtz_check(&mesh, vertex, &v, cfg.q_for(p));
        let n2 = r.norm * r.norm;
        helmholtz = helmholtz.max(r.pythagoras_defect / n2).max(r.projection_residual / r.norm);
    }
    checks.push(
        Check::at_most("helmholtz", None, helmholtz, ROUNDOFF)
            .note(format!("{HELMHOLTZ_FIELDS} random patch fields, relative defects")),
    );

    for p in CONFORMITY_DEGREES {
        let q = cfg.q_for(p).max(p + 1);
        let rule = edge_rule(2 * q);
        let mut worst: f64 = 0.0;
        for _ in 0..CONFORMITY_FIELDS {
            let eh = BrokenField::random(&mesh, p, 2, &mut rng);
            let (jump, trace) = reconstruct(&eh, q)?.conformity_defect(&rule);
            worst = worst.max(jump).max(trace);
        }
        checks.push(
            Check::at_most("conformity", Some(p), worst, ROUNDOFF)
                .note(format!("{CONFORMITY_FIELDS} random fields, q={q}")),
        );
    }

    checks.extend(h_uniformity(cfg, &base));
    Ok(checks)
}

/// Poincaré and theorem ratios on dG solutions over `levels` uniform
/// refinements, starting after the pre-asymptotic ones.
fn h_uniformity(cfg: &RunConfig, base: &Mesh) -> Vec<Check> {
    let mut checks = Vec::new();
    let first = PREASYMPTOTIC_LEVELS;
    let meshes: Vec<Arc<Mesh>> = (first..first + cfg.levels()).map(|l| Arc::new(mesh_at_level(cfg, base, l))).collect();
    let label = format!("levels {}..{}", first, first + cfg.levels() - 1);
    let names = ["poincare", "theorem_ratio_curl", "theorem_ratio_l2"];
    for p in degrees(cfg) {
        let mut values = [Vec::new(), Vec::new(), Vec::new()];
        let result = meshes.iter().try_for_each(|mesh| -> Result<(), CliError> {
            let s = solve_on(cfg, mesh, p)?;
            let rec = reconstruct_with_patches(&s.eh, cfg.q_for(p))?;
            let max = (0..mesh.num_vertices())
                .filter_map(|a| poincare_ratio_of(&s.eh, &rec.spaces[a], &rec.solutions[a]))
                .reduce(f64::max);
            let r = theorem_ratios(&s.eh, &rec.field);
            values[0].push(max);
            values[1].push(r.curl);
            values[2].push(r.l2);
            Ok(())
        });
        for (name, values) in names.into_iter().zip(&values) {
            checks.push(match &result {
                Ok(()) => uniformity_check(name, p, values, &label),
                Err(e) => Check::at_most(name, Some(p), f64::INFINITY, UNIFORMITY).note(e.to_string()),
            });
        }
    }
    checks
}

fn uniformity_check(name: &'static str, p: usize, values: &[Option<f64>], label: &str) -> Check {
    let present: Vec<f64> = values.iter().flatten().cloned().collect();
    if present.is_empty() {
        return Check::at_most(name, Some(p), 0.0, UNIFORMITY).note("conforming input on every level");
    }
    let measured = if present.len() < values.len() { f64::INFINITY } else { variation(&present) };
    let shown: Vec<String> = present.iter().map(|v| format!("{v:.4e}")).collect();
    Check::at_most(name, Some(p), measured, UNIFORMITY).note(format!("max/min-1 over {label}: {}", shown.join(" ")))
}

pub fn verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let checks = run_checks(cfg)?;
    let mut t = Table::new(&["oracle", "p", "measured", "relation", "bound", "status", "note"]);
    let mut stdout = String::new();
    let mut failed: Vec<&str> = Vec::new();
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        let p = c.p.map_or_else(|| "-".to_string(), |p| p.to_string());
        t.push(vec![
            c.oracle.to_string(),
            p.clone(),
            real(c.measured),
            c.relation.to_string(),
            real(c.bound),
            status.to_string(),
            c.note.replace(',', ";"),
        ]);
        stdout.push_str(&format!(
            "{status:4} {:<22} p={p:<2} {} {} {}  {}\n",
            c.oracle,
            real(c.measured),
            c.relation,
            real(c.bound),
            c.note
        ));
        if !c.passed() && !failed.contains(&c.oracle) {
            failed.push(c.oracle);
        }
    }
    let mut out = Output::new(stdout).with_file("verify.csv", t.to_csv(&cfg.echo()));
    if !failed.is_empty() {
        out.failed = Some(failed.join(", "));
    }
    Ok(out)
}
