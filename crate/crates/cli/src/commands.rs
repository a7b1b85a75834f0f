//! Solve, estimate, reconstruct, convergence studies and the adaptive loop.

use std::sync::Arc;

use curlrec::broken::{edge_rule, write_field, VectorField};
use curlrec::dg::{DGConfig, Discretization, MaterialModel, SolveStats, SourceTerm};
use curlrec::estimator::{estimate, Effectivity, IndicatorReport};
use curlrec::mesh::{read_mesh, write_mesh, Mesh};
use curlrec::problems::{ExactField, Problem};
use curlrec::reconstruct::{reconstruct, reconstruct_with_patches, theorem_ratios, TheoremRatios};

use crate::config::{EtaStar, MeshSource, RunConfig};
use crate::error::CliError;
use crate::marking::dorfler;
use crate::report::{effectivity, optional, rate, real, Table};
use crate::Output;

pub fn load_mesh(source: &MeshSource) -> Result<Mesh, CliError> {
    match source {
        MeshSource::Square(n) => Ok(Mesh::unit_square(*n)),
        MeshSource::LShape(n) => Ok(Mesh::l_shape(*n)),
        MeshSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            read_mesh(&text).map_err(|source| CliError::Mesh { path: path.clone(), source })
        }
    }
}

/// Uniform refinement `level` of the configured mesh: the structured family
/// with `n * 2^level` for built-in domains, repeated uniform bisection of a
/// mesh read from file.
pub fn mesh_at_level(cfg: &RunConfig, base: &Mesh, level: usize) -> Mesh {
    match cfg.mesh {
        MeshSource::Square(n) => Mesh::unit_square(n << level),
        MeshSource::LShape(n) => Mesh::l_shape(n << level),
        MeshSource::File(_) => (0..level).fold(base.clone(), |m, _| m.refine_uniform()),
    }
}

pub fn problem(cfg: &RunConfig) -> Problem {
    Problem::new(cfg.problem, cfg.omega, cfg.eps.default, cfg.nu.default)
}

pub fn materials(cfg: &RunConfig, mesh: &Mesh) -> Result<MaterialModel, CliError> {
    Ok(MaterialModel::new(cfg.eps.per_cell(mesh), cfg.nu.per_cell(mesh), cfg.omega)?)
}

pub fn discretization(cfg: &RunConfig, mesh: &Arc<Mesh>, p: usize) -> Result<Discretization, CliError> {
    let dg = match cfg.eta_star {
        EtaStar::Auto => DGConfig::auto(mesh, p),
        EtaStar::Value(v) => DGConfig::new(p, v),
    };
    Ok(Discretization::new(mesh, materials(cfg, mesh)?, dg)?)
}

/// A dG solution with its indicators (and error, when the problem has an
/// exact solution).
pub struct Solved {
    pub disc: Discretization,
    pub source: SourceTerm,
    pub eh: curlrec::BrokenField,
    pub stats: SolveStats,
    pub report: IndicatorReport,
}

pub fn solve_on(cfg: &RunConfig, mesh: &Arc<Mesh>, p: usize) -> Result<Solved, CliError> {
    let pb = problem(cfg);
    let disc = discretization(cfg, mesh, p)?;
    let source = SourceTerm::from_problem(&pb);
    let (eh, stats) = disc.solve(&source)?;
    let exact: Option<ExactField> = pb.exact_field();
    let report = estimate(&disc, &eh, &source, exact.as_ref().map(|e| e as &dyn VectorField));
    Ok(Solved { disc, source, eh, stats, report })
}

/// One row of an h- or p-study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub p: usize,
    pub h_max: f64,
    pub ncells: usize,
    pub ndof: usize,
    pub err: Option<f64>,
    pub eta: f64,
    pub eta_div: f64,
    pub eta_curl: f64,
    pub eta_nc: f64,
    pub effectivity: Option<Effectivity>,
    pub ratios: TheoremRatios,
}

fn study_row(cfg: &RunConfig, mesh: &Arc<Mesh>, level: usize, p: usize) -> Result<StudyRow, CliError> {
    let s = solve_on(cfg, mesh, p)?;
    let ec = reconstruct(&s.eh, cfg.q_for(p))?;
    Ok(StudyRow {
        level,
        p,
        h_max: mesh.h_max(),
        ncells: mesh.num_cells(),
        ndof: s.disc.num_dofs(),
        err: s.report.error_total(),
        eta: s.report.total(),
        eta_div: s.report.total_div(),
        eta_curl: s.report.total_curl(),
        eta_nc: s.report.total_nc(),
        effectivity: s.report.effectivity(),
        ratios: theorem_ratios(&s.eh, &ec),
    })
}

pub fn study_h_rows(cfg: &RunConfig) -> Result<Vec<StudyRow>, CliError> {
    let base = load_mesh(&cfg.mesh)?;
    (0..cfg.levels()).map(|l| study_row(cfg, &Arc::new(mesh_at_level(cfg, &base, l)), l, cfg.p)).collect()
}

pub fn study_p_rows(cfg: &RunConfig) -> Result<Vec<StudyRow>, CliError> {
    let mesh = Arc::new(load_mesh(&cfg.mesh)?);
    (1..=cfg.p_max()).map(|p| study_row(cfg, &mesh, 0, p)).collect()
}

pub fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let mesh = Arc::new(load_mesh(&cfg.mesh)?);
    let s = solve_on(cfg, &mesh, cfg.p)?;
    let mut t = Table::new(&["ncells", "ndof", "h_max", "eta_star", "iterations", "relative_residual", "err_sharp"]);
    t.push(vec![
        mesh.num_cells().to_string(),
        s.disc.num_dofs().to_string(),
        real(mesh.h_max()),
        real(s.disc.config().eta_star),
        s.stats.iterations.to_string(),
        real(s.stats.relative_residual),
        optional(s.report.error_total()),
    ]);
    let stdout = format!(
        "solved p={} on {} cells: {} dofs, err_sharp={}\n",
        cfg.p,
        mesh.num_cells(),
        s.disc.num_dofs(),
        optional(s.report.error_total())
    );
    Ok(Output::new(stdout)
        .with_file("solution.field", write_field(&s.eh))
        .with_file("solve.csv", t.to_csv(&cfg.echo())))
}

pub fn estimate_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let mesh = Arc::new(load_mesh(&cfg.mesh)?);
    let s = solve_on(cfg, &mesh, cfg.p)?;
    let r = &s.report;
    let stdout = format!(
        "eta={} (div {}, curl {}, nc {}) err_sharp={} effectivity={}\n",
        real(r.total()),
        real(r.total_div()),
        real(r.total_curl()),
        real(r.total_nc()),
        optional(r.error_total()),
        effectivity(r.effectivity())
    );
    let csv = r.to_csv() + &crate::report::metadata(&cfg.echo());
    Ok(Output::new(stdout).with_file("indicators.csv", csv))
}

pub fn reconstruct_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let mesh = Arc::new(load_mesh(&cfg.mesh)?);
    let s = solve_on(cfg, &mesh, cfg.p)?;
    let q = cfg.q_for(cfg.p);
    let rec = reconstruct_with_patches(&s.eh, q)?;
    let ratios = theorem_ratios(&s.eh, &rec.field);
    let (jump, trace) = rec.field.conformity_defect(&edge_rule(2 * q));
    let mut t = Table::new(&[
        "ncells",
        "ndof",
        "q",
        "ndof_rec",
        "ratio_curl",
        "ratio_L2",
        "max_tangential_jump",
        "max_boundary_trace",
        "max_patch_residual",
    ]);
    t.push(vec![
        mesh.num_cells().to_string(),
        s.disc.num_dofs().to_string(),
        q.to_string(),
        rec.field.num_dofs().to_string(),
        optional(ratios.curl),
        optional(ratios.l2),
        real(jump),
        real(trace),
        real(rec.max_residual()),
    ]);
    let stdout = format!(
        "reconstructed with q={q}: ratio_curl={} ratio_L2={} max jump={}\n",
        optional(ratios.curl),
        optional(ratios.l2),
        real(jump.max(trace))
    );
    Ok(Output::new(stdout)
        .with_file("reconstruction.nedelec", rec.field.to_text())
        .with_file("reconstruct.csv", t.to_csv(&cfg.echo())))
}

pub fn study_h(cfg: &RunConfig) -> Result<Output, CliError> {
    let rows = study_h_rows(cfg)?;
    let mut t = Table::new(&[
        "level",
        "h_max",
        "ndof",
        "err_sharp",
        "eta",
        "eta_div",
        "eta_curl",
        "eta_nc",
        "effectivity",
        "ratio_curl",
        "ratio_L2",
        "rate_err",
        "rate_eta",
    ]);
    let mut prev: Option<&StudyRow> = None;
    for r in &rows {
        t.push(vec![
            r.level.to_string(),
            real(r.h_max),
            r.ndof.to_string(),
            optional(r.err),
            real(r.eta),
            real(r.eta_div),
            real(r.eta_curl),
            real(r.eta_nc),
            effectivity(r.effectivity),
            optional(r.ratios.curl),
            optional(r.ratios.l2),
            optional(rate(prev.and_then(|p| p.err), r.err)),
            optional(rate(prev.map(|p| p.eta), Some(r.eta))),
        ]);
        prev = Some(r);
    }
    let stdout = format!("study-h: {} levels, p={}\n", rows.len(), cfg.p);
    Ok(Output::new(stdout).with_file("study_h.csv", t.to_csv(&cfg.echo())))
}

pub fn study_p(cfg: &RunConfig) -> Result<Output, CliError> {
    let rows = study_p_rows(cfg)?;
    let mut t = Table::new(&["p", "ndof", "err_sharp", "eta", "effectivity", "ratio_curl", "ratio_L2"]);
    for r in &rows {
        t.push(vec![
            r.p.to_string(),
            r.ndof.to_string(),
            optional(r.err),
            real(r.eta),
            effectivity(r.effectivity),
            optional(r.ratios.curl),
            optional(r.ratios.l2),
        ]);
    }
    let stdout = format!("study-p: p = 1..={}\n", cfg.p_max());
    Ok(Output::new(stdout).with_file("study_p.csv", t.to_csv(&cfg.echo())))
}

/// One iteration of the adaptive loop; `marked` is empty on the last one.
#[derive(Clone, Debug)]
pub struct AdaptStep {
    pub mesh: Arc<Mesh>,
    pub ndof: usize,
    pub eta: f64,
    pub err: Option<f64>,
    pub marked: Vec<usize>,
}

/// Solve, estimate, mark (Dörfler) and refine (newest-vertex bisection) for
/// `levels` iterations.
pub fn adapt_steps(cfg: &RunConfig) -> Result<Vec<AdaptStep>, CliError> {
    let mut mesh = Arc::new(load_mesh(&cfg.mesh)?);
    let mut steps = Vec::new();
    for iter in 0..cfg.levels() {
        let s = solve_on(cfg, &mesh, cfg.p)?;
        let last = iter + 1 == cfg.levels();
        let marked = if last { Vec::new() } else { dorfler(&s.report.eta_cells(), cfg.theta) };
        let next = (!last).then(|| Arc::new(mesh.refine(&marked)));
        steps.push(AdaptStep {
            mesh: mesh.clone(),
            ndof: s.disc.num_dofs(),
            eta: s.report.total(),
            err: s.report.error_total(),
            marked,
        });
        if let Some(next) = next {
            mesh = next;
        }
    }
    Ok(steps)
}

pub fn adapt(cfg: &RunConfig) -> Result<Output, CliError> {
    let steps = adapt_steps(cfg)?;
    let mut t = Table::new(&["iter", "ncells", "ndof", "nmarked", "eta", "err_sharp"]);
    for (i, s) in steps.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            s.mesh.num_cells().to_string(),
            s.ndof.to_string(),
            s.marked.len().to_string(),
            real(s.eta),
            optional(s.err),
        ]);
    }
    let last = steps.last().expect("at least one iteration");
    let stdout =
        format!("adapt: {} iterations, final {} cells, eta={}\n", steps.len(), last.mesh.num_cells(), real(last.eta));
    Ok(Output::new(stdout)
        .with_file("adapt.csv", t.to_csv(&cfg.echo()))
        .with_file("adapt_final.mesh", write_mesh(&last.mesh)))
}
