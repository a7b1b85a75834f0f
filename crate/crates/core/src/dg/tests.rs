use super::*;
use crate::broken::Analytic;
use crate::problems::ProblemKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n: usize, p: usize, eta: f64) -> Discretization {
    let mesh = Arc::new(Mesh::unit_square(n));
    let mat = MaterialModel::uniform(&mesh, 1.0, 1.0, 1.0).unwrap();
    Discretization::new(&mesh, mat, DGConfig::new(p, eta)).unwrap()
}

fn poly() -> Problem {
    Problem::standard(ProblemKind::Polynomial)
}

fn exact_of(pb: Problem) -> Analytic<impl Fn(Point) -> [f64; 2] + Sync, impl Fn(Point) -> f64 + Sync> {
    Analytic { value: move |x| pb.exact(x).unwrap(), curl: move |x| pb.exact_curl(x).unwrap() }
}

#[test]
fn two_cell_system_is_small_and_symmetric() {
    let d = setup(1, 1, 10.0);
    assert_eq!(d.num_dofs(), 12);
    assert_eq!(d.matrix().dim(), 12);
    assert!(d.matrix().symmetry_defect() <= 1e-13);
}

#[test]
fn constant_field_by_hand() {
    // v = (1,0): no curl, no interior jumps; the horizontal boundary edges
    // (t_F = +-(1,0), length 1) see [v]^c = +-1, the vertical ones 0.
    let eta = 7.0;
    let d = setup(1, 1, eta);
    let v = BrokenField::l2_project(d.mesh(), 1, |_| [1.0, 0.0]);
    let mut boundary = 0.0;
    for edge in d.mesh().edges().iter().filter(|e| e.is_boundary()) {
        boundary += 1.0 / edge.length * edge.tangent[0].powi(2) * edge.length;
    }
    assert!((boundary - 2.0).abs() < 1e-14);
    // consistency terms vanish since curl v = 0
    assert!((d.bilinear(&v, &v) - (1.0 + eta * boundary)).abs() < 1e-12);
    assert!((d.dg_norm(&v).powi(2) - (1.0 + boundary)).abs() < 1e-12);
    assert!((d.dg_norm(&v.scaled(2.0)) - 2.0 * d.dg_norm(&v)).abs() < 1e-12);
    assert_eq!(d.dg_norm(&BrokenField::zeros(d.mesh(), 1, 2)), 0.0);
}

#[test]
fn penalty_enters_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = setup(2, 2, 5.0);
    let b = setup(2, 2, 10.0);
    let v = BrokenField::random(a.mesh(), 2, 2, &mut rng);
    let w = BrokenField::from_coefficients(b.mesh(), 2, 2, v.coefficients().to_vec());
    let diff = b.bilinear(&w, &w) - a.bilinear(&v, &v);
    assert!((diff - 5.0 * a.stabilization(&v, &v)).abs() < 1e-10 * diff.abs());
    let s = a.stabilization_matrix();
    assert!((s.form(v.coefficients(), v.coefficients()) - a.stabilization(&v, &v)).abs() < 1e-10);
}

#[test]
fn face_form_equals_lifting_form() {
    for (n, p) in [(1, 1), (2, 2)] {
        let d = setup(n, p, 13.0);
        let face = d.matrix().to_dense();
        let vol = d.volume_matrix().to_dense();
        let stab = d.stabilization_matrix().to_dense();
        let lift = d.lifting_consistency_matrix();
        let via_lift = vol + stab * 13.0 - &lift - lift.transpose();
        let scale = face.amax();
        assert!((face - via_lift).amax() <= 1e-12 * scale, "n={n} p={p}");
    }
}

#[test]
fn bilinear_form_symmetric_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mesh = Arc::new(Mesh::l_shape(2));
    let eps: Vec<f64> = (0..mesh.num_cells()).map(|k| 1.0 + 0.5 * (k % 3) as f64).collect();
    let nu: Vec<f64> = (0..mesh.num_cells()).map(|k| 2.0 - 0.3 * (k % 2) as f64).collect();
    let d = Discretization::new(&mesh, MaterialModel::new(eps, nu, 1.7).unwrap(), DGConfig::new(2, 20.0)).unwrap();
    for _ in 0..5 {
        let v = BrokenField::random(&mesh, 2, 2, &mut rng);
        let w = BrokenField::random(&mesh, 2, 2, &mut rng);
        let (a, b) = (d.bilinear(&v, &w), d.bilinear(&w, &v));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
    }
}

#[test]
fn discrete_exactness_for_quadratic_solution() {
    let pb = poly();
    for p in [2, 3] {
        let d = setup(2, p, 0.0);
        let d = Discretization::new(d.mesh(), d.materials().clone(), DGConfig::auto(d.mesh(), p)).unwrap();
        let (eh, _) = d.solve(&SourceTerm::from_problem(&pb)).unwrap();
        let err = d.error_measure(&exact_of(pb), &eh);
        assert!(err.total() <= 1e-8, "p={p}: {}", err.total());
        let interpolant = BrokenField::l2_project(d.mesh(), p, |x| pb.exact(x).unwrap());
        assert!(eh.sub(&interpolant).l2_norm() <= 1e-8);
    }
}

#[test]
fn linear_elements_converge_at_first_order() {
    let pb = poly();
    let errors: Vec<f64> = [2, 4]
        .iter()
        .map(|&n| {
            let mesh = Arc::new(Mesh::unit_square(n));
            let mat = MaterialModel::for_problem(&mesh, &pb).unwrap();
            let d = Discretization::new(&mesh, mat, DGConfig::auto(&mesh, 1)).unwrap();
            let (eh, _) = d.solve(&SourceTerm::from_problem(&pb)).unwrap();
            d.error_measure(&exact_of(pb), &eh).total()
        })
        .collect();
    let rate = (errors[0] / errors[1]).log2();
    assert!(errors[1] > 1e-6 && (rate - 1.0).abs() < 0.3, "{errors:?} rate {rate}");
}

#[test]
fn zero_source_gives_zero() {
    let d = setup(2, 2, 20.0);
    let (eh, _) = d.solve(&SourceTerm::zero()).unwrap();
    assert_eq!(eh.l2_norm(), 0.0);
}

#[test]
fn pcg_and_dense_agree() {
    let pb = Problem::standard(ProblemKind::Trigonometric);
    let d = setup(3, 2, 0.0);
    let d = Discretization::new(d.mesh(), d.materials().clone(), DGConfig::auto(d.mesh(), 2)).unwrap();
    let b = d.rhs(&SourceTerm::from_problem(&pb));
    let (x1, _) = solve_dense(d.matrix(), &b).unwrap();
    let (x2, stats) = pcg(d.matrix(), &b, 1e-12, 5000).unwrap();
    assert!(stats.relative_residual <= 1e-11);
    let diff: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(diff < 1e-8);
}

#[test]
fn coercivity_with_automatic_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mesh = Arc::new(Mesh::unit_square(2));
    for p in 1..=3 {
        let mat = MaterialModel::uniform(&mesh, 1.0, 1.0, 1.0).unwrap();
        let d = Discretization::new(&mesh, mat, DGConfig::auto(&mesh, p)).unwrap();
        assert!(d.coercivity_check(100, &mut rng) >= 0.5 - 1e-10);
        assert!(d.coercivity_exact().unwrap() >= 0.5 - 1e-10, "p={p}");
    }
    // a tiny penalty destroys coercivity
    let d = setup(2, 2, 0.01);
    assert!(d.coercivity_exact().unwrap() < 0.5);
}

#[test]
fn conforming_fields_have_unit_ratio() {
    let pb = poly();
    let d = setup(2, 2, 20.0);
    let v = BrokenField::l2_project(d.mesh(), 2, |x| pb.exact(x).unwrap());
    let ratio = d.bilinear(&v, &v) / d.dg_norm(&v).powi(2);
    assert!((ratio - 1.0).abs() < 1e-12);
}

#[test]
fn extended_form_reduces_correctly() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let d = setup(2, 2, 15.0);
    let v = BrokenField::random(d.mesh(), 2, 2, &mut rng);
    let broken = Split { conforming: None, broken: Some(&v) };
    let a = d.extended_bilinear(&broken, &broken);
    let b = d.bilinear(&v, &v);
    assert!((a - b).abs() < 1e-10 * b.abs(), "{a} vs {b}");

    let pb = Problem::standard(ProblemKind::Trigonometric);
    let e = exact_of(pb);
    let conf = Split { conforming: Some(&e), broken: None };
    let direct: f64 = (0..d.mesh().num_cells())
        .map(|k| {
            integrate_cell(d.mesh(), k, 14, |x| {
                let u = pb.exact(x).unwrap();
                u[0] * u[0] + u[1] * u[1] + pb.exact_curl(x).unwrap().powi(2)
            })
        })
        .sum();
    assert!((d.extended_bilinear(&conf, &conf) - direct).abs() < 1e-10 * direct);
}

#[test]
fn error_measure_is_additive() {
    let pb = Problem::standard(ProblemKind::Trigonometric);
    let d = setup(2, 1, 20.0);
    let (eh, _) = d.solve(&SourceTerm::from_problem(&pb)).unwrap();
    let err = d.error_measure(&exact_of(pb), &eh);
    let all: Vec<usize> = (0..d.mesh().num_cells()).collect();
    assert!((err.on(&all) - err.total()).abs() < 1e-14);
    assert_eq!(err.on(&[3]), err.cell(3));
    // projection of a conforming polynomial has no jump part
    let proj = BrokenField::l2_project(d.mesh(), 2, |x| poly().exact(x).unwrap());
    let d2 = setup(2, 2, 20.0);
    assert!(d2.error_measure(&exact_of(poly()), &proj).total() < 1e-12);
}

#[test]
fn rejects_bad_input() {
    let mesh = Arc::new(Mesh::unit_square(1));
    let mat = MaterialModel::uniform(&mesh, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(Discretization::new(&mesh, mat, DGConfig::new(0, 10.0)).err(), Some(SolverError::DegreeTooLow(0)));
    assert!(matches!(
        MaterialModel::uniform(&mesh, 1.0, -1.0, 1.0),
        Err(SolverError::InvalidMaterial { name: "eps", .. })
    ));
    assert!(MaterialModel::uniform(&mesh, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn system_dump_lists_matrix_entries() {
    let d = setup(1, 1, 10.0);
    let text = d.matrix().to_coordinate_text();
    let count = text.lines().count();
    assert!(count > 0 && count <= 12 * 12);
    let first: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first.len(), 3);
}
