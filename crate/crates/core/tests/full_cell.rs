use ruc_core::equivalence::{Gamma, SymTensor};
use ruc_core::fixtures::{full_cell, Checkerboard, Honeycomb};
use ruc_core::microfem::{homogenize, solve_ruc, solve_with_gammas, verify_equivalence, SolveError, SolveOptions};

fn rel_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn checkerboard_reduced_cell_matches_full_cell() {
    let cb = Checkerboard::default();
    let spec = cb.spec();
    let mesh = cb.mesh(16);
    let mats = Checkerboard::materials();
    let opts = SolveOptions::default();
    let (uc_spec, uc_mesh) = full_cell(&mesh, &spec, &cb.layout()).unwrap();

    let h_r = homogenize(&mesh, &spec, &mats, &opts).unwrap();
    let h_u = homogenize(&uc_mesh, &uc_spec, &mats, &opts).unwrap();
    assert!(h_r.is_complete());
    let d = rel_diff(&h_r.matrix(), &h_u.matrix());
    println!("C_r = {}\nC_uc = {}", h_r.matrix(), h_u.matrix());
    assert!(d < 1e-8, "{d}");
    // the off-centre checker couples shear and normal components
    assert!(h_u.matrix()[(0, 2)].abs() > 1e-4 * h_u.matrix().amax());

    for v in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.3, -0.2, 0.5]] {
        let eps = SymTensor::from_voigt_strain(spec.dim, &v).unwrap();
        let r = solve_ruc(&mesh, &spec, &mats, &eps, &opts).unwrap();
        let u = solve_ruc(&uc_mesh, &uc_spec, &mats, &eps, &opts).unwrap();
        let rep = verify_equivalence(&u, &r, &spec, &cb.layout(), None).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}

#[test]
fn honeycomb_reduced_cell_matches_full_cell() {
    let hc = Honeycomb::default();
    let spec = hc.spec();
    let mesh = hc.mesh(24, 28);
    let mats = Honeycomb::materials();
    let opts = SolveOptions::default();
    let (uc_spec, uc_mesh) = full_cell(&mesh, &spec, &hc.layout()).unwrap();
    let h_r = homogenize(&mesh, &spec, &mats, &opts).unwrap();
    let h_u = homogenize(&uc_mesh, &uc_spec, &mats, &opts).unwrap();
    println!("C_r = {}\nC_uc = {}", h_r.matrix(), h_u.matrix());
    println!("{:?}", h_r.column_gammas);
    let d = rel_diff(&h_r.matrix(), &h_u.matrix());
    assert!(d < 1e-8, "{d}");

    let eps = SymTensor::from_voigt_strain(spec.dim, &[0.0, 0.0, 1.0]).unwrap();
    let r = solve_ruc(&mesh, &spec, &mats, &eps, &opts).unwrap();
    let u = solve_ruc(&uc_mesh, &uc_spec, &mats, &eps, &opts).unwrap();
    let rep = verify_equivalence(&u, &r, &spec, &hc.layout(), None).unwrap();
    assert!(rep.passed, "{rep:?}");
    let wrong = [Gamma::Plus; 3];
    let bad = verify_equivalence(&u, &r, &spec, &hc.layout(), Some(&wrong)).unwrap();
    println!("wrong-sign residual {}", bad.strain_residual.max(bad.stress_residual));
    assert!(bad.strain_residual.max(bad.stress_residual) > 1e-2);
    match solve_with_gammas(&mesh, &spec, &mats, &eps, &wrong, &opts) {
        Err(SolveError::InconsistentSelfConstraint { .. }) | Err(SolveError::Inadmissible { .. }) => {}
        other => panic!("expected a rejection, got {:?}", other.map(|s| s.mean_stress)),
    }
}
