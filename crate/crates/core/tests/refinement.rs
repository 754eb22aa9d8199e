use lawson_core::assembly::{assemble, WELD_TOL};
use lawson_core::fem::{build_fem, MassScheme};
use lawson_core::plateau::{init_disk_mesh, mean_curvature_residual, minimize_area, SolverOptions};
use lawson_core::sphere::LawsonParams;
use std::f64::consts::PI;

fn patch(m: usize, k: usize, n: usize) -> lawson_core::mesh::TriMesh {
    let p = LawsonParams::new(m, k).unwrap();
    let r = minimize_area(
        &init_disk_mesh(&p, n).unwrap(),
        &SolverOptions::for_resolution(n),
    )
    .unwrap();
    assert!(r.converged, "({m},{k}) n={n}: {:?}", r.stop);
    r.mesh
}

#[test]
fn two_two_residual_drops_with_refinement() {
    let r: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| mean_curvature_residual(&patch(2, 2, n)).max_ambient)
        .collect();
    eprintln!("ambient residuals {r:?}");
    assert!(r[1] < r[0] && r[2] < r[1], "{r:?}");
}

#[test]
fn clifford_lumped_mass_is_two_pi_squared() {
    let s = assemble(&patch(1, 1, 32), WELD_TOL).unwrap();
    let total = build_fem(&s.mesh, MassScheme::Lumped).mass.total();
    let target = 2.0 * PI * PI;
    assert!((total - target).abs() / target < 0.01, "{total}");
}
