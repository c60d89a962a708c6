use approx::assert_relative_eq;
use fingering_core::flow::{
    assemble_flow, injection_outflow, mass_balance_defect, solve_flow, viscosity, FlowProblem, ViscosityLaw,
    ViscosityModel, EXPONENT_CLAMP,
};
use fingering_core::mesh::build_structured_mesh;
use fingering_core::verification::{flow_patch_test, PATCH_TOLERANCE};
use proptest::prelude::*;

#[test]
fn patch_test_reproduces_linear_pressure() {
    for n in [3, 6, 11] {
        let r = flow_patch_test(n).unwrap();
        assert!(r.velocity_error <= PATCH_TOLERANCE, "n = {n}: {r:?}");
        assert!(r.pressure_error <= PATCH_TOLERANCE, "n = {n}: {r:?}");
    }
}

#[test]
fn viscosity_examples() {
    let law = ViscosityLaw { mu0: 1.0, r_c: 2.0, r_theta: 2.0 };
    assert_relative_eq!(viscosity(1.0, 1.0, &law), 1.0);
    assert_relative_eq!(viscosity(0.0, 0.0, &law), 4f64.exp(), max_relative = 1e-14);
    assert_relative_eq!(viscosity(0.5, 1.0, &law), 1f64.exp(), max_relative = 1e-14);
    let far = law.evaluate(-100.0, 0.0);
    assert!(far.clamped);
    assert_relative_eq!(far.value, EXPONENT_CLAMP.exp(), max_relative = 1e-14);
}

#[test]
fn five_spot_balance_and_injection_flux() {
    let mesh = build_structured_mesh(20, 20, 1.0, 0.1).unwrap();
    let problem = FlowProblem::quarter_five_spot(&mesh, 1.0, ViscosityLaw::default(), 0.1, 0.1);
    let n = mesh.num_corner_nodes();
    // a rough concentration field makes the viscosity vary by e^2 across the box
    let c: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
    let theta = vec![0.0; n];
    let s = solve_flow(&mesh, &problem, &c, &theta).unwrap();
    let defect = mass_balance_defect(&mesh, &problem, &s);
    assert!(defect <= 1e-9, "defect {defect:e}");
    assert_relative_eq!(injection_outflow(&mesh, &s), 0.1 * 0.1 * 0.1, max_relative = 1e-9);
    let mean = s.pressure.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 1e-12);
}

#[test]
fn five_spot_is_symmetric_about_the_diagonal() {
    let mesh = build_structured_mesh(16, 16, 1.0, 0.125).unwrap();
    let problem = FlowProblem::quarter_five_spot(&mesh, 1.0, ViscosityLaw::default(), 0.1, 0.1);
    let n = mesh.num_corner_nodes();
    let c: Vec<f64> = (0..n).map(|i| {
        let [x, y] = mesh.corner_nodes[i];
        (-(x * x + y * y) * 4.0).exp()
    }).collect();
    let s = solve_flow(&mesh, &problem, &c, &vec![0.0; n]).unwrap();
    let v = s.corner_velocity(&mesh);
    let scale = v.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
    for i in 0..n {
        let m = mesh.diagonal_mirror(i);
        assert!((v[i][0] - v[m][1]).abs() <= 1e-9 * scale);
        assert!((v[i][1] - v[m][0]).abs() <= 1e-9 * scale);
        assert!((s.pressure[i] - s.pressure[m]).abs() <= 1e-9);
    }
}

#[test]
fn assembled_saddle_matrix_is_symmetric() {
    let mesh = build_structured_mesh(5, 5, 1.0, 0.2).unwrap();
    let problem = FlowProblem::quarter_five_spot(&mesh, 1.0, ViscosityLaw::default(), 0.1, 0.1);
    let n = mesh.num_corner_nodes();
    let c: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let (system, _) = assemble_flow(&mesh, &problem, &c, &vec![0.5; n]).unwrap();
    let m = &system.matrix;
    for (r, c, v) in m.entries() {
        assert!((v - m.get(c, r)).abs() <= 1e-12 * (1.0 + v.abs()), "({r}, {c})");
    }
}

proptest! {
    #[test]
    fn viscosity_is_positive_and_monotone(c in -200.0..200.0f64, theta in -200.0..200.0f64, dc in 0.0..5.0f64) {
        let law = ViscosityLaw::default();
        let (a, b) = (viscosity(c, theta, &law), viscosity(c + dc, theta, &law));
        prop_assert!(a.is_finite() && a > 0.0);
        prop_assert!(b <= a);
    }
}
