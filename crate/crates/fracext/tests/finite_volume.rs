use std::f64::consts::PI;

use fracext::degenerate_fd::{
    fractional_trace, solve_dirichlet_fd, solve_neumann_fd, GridSpec, HalfGrid, Rhs, XAxis,
};
use fracext::flat_kernels::{calibrate_d_gamma, CalibrationOptions};
use fracext::verify::mms_convergence;

fn strip(gamma: f64, layers: usize, axis: XAxis, height: f64) -> HalfGrid {
    HalfGrid::new(&GridSpec {
        gamma,
        height,
        layers,
        grading: None,
        axes: vec![axis],
    })
    .unwrap()
}

#[test]
fn neumann_harmonic_is_reproduced() {
    for gamma in [0.25, 0.75] {
        let exact = move |y: f64, x: &[f64]| x[0] * x[0] - y * y / (2.0 - 2.0 * gamma);
        let zero = |_: &[f64]| 0.0;
        let mut errors = Vec::new();
        for nodes in [9, 17, 33] {
            let grid = strip(gamma, nodes - 1, XAxis::Boxed { nodes, lo: -1.0, hi: 1.0 }, 1.0);
            let u = solve_neumann_fd(&grid, None, &zero, &exact, Rhs::default()).unwrap();
            errors.push(u.max_error(&exact, |_, _| true).unwrap());
        }
        assert!(errors[2] < 1e-3, "γ = {gamma}: {errors:?}");
        assert!(errors[2] <= 0.5 * errors[0] || errors[2] < 1e-10, "γ = {gamma}: {errors:?}");
    }
}

#[test]
fn manufactured_power_with_plain_source() {
    for gamma in [0.25, 0.75] {
        let a = 2.0 * gamma + 2.0;
        let exact = move |y: f64, _: &[f64]| y.powf(a);
        let psi = move |y: f64, _: &[f64]| -4.0 * (1.0 + gamma) * y;
        let zero = |_: &[f64]| 0.0;
        let grid = strip(gamma, 64, XAxis::Periodic { nodes: 8, length: 1.0 }, 1.0);
        let u = solve_dirichlet_fd(&grid, None, &zero, &exact, Rhs { weighted: None, plain: Some(&psi) }).unwrap();
        let err = u.max_error(&exact, |_, _| true).unwrap();
        assert!(err < 1e-3, "γ = {gamma}: {err}");
    }
}

#[test]
fn manufactured_convergence_order() {
    let (richardson, observed, errors) = mms_convergence(0.25, 8).unwrap();
    assert!(richardson >= 1.5, "{richardson}");
    assert!(observed >= 1.5, "{observed}: {errors:?}");
}

#[test]
fn unit_frequency_trace_is_the_data() {
    let opts = CalibrationOptions::default();
    for gamma in [0.25, 0.75] {
        let (d, _) = calibrate_d_gamma(gamma, &opts).unwrap();
        let f = |x: &[f64]| x[0].cos();
        let zero = |_: f64, _: &[f64]| 0.0;
        let grid = strip(gamma, 300, XAxis::Periodic { nodes: 48, length: 2.0 * PI }, 12.0);
        let u = solve_dirichlet_fd(&grid, None, &f, &zero, Rhs::default()).unwrap();
        let fit = fractional_trace(&u, d, 6).unwrap();
        for (c, t) in fit.trace.iter().enumerate() {
            let x = grid.x_of(c);
            assert!((t - x[0].cos()).abs() < 0.02, "γ = {gamma}, x = {}: {t}", x[0]);
        }
    }
}
