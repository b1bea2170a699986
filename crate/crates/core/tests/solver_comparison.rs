//! Raising the right-hand side with the boundary data fixed must not raise
//! the discrete solution anywhere in the interior.

use cma_core::grid::sample;
use cma_core::solver::{default_init, newton_solve};
use cma_core::{DirichletProblem, GridDomain, GridField, NewtonConfig, SolutionFamily};

fn solve(prob: &DirichletProblem) -> GridField {
    let out = newton_solve(prob, &NewtonConfig::default(), default_init(prob).unwrap()).unwrap();
    assert!(out.report.converged, "{:?}", out.report);
    out.solution
}

fn check_pair(family: SolutionFamily, half_width: f64, points: usize, bump: impl Fn(&[f64]) -> f64 + Sync) {
    let domain = GridDomain::cube(family.dim(), half_width, points).unwrap();
    let low = DirichletProblem::manufactured(&family, &domain).unwrap();
    let raised = sample(&domain, |x| family.rhs(x).ln() + bump(x)).unwrap();
    let high = low.with_rhs(raised).unwrap();
    let (u_low, u_high) = (solve(&low), solve(&high));
    let mut strict = false;
    for idx in 0..domain.node_count() {
        if domain.is_boundary(idx) {
            continue;
        }
        let (a, b) = (u_low.values()[idx], u_high.values()[idx]);
        assert!(b <= a + 1e-10, "node {idx}: {b} above {a}");
        strict |= b < a - 1e-6;
    }
    assert!(strict, "raising the right-hand side changed nothing");
}

#[test]
fn constant_raise() {
    check_pair(SolutionFamily::pogorelov2(1.0), 1.0, 9, |_| 0.2);
}

#[test]
fn localized_bump() {
    check_pair(SolutionFamily::pogorelov2(0.5), 1.0, 9, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        0.5 * (-4.0 * r2).exp()
    });
}

#[test]
fn one_sided_raise() {
    check_pair(SolutionFamily::pogorelov2(2.0), 1.0, 9, |x| x[0].max(0.0));
}

#[test]
fn oscillating_raise_on_small_box() {
    check_pair(SolutionFamily::pogorelov2(1.0), 0.5, 9, |x| 0.3 * (1.0 + (5.0 * x[1]).sin()));
}

#[test]
fn three_complex_dimensions() {
    check_pair(SolutionFamily::pogorelov_n(3, 1.0), 1.0, 7, |_| 0.1);
}
