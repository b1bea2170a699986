//! Shared fixtures for the benchmarks.

use cma_core::{num_complex::Complex64, DirichletProblem, GridDomain, HermitianForm, SolutionFamily};

/// A well-conditioned Hermitian form with complex off-diagonal entries.
pub fn sample_form(n: usize) -> HermitianForm {
    HermitianForm::from_fn(n, |i, j| {
        if i == j {
            Complex64::new(n as f64 + 1.0 + i as f64, 0.0)
        } else {
            let t = (i * n + j) as f64;
            Complex64::new((0.7 * t).sin(), (1.3 * t).cos()) * 0.5
        }
    })
    .expect("square")
}

/// Manufactured problem for the `eps = 1` family in C^2 on the unit box.
pub fn manufactured(points: usize) -> DirichletProblem {
    let domain = GridDomain::cube(2, 1.0, points).expect("valid grid");
    DirichletProblem::manufactured(&SolutionFamily::pogorelov2(1.0), &domain).expect("smooth family")
}
