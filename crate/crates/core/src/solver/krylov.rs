//! Right-preconditioned BiCGStab.

use rayon::prelude::*;

use super::multigrid::Hierarchy;
use super::operator::{apply, dot, norm2, Coefficients, Geometry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KrylovStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += a * xi);
}

/// Solves `L x = b` (interior unknowns, `b` zero on the boundary) until
/// `|b - L x| <= rel_tol |b|`, starting from `x = 0`.
pub(crate) fn bicgstab(
    geo: &Geometry,
    coef: &Coefficients,
    mg: &Hierarchy,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> KrylovStats {
    let len = geo.len;
    x.fill(0.0);
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return KrylovStats { iterations: 0, rel_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let r_hat = b.to_vec();
    let mut p = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut p_hat = vec![0.0; len];
    let mut s_hat = vec![0.0; len];
    let mut t = vec![0.0; len];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut rel = 1.0;
    for it in 1..=max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return KrylovStats { iterations: it - 1, rel_residual: rel, converged: false };
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut().zip(r.par_iter().zip(v.par_iter())).for_each(|(pi, (ri, vi))| {
            *pi = ri + beta * (*pi - omega * vi);
        });
        mg.vcycle(coef, &p, &mut p_hat);
        apply(geo, coef, &p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        // r now holds s = r - alpha v
        axpy(&mut r, -alpha, &v);
        axpy(x, alpha, &p_hat);
        rel = norm2(&r) / b_norm;
        if rel <= rel_tol {
            return KrylovStats { iterations: it, rel_residual: rel, converged: true };
        }
        mg.vcycle(coef, &r, &mut s_hat);
        apply(geo, coef, &s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        axpy(x, omega, &s_hat);
        axpy(&mut r, -omega, &t);
        rel = norm2(&r) / b_norm;
        if rel <= rel_tol {
            return KrylovStats { iterations: it, rel_residual: rel, converged: true };
        }
        if omega == 0.0 {
            return KrylovStats { iterations: it, rel_residual: rel, converged: false };
        }
    }
    KrylovStats { iterations: max_iters, rel_residual: rel, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::operator::residual;

    #[test]
    fn solves_variable_coefficient_problem() {
        let geo = Geometry::new(vec![17; 4], vec![0.125; 4]);
        let mut coef = Coefficients::identity(&geo);
        for (k, node) in coef.data.chunks_mut(4).enumerate() {
            let t = (k % 97) as f64 / 97.0;
            node.copy_from_slice(&[1.0 + t, 2.0 - t, 0.4 * t, -0.3 * (1.0 - t)]);
        }
        let mg = Hierarchy::new(&geo, &coef);
        let mut b = vec![0.0; geo.len];
        for &base in &geo.rows {
            for i in 1..16 {
                b[base + i] = ((base + i) % 11) as f64 - 5.0;
            }
        }
        let mut x = vec![0.0; geo.len];
        let stats = bicgstab(&geo, &coef, &mg, &b, &mut x, 1e-10, 100);
        assert!(stats.converged && stats.iterations < 30, "{stats:?}");
        let mut r = vec![0.0; geo.len];
        residual(&geo, &coef, &x, &b, &mut r);
        assert!(norm2(&r) <= 1.01e-10 * norm2(&b));
    }
}
