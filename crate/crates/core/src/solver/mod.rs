//! Damped Newton solver for `log det(u_{i jbar}) = F` on a box with
//! Dirichlet data.
//!
//! Each step solves the linearized equation `tr(B CH(v)) = -(log det CH(u) - F)`
//! with `B = CH(u)^{-1}` by BiCGStab preconditioned with a geometric multigrid
//! V-cycle, then halves the step until the iterate keeps positive definite
//! finite-difference Hessians and the max-norm residual does not grow.

mod krylov;
mod multigrid;
mod operator;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{FamilyError, SolutionFamily};
use crate::grid::{sample, GridDomain, GridError, GridField, MAX_GRID_DIM};
use crate::hermitian::HermitianForm;

use multigrid::Hierarchy;
use operator::{Coefficients, Geometry, HessianScan};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("complex Hessian not positive definite at node {node} ({coords:?}), pivot {pivot:e}")]
    NotPlurisubharmonic { node: usize, coords: Vec<f64>, pivot: f64 },
    #[error("Newton iteration stopped at residual {:e} after {} iterations", .0.report.final_residual, .0.report.iterations)]
    NonConverged(Box<SolveOutcome>),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Dirichlet problem `log det CH(u) = rhs` in the box, `u = boundary` on its faces.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    rhs: GridField,
    /// Values on the boundary ring; interior entries are unavailable.
    boundary: GridField,
    lambda: f64,
}

impl DirichletProblem {
    pub fn new(rhs: GridField, boundary: GridField, lambda: f64) -> Result<Self, SolverError> {
        let d = rhs.domain();
        if boundary.domain() != d {
            return Err(SolverError::InvalidProblem("rhs and boundary live on different grids".into()));
        }
        if d.points_per_axis().iter().any(|&p| p < 3) {
            return Err(SolverError::InvalidProblem("need at least 3 points per axis".into()));
        }
        let mut rhs_max: f64 = 0.0;
        for idx in 0..d.node_count() {
            if d.is_boundary(idx) {
                if !boundary.values()[idx].is_finite() {
                    return Err(SolverError::InvalidProblem(format!("boundary value missing at node {idx}")));
                }
            } else {
                let f = rhs.values()[idx];
                if !f.is_finite() {
                    return Err(SolverError::InvalidProblem(format!("rhs not finite at node {idx}")));
                }
                rhs_max = rhs_max.max(f.abs());
            }
        }
        if !(lambda >= rhs_max) {
            return Err(SolverError::InvalidProblem(format!("|rhs| reaches {rhs_max}, above Lambda = {lambda}")));
        }
        let mut boundary = boundary;
        for (idx, v) in boundary.values_mut().iter_mut().enumerate() {
            if !d.is_boundary(idx) {
                *v = f64::NAN;
            }
        }
        Ok(Self { rhs, boundary, lambda })
    }

    /// Problem built from closures; `Lambda` is the observed `max |rhs|`.
    pub fn from_fns<F, G>(domain: &GridDomain, rhs: F, boundary: G) -> Result<Self, SolverError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
        G: Fn(&[f64]) -> f64 + Sync,
    {
        let r = sample(domain, |x| rhs(x))?;
        let b = sample(domain, |x| boundary(x))?;
        let lambda = (0..domain.node_count())
            .filter(|&i| !domain.is_boundary(i))
            .map(|i| r.values()[i].abs())
            .fold(0.0, f64::max);
        Self::new(r, b, lambda)
    }

    /// `rhs = log det` of the family's closed-form Hessian, boundary data from its values.
    pub fn manufactured(family: &SolutionFamily, domain: &GridDomain) -> Result<Self, SolverError> {
        if !family.is_smooth() {
            return Err(SolverError::InvalidProblem("manufactured problems need a smooth (eps > 0) family".into()));
        }
        if family.dim() != domain.complex_dim() {
            return Err(FamilyError::DimensionMismatch { expected: family.dim(), got: domain.complex_dim() }.into());
        }
        Self::from_fns(domain, |x| family.rhs(x).ln(), |x| family.value(x))
    }

    pub fn domain(&self) -> &GridDomain {
        self.rhs.domain()
    }

    pub fn rhs(&self) -> &GridField {
        &self.rhs
    }

    pub fn boundary(&self) -> &GridField {
        &self.boundary
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same boundary data with a different right-hand side.
    pub fn with_rhs(&self, rhs: GridField) -> Result<Self, SolverError> {
        let lambda = self.lambda.max(rhs.max_abs());
        Self::new(rhs, self.boundary.clone(), lambda)
    }

    fn impose_boundary(&self, u: &mut [f64]) {
        let d = self.domain();
        u.par_iter_mut().enumerate().for_each(|(idx, v)| {
            if d.is_boundary(idx) {
                *v = self.boundary.values()[idx];
            }
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    /// Target max-norm of `log det CH(u) - rhs`.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Smallest damping factor tried by the line search.
    pub min_step: f64,
    /// Every `LDL*` pivot of an accepted iterate's Hessian must exceed this.
    pub psd_guard: f64,
    /// Fixed relative tolerance for the inner solves; adaptive when absent.
    pub linear_rel_tol: Option<f64>,
    pub linear_max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iters: 30,
            min_step: 2f64.powi(-20),
            psd_guard: 0.0,
            linear_rel_tol: None,
            linear_max_iters: 200,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol_residual > 0.0) || self.max_iters == 0 || !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(SolverError::InvalidProblem(
                "need tol_residual > 0, max_iters >= 1 and 0 < min_step <= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Telemetry of one Newton run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Max-norm residual of the initial guess and of every accepted iterate.
    pub residual_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub multigrid_levels: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: GridField,
    pub report: SolveReport,
}

fn not_psh(domain: &GridDomain, node: usize, pivot: f64) -> SolverError {
    let mut coords = vec![0.0; domain.axes()];
    domain.node_coords(node, &mut coords);
    SolverError::NotPlurisubharmonic { node, coords, pivot }
}

/// Interior: `log det CH(u) - rhs`; boundary: `u - boundary data`.
pub fn residual(u: &GridField, prob: &DirichletProblem) -> Result<GridField, SolverError> {
    let d = prob.domain();
    if u.domain() != d {
        return Err(GridError::DimensionMismatch { expected: d.node_count(), got: u.len() }.into());
    }
    let geo = Geometry::from_domain(d);
    let mut out = vec![0.0; geo.len];
    if let HessianScan::NotPd { node, pivot } = operator::log_det_residual(&geo, u.values(), prob.rhs.values(), 0.0, &mut out) {
        return Err(not_psh(d, node, pivot));
    }
    for (idx, v) in out.iter_mut().enumerate() {
        if d.is_boundary(idx) {
            *v = u.values()[idx] - prob.boundary.values()[idx];
        }
    }
    Ok(GridField::from_raw(d.clone(), out))
}

/// Linearization `v -> tr(CH(u)^{-1} CH(v))` of `log det CH(u)`.
#[derive(Debug, Clone)]
pub struct Linearization {
    domain: GridDomain,
    geo: Geometry,
    coef: Coefficients,
}

impl Linearization {
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    /// `tr(B CH(v))` at interior nodes, unavailable on the boundary.
    pub fn apply(&self, v: &GridField) -> Result<GridField, SolverError> {
        if v.domain() != &self.domain {
            return Err(GridError::DimensionMismatch { expected: self.geo.len, got: v.len() }.into());
        }
        let mut out = vec![0.0; self.geo.len];
        operator::apply(&self.geo, &self.coef, v.values(), &mut out);
        for (idx, o) in out.iter_mut().enumerate() {
            if self.domain.is_boundary(idx) {
                *o = f64::NAN;
            }
        }
        Ok(GridField::from_raw(self.domain.clone(), out))
    }

    /// Coefficient matrix `B = CH(u)^{-1}` at an interior node.
    pub fn coefficient(&self, idx: usize) -> Result<HermitianForm, SolverError> {
        if idx >= self.geo.len || self.domain.is_boundary(idx) {
            return Err(GridError::BoundaryNode(idx).into());
        }
        Ok(self.coef.form(self.geo.n, idx))
    }
}

pub fn assemble_linearization(u: &GridField) -> Result<Linearization, SolverError> {
    let d = u.domain();
    let geo = Geometry::from_domain(d);
    let mut scratch = vec![0.0; geo.len];
    let zeros = vec![0.0; geo.len];
    if let HessianScan::NotPd { node, pivot } = operator::log_det_residual(&geo, u.values(), &zeros, 0.0, &mut scratch) {
        return Err(not_psh(d, node, pivot));
    }
    let mut coef = Coefficients::identity(&geo);
    operator::inverse_hessians(&geo, u.values(), &mut coef);
    Ok(Linearization { domain: d.clone(), geo, coef })
}

/// Solves the linear Dirichlet problem `tr(coef CH(u)) = f`, `u = g` on the boundary.
fn linear_dirichlet(
    geo: &Geometry,
    coef: &Coefficients,
    f: &[f64],
    g: &[f64],
    rel_tol: f64,
) -> Result<Vec<f64>, SolverError> {
    let mut lg = vec![0.0; geo.len];
    operator::apply(geo, coef, g, &mut lg);
    let mut b = vec![0.0; geo.len];
    for &base in &geo.rows {
        for i in base + 1..base + geo.last() - 1 {
            b[i] = f[i] - lg[i];
        }
    }
    drop(lg);
    let mg = Hierarchy::new(geo, coef);
    let mut v = vec![0.0; geo.len];
    let stats = krylov::bicgstab(geo, coef, &mg, &b, &mut v, rel_tol, 500);
    if !stats.converged {
        return Err(SolverError::InvalidProblem(format!(
            "linear Dirichlet solve stalled at relative residual {:e}",
            stats.rel_residual
        )));
    }
    v.par_iter_mut().zip(g.par_iter()).for_each(|(vi, gi)| *vi += gi);
    Ok(v)
}

/// Boundary data extended into the interior by the Poisson problem
/// `tr CH(u) = n exp(rhs / n)`. If that is not plurisubharmonic, multiples
/// of `|z - c|^2` minus its harmonic extension are added, doubling the
/// multiple until the finite-difference Hessians are positive definite.
pub fn default_init(prob: &DirichletProblem) -> Result<GridField, SolverError> {
    let d = prob.domain();
    let geo = Geometry::from_domain(d);
    let n = geo.n as f64;
    let id = Coefficients::identity(&geo);
    let mut g = prob.boundary.values().to_vec();
    for v in g.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    let f: Vec<f64> = prob.rhs.values().iter().map(|r| n * (r / n).exp()).collect();
    let u0 = linear_dirichlet(&geo, &id, &f, &g, 1e-12)?;
    let zeros = vec![0.0; geo.len];
    let mut scratch = vec![0.0; geo.len];
    let first = match operator::log_det_residual(&geo, &u0, &zeros, 0.0, &mut scratch) {
        HessianScan::Ok { .. } => return Ok(GridField::from_raw(d.clone(), u0)),
        HessianScan::NotPd { node, pivot } => (node, pivot),
    };
    let c = d.center().to_vec();
    let quad = sample(d, |x| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum())?;
    let mut qb = quad.values().to_vec();
    for (idx, v) in qb.iter_mut().enumerate() {
        if !d.is_boundary(idx) {
            *v = 0.0;
        }
    }
    let harmonic = linear_dirichlet(&geo, &id, &zeros, &qb, 1e-12)?;
    let bump: Vec<f64> = quad.values().iter().zip(&harmonic).map(|(q, h)| q - h).collect();
    let mut scale = 1.0;
    for _ in 0..40 {
        let trial: Vec<f64> = u0.iter().zip(&bump).map(|(u, b)| u + scale * b).collect();
        if let HessianScan::Ok { .. } = operator::log_det_residual(&geo, &trial, &zeros, 0.0, &mut scratch) {
            return Ok(GridField::from_raw(d.clone(), trial));
        }
        scale *= 2.0;
    }
    Err(not_psh(d, first.0, first.1))
}

/// Cubic interpolation of a solution on the grid with `(p - 1) / 2 + 1`
/// points per axis onto the problem's grid, with the boundary data imposed.
pub fn prolong_solution(coarse: &GridField, prob: &DirichletProblem) -> Result<GridField, SolverError> {
    let fine = prob.domain();
    let cd = coarse.domain();
    let expected: Vec<usize> = fine.points_per_axis().iter().map(|p| (p - 1) / 2 + 1).collect();
    let same_box = cd.center() == fine.center() && cd.half_widths() == fine.half_widths();
    if cd.points_per_axis() != expected.as_slice()
        || !same_box
        || fine.points_per_axis().iter().any(|p| (p - 1) % 2 != 0)
    {
        return Err(SolverError::InvalidProblem("coarse solution is not on the half-resolution grid".into()));
    }
    let mut v = multigrid::prolong(coarse.values(), cd.points_per_axis(), true);
    prob.impose_boundary(&mut v);
    Ok(GridField::from_raw(fine.clone(), v))
}

/// Max over all nodes of `|u - f|`.
pub fn max_error<F: Fn(&[f64]) -> f64 + Sync>(u: &GridField, f: F) -> f64 {
    let d = u.domain();
    let m = d.axes();
    u.values()
        .par_iter()
        .enumerate()
        .map(|(idx, &v)| {
            let mut x = [0.0; 2 * MAX_GRID_DIM];
            d.node_coords(idx, &mut x[..m]);
            (v - f(&x[..m])).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Damped Newton iteration from `init` (boundary data is re-imposed).
pub fn newton_solve(prob: &DirichletProblem, cfg: &NewtonConfig, init: GridField) -> Result<SolveOutcome, SolverError> {
    cfg.validate()?;
    let d = prob.domain().clone();
    if init.domain() != &d {
        return Err(GridError::DimensionMismatch { expected: d.node_count(), got: init.len() }.into());
    }
    let geo = Geometry::from_domain(&d);
    let rhs = prob.rhs.values();
    let mut u = init.into_values();
    prob.impose_boundary(&mut u);
    let mut res = vec![0.0; geo.len];
    let mut rmax = match operator::log_det_residual(&geo, &u, rhs, cfg.psd_guard, &mut res) {
        HessianScan::Ok { max_residual } => max_residual,
        HessianScan::NotPd { node, pivot } => return Err(not_psh(&d, node, pivot)),
    };
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        final_residual: rmax,
        residual_history: vec![rmax],
        step_history: Vec::new(),
        linear_iterations: Vec::new(),
        multigrid_levels: 0,
    };
    let mut coef = Coefficients::identity(&geo);
    let mut trial = vec![0.0; geo.len];
    let mut res_trial = vec![0.0; geo.len];
    let mut delta = vec![0.0; geo.len];
    let finish = |u: Vec<f64>, report: SolveReport| SolveOutcome { solution: GridField::from_raw(d.clone(), u), report };

    while rmax > cfg.tol_residual {
        if report.iterations >= cfg.max_iters {
            return Err(SolverError::NonConverged(Box::new(finish(u, report))));
        }
        operator::inverse_hessians(&geo, &u, &mut coef);
        let mg = Hierarchy::new(&geo, &coef);
        report.multigrid_levels = mg.depth();
        res.par_iter_mut().for_each(|r| *r = -*r);
        let rel_tol = cfg.linear_rel_tol.unwrap_or_else(|| (0.1 * rmax).clamp(1e-12, 1e-2));
        let stats = krylov::bicgstab(&geo, &coef, &mg, &res, &mut delta, rel_tol, cfg.linear_max_iters);
        drop(mg);
        report.linear_iterations.push(stats.iterations);

        let mut t = 1.0;
        let mut last_fail: Option<(usize, f64)> = None;
        let accepted = loop {
            trial.par_iter_mut().zip(u.par_iter().zip(delta.par_iter())).for_each(|(x, (a, b))| *x = a + t * b);
            match operator::log_det_residual(&geo, &trial, rhs, cfg.psd_guard, &mut res_trial) {
                HessianScan::Ok { max_residual } if max_residual <= rmax => break Some(max_residual),
                HessianScan::Ok { .. } => {}
                HessianScan::NotPd { node, pivot } => last_fail = Some((node, pivot)),
            }
            t *= 0.5;
            if t < cfg.min_step {
                break None;
            }
        };
        match accepted {
            Some(r) => {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut res, &mut res_trial);
                rmax = r;
                report.iterations += 1;
                report.step_history.push(t);
                report.residual_history.push(r);
                report.final_residual = r;
            }
            None => {
                return Err(match last_fail {
                    Some((node, pivot)) if report.step_history.is_empty() && stats.converged => {
                        not_psh(&d, node, pivot)
                    }
                    _ => SolverError::NonConverged(Box::new(finish(u, report))),
                });
            }
        }
    }
    report.converged = true;
    Ok(finish(u, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modulus_sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn residual_examples() {
        let d = GridDomain::cube(2, 1.0, 7).unwrap();
        let prob = DirichletProblem::from_fns(&d, |_| 0.0, modulus_sq).unwrap();
        let u = sample(&d, modulus_sq).unwrap();
        assert!(residual(&u, &prob).unwrap().max_abs() < 1e-12);
        let c = 2.5;
        let u = sample(&d, |x| c * modulus_sq(x)).unwrap();
        let r = residual(&u, &prob).unwrap();
        for idx in (0..d.node_count()).filter(|&i| !d.is_boundary(i)) {
            assert!((r.values()[idx] - 2.0 * c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn manufactured_residual_is_second_order() {
        let fam = SolutionFamily::pogorelov2(1.0);
        let mut errs = vec![];
        for pts in [9, 17] {
            let d = GridDomain::cube(2, 1.0, pts).unwrap();
            let prob = DirichletProblem::manufactured(&fam, &d).unwrap();
            let u = sample(&d, |x| fam.value(x)).unwrap();
            errs.push(residual(&u, &prob).unwrap().max_abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn linearization_examples() {
        let d = GridDomain::cube(2, 1.0, 6).unwrap();
        let lin = assemble_linearization(&sample(&d, modulus_sq).unwrap()).unwrap();
        let idx = d.flat_index(&[2, 3, 2, 3]);
        assert!(lin.coefficient(idx).unwrap().max_abs_diff(&HermitianForm::identity(2)) < 1e-12);
        // Hessian diag(2, 1/2) -> coefficients diag(1/2, 2)
        let u = sample(&d, |x| 2.0 * (x[0] * x[0] + x[1] * x[1]) + 0.5 * (x[2] * x[2] + x[3] * x[3])).unwrap();
        let lin = assemble_linearization(&u).unwrap();
        assert!(lin.coefficient(idx).unwrap().max_abs_diff(&HermitianForm::diagonal(&[0.5, 2.0])) < 1e-12);
        let one = lin.apply(&GridField::constant(d.clone(), 1.0)).unwrap();
        assert!(one.max_abs() < 1e-12);
        let tr = lin.apply(&sample(&d, modulus_sq).unwrap()).unwrap();
        assert!((tr.values()[idx] - 2.5).abs() < 1e-12);
        assert!(lin.coefficient(0).is_err());
    }

    #[test]
    fn quantitative_ellipticity() {
        let fam = SolutionFamily::pogorelov2(0.3);
        let d = GridDomain::cube(2, 1.0, 7).unwrap();
        let u = sample(&d, |x| fam.value(x)).unwrap();
        let lin = assemble_linearization(&u).unwrap();
        for idx in (0..d.node_count()).filter(|&i| !d.is_boundary(i)) {
            let b = lin.coefficient(idx).unwrap();
            let lap = crate::grid::complex_hessian_fd(&u, idx).unwrap().trace();
            // B * tr(H) - I is positive semidefinite
            let m = b.scaled(lap).add_scaled_identity(-1.0);
            assert!(m.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn linearization_matches_directional_difference() {
        let fam = SolutionFamily::pogorelov2(1.0);
        let d = GridDomain::cube(2, 1.0, 9).unwrap();
        let prob = DirichletProblem::manufactured(&fam, &d).unwrap();
        let u = sample(&d, |x| fam.value(x)).unwrap();
        let v = sample(&d, |x| (x[0] - 0.3 * x[3]).sin() * (1.0 + x[1] * x[2])).unwrap();
        let t = 1e-5;
        let shifted = GridField::from_values(d.clone(), u.values().iter().zip(v.values()).map(|(a, b)| a + t * b).collect()).unwrap();
        let r0 = residual(&u, &prob).unwrap();
        let r1 = residual(&shifted, &prob).unwrap();
        let lv = assemble_linearization(&u).unwrap().apply(&v).unwrap();
        for idx in (0..d.node_count()).filter(|&i| !d.is_boundary(i)) {
            let fd = (r1.values()[idx] - r0.values()[idx]) / t;
            assert!((fd - lv.values()[idx]).abs() < 1e-3 * (1.0 + lv.values()[idx].abs()), "node {idx}");
        }
    }

    #[test]
    fn recovers_modulus_squared() {
        let d = GridDomain::cube(2, 1.0, 9).unwrap();
        let prob = DirichletProblem::from_fns(&d, |_| 0.0, modulus_sq).unwrap();
        let init = default_init(&prob).unwrap();
        let out = newton_solve(&prob, &NewtonConfig::default(), init).unwrap();
        assert!(out.report.converged && out.report.iterations <= 6, "{:?}", out.report);
        assert!(max_error(&out.solution, modulus_sq) < 1e-8);
        for w in out.report.residual_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn manufactured_solve_small() {
        let fam = SolutionFamily::pogorelov2(1.0);
        let mut errs = vec![];
        let mut prev: Option<GridField> = None;
        for pts in [9, 17] {
            let d = GridDomain::cube(2, 1.0, pts).unwrap();
            let prob = DirichletProblem::manufactured(&fam, &d).unwrap();
            let init = match &prev {
                Some(c) => prolong_solution(c, &prob).unwrap(),
                None => default_init(&prob).unwrap(),
            };
            let out = newton_solve(&prob, &NewtonConfig::default(), init).unwrap();
            assert!(out.report.final_residual <= 1e-9 && out.report.iterations <= 12, "{:?}", out.report);
            errs.push(max_error(&out.solution, |x| fam.value(x)));
            prev = Some(out.solution);
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..=5.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn one_complex_dimension() {
        // det = u_{z zbar}: Poisson problem for |z|^4 / 4 has rhs log |z|^2 ... use exp
        let d = GridDomain::cube(1, 1.0, 33).unwrap();
        let exact = |x: &[f64]| (x[0]).exp() + x[1] * x[1];
        let prob = DirichletProblem::from_fns(&d, |x| (0.25 * (x[0].exp() + 2.0)).ln(), exact).unwrap();
        let out = newton_solve(&prob, &NewtonConfig::default(), default_init(&prob).unwrap()).unwrap();
        assert!(out.report.converged);
        assert!(max_error(&out.solution, exact) < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = GridDomain::cube(1, 1.0, 5).unwrap();
        let prob = DirichletProblem::from_fns(&d, |_| 0.0, modulus_sq).unwrap();
        let bad = sample(&d, |x| -modulus_sq(x)).unwrap();
        assert!(matches!(newton_solve(&prob, &NewtonConfig::default(), bad), Err(SolverError::NotPlurisubharmonic { .. })));
        let cfg = NewtonConfig { max_iters: 0, ..NewtonConfig::default() };
        assert!(newton_solve(&prob, &cfg, sample(&d, modulus_sq).unwrap()).is_err());
        let r = sample(&d, |_| 5.0).unwrap();
        assert!(DirichletProblem::new(r, sample(&d, modulus_sq).unwrap(), 1.0).is_err());
    }
}
