use clap::Args;
use cma_core::solver::{default_init, max_error, newton_solve, prolong_solution};
use cma_core::{DirichletProblem, FamilyKind, GridDomain, NewtonConfig, SolutionFamily, SolveOutcome, SolveReport, SolverError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{positive, Ctx};
use crate::config::{resolve_family, FamilyArg};
use crate::error::{math_failure, CliError};
use crate::overlay;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOpts {
    /// Family whose closed form manufactures the problem [default: pogorelov2]
    #[arg(long)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Must be positive [default: 1]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Points per axis [default: 17]
    #[arg(long)]
    pub points: Option<usize>,
    /// Box half-width [default: 1]
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Solve on the half-resolution grid first and start from its interpolant [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub nested: Option<bool>,
    /// Also write the solution field as solution.json [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub write_solution: Option<bool>,
    /// Max-norm residual target [default: 1e-9]
    #[arg(long)]
    pub tol_residual: Option<f64>,
    /// Newton iteration cap [default: 30]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Full Newton settings (config file only)
    #[arg(skip)]
    pub newton: Option<NewtonConfig>,
}

overlay!(SolveOpts { family, dim, eps, points, half_width, nested, write_solution, tol_residual, max_iters, newton });

#[derive(Debug, Serialize)]
struct SolveSummary {
    family: SolutionFamily,
    points: usize,
    half_width: f64,
    newton: NewtonConfig,
    coarse: Option<SolveReport>,
    report: SolveReport,
    max_error: f64,
}

fn solve(prob: &DirichletProblem, cfg: &NewtonConfig, init: cma_core::GridField) -> Result<SolveOutcome, CliError> {
    match newton_solve(prob, cfg, init) {
        Ok(out) => Ok(out),
        Err(SolverError::NonConverged(out)) => Ok(*out),
        Err(SolverError::NotPlurisubharmonic { node, coords, pivot }) => Err(math_failure(
            "solve",
            "Newton iterates stay plurisubharmonic",
            json!({ "node": node, "coords": coords, "pivot": pivot }),
        )),
        Err(e) => Err(CliError::config(e)),
    }
}

pub fn run(ctx: &Ctx, o: SolveOpts) -> Result<(), CliError> {
    let family = resolve_family(o.family.as_ref(), o.dim, o.eps, FamilyKind::PogorelovEps2, 1.0)?;
    let points = o.points.unwrap_or(17);
    let half_width = positive("half_width", o.half_width.unwrap_or(1.0))?;
    let mut cfg = o.newton.unwrap_or_default();
    if let Some(t) = o.tol_residual {
        cfg.tol_residual = t;
    }
    if let Some(k) = o.max_iters {
        cfg.max_iters = k;
    }
    cfg.validate().map_err(CliError::config)?;
    let domain = GridDomain::cube(family.dim(), half_width, points).map_err(CliError::config)?;
    let prob = DirichletProblem::manufactured(&family, &domain).map_err(CliError::config)?;
    let (coarse, init) = if o.nested.unwrap_or(false) {
        if points < 9 || (points - 1) % 2 != 0 {
            return Err(CliError::config("nested solves need an odd point count of at least 9"));
        }
        let cd = GridDomain::cube(family.dim(), half_width, (points - 1) / 2 + 1).map_err(CliError::config)?;
        let cprob = DirichletProblem::manufactured(&family, &cd).map_err(CliError::config)?;
        let cinit = default_init(&cprob).map_err(CliError::config)?;
        let cout = solve(&cprob, &cfg, cinit)?;
        let init = prolong_solution(&cout.solution, &prob).map_err(CliError::config)?;
        (Some(cout.report), init)
    } else {
        (None, default_init(&prob).map_err(CliError::config)?)
    };
    let out = solve(&prob, &cfg, init)?;
    let summary = SolveSummary {
        family,
        points,
        half_width,
        newton: cfg.clone(),
        coarse,
        max_error: max_error(&out.solution, |x| family.value(x)),
        report: out.report,
    };
    let path = ctx.out.write_json("solve.json", &summary)?;
    if o.write_solution.unwrap_or(false) {
        let text = out.solution.to_json_string().map_err(CliError::config)?;
        ctx.out.write("solution.json", text.as_bytes())?;
    }
    println!(
        "solve: {} Newton iterations, residual {:.3e}, max error {:.3e} -> {}",
        summary.report.iterations,
        summary.report.final_residual,
        summary.max_error,
        path.display()
    );
    if !summary.report.converged {
        return Err(math_failure(
            "solve",
            "Newton residual reaches tol_residual",
            json!({ "final_residual": summary.report.final_residual, "tol_residual": cfg.tol_residual,
                    "iterations": summary.report.iterations }),
        ));
    }
    Ok(())
}
