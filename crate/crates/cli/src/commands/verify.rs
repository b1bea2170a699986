use clap::Args;
use cma_core::{identity_sweep, FamilyKind, IdentitySweep, SolutionFamily, SweepOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{positive, Ctx};
use crate::config::{resolve_family, FamilyArg};
use crate::error::{math_failure, CliError};
use crate::overlay;

/// Step used when the family has no analytic Hessian.
const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOpts {
    /// Family kind or JSON descriptor [default: pogorelov2]
    #[arg(long)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Number of random points [default: 1000]
    #[arg(long)]
    pub points: Option<usize>,
    /// Coordinates are uniform in [-radius, radius] [default: 2]
    #[arg(long)]
    pub radius: Option<f64>,
    /// Minimum distance to the singular set [default: 1e-3]
    #[arg(long)]
    pub min_w: Option<f64>,
    /// Use a finite-difference Hessian with this step (forced for theorem-v and degenerate)
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Largest accepted gap [default: 1e-10, or 1e-6 with finite differences]
    #[arg(long)]
    pub tol: Option<f64>,
}

overlay!(VerifyOpts { family, dim, eps, points, radius, min_w, fd_step, tol });

#[derive(Debug, Serialize)]
struct VerifyReport {
    family: SolutionFamily,
    options: SweepOptions,
    tol: f64,
    passed: bool,
    #[serde(flatten)]
    sweep: IdentitySweep,
}

pub fn run(ctx: &Ctx, o: VerifyOpts) -> Result<(), CliError> {
    let family = resolve_family(o.family.as_ref(), o.dim, o.eps, FamilyKind::PogorelovEps2, 0.0)?;
    if family.kind() == FamilyKind::Blocki {
        return Err(CliError::config("the blocki family has no closed-form right-hand side to verify"));
    }
    let defaults = SweepOptions::new(1000, ctx.require_seed()?);
    let fd_step = match (o.fd_step, family.kind().has_eps()) {
        (Some(h), _) => Some(positive("fd_step", h)?),
        (None, true) => None,
        (None, false) => Some(DEFAULT_FD_STEP),
    };
    let options = SweepOptions {
        points: o.points.unwrap_or(defaults.points),
        radius: o.radius.unwrap_or(defaults.radius),
        min_w: o.min_w.unwrap_or(defaults.min_w),
        fd_step,
        ..defaults
    };
    let tol = positive("tol", o.tol.unwrap_or(if fd_step.is_some() { 1e-6 } else { 1e-10 }))?;
    let sweep = identity_sweep(&family, &options).map_err(CliError::config)?;
    let passed = sweep.max_gap < tol;
    let report = VerifyReport { family, options, tol, passed, sweep };
    let path = ctx.out.write_json("verify.json", &report)?;
    println!(
        "verify: max gap {:.3e} over {} points (tol {tol:e}) -> {}",
        report.sweep.max_gap,
        options.points,
        path.display()
    );
    if !passed {
        return Err(math_failure(
            "verify",
            "det(u_{i jbar}) = F at every sampled point",
            json!({ "max_gap": report.sweep.max_gap, "tol": tol, "worst_point": report.sweep.worst_point }),
        ));
    }
    Ok(())
}
