use clap::Args;
use cma_core::viscosity::{
    cone_coefficient, search_touch_above, singular_base_points, touch_below_sweep, TouchAboveReport, TouchBelowSweep,
    MIN_TOUCH_SAMPLES,
};
use cma_core::{FamilyKind, SolutionFamily};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{positive, Ctx};
use crate::config::{resolve_family, FamilyArg};
use crate::error::{math_failure, CliError};
use crate::overlay;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityOpts {
    /// Family kind or JSON descriptor; the eps = 0 limit is tested [default: pogorelov2]
    #[arg(long)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of base points on the singular set [default: 5]
    #[arg(long)]
    pub base_points: Option<usize>,
    /// Upper jets tried per base point [default: 1000]
    #[arg(long)]
    pub attempts: Option<usize>,
    /// Lower jet candidates per base point [default: 1000]
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Ball samples per lower candidate [default: 10000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Radius of the test ball [default: 0.1]
    #[arg(long)]
    pub radius: Option<f64>,
}

overlay!(ViscosityOpts { family, dim, base_points, attempts, candidates, samples, radius });

#[derive(Debug, Serialize)]
struct PointResult {
    point: Vec<f64>,
    cone_coefficient: f64,
    above: TouchAboveReport,
    below: TouchBelowSweep,
}

#[derive(Debug, Serialize)]
struct ViscositySummary {
    family: SolutionFamily,
    radius: f64,
    samples: usize,
    points: Vec<PointResult>,
}

pub fn run(ctx: &Ctx, o: ViscosityOpts) -> Result<(), CliError> {
    let family = resolve_family(o.family.as_ref(), o.dim, None, FamilyKind::PogorelovEps2, 0.0)?.limit();
    let seed = ctx.require_seed()?;
    let radius = positive("radius", o.radius.unwrap_or(0.1))?;
    let samples = o.samples.unwrap_or(MIN_TOUCH_SAMPLES);
    let (attempts, candidates) = (o.attempts.unwrap_or(1000), o.candidates.unwrap_or(1000));
    let mut points = Vec::new();
    for (j, p0) in singular_base_points(&family, o.base_points.unwrap_or(5)).into_iter().enumerate() {
        let s = seed.wrapping_add(2 * j as u64);
        points.push(PointResult {
            cone_coefficient: cone_coefficient(&family, &p0).map_err(CliError::config)?,
            above: search_touch_above(&family, &p0, radius, attempts, s).map_err(CliError::config)?,
            below: touch_below_sweep(&family, &p0, radius, candidates, samples, s.wrapping_add(1))
                .map_err(CliError::config)?,
            point: p0.coords().to_vec(),
        });
    }
    let summary = ViscositySummary { family, radius, samples, points };
    let path = ctx.out.write_json("viscosity.json", &summary)?;
    let witnessed: usize = summary.points.iter().map(|p| p.above.witnessed).sum();
    let touching: usize = summary.points.iter().map(|p| p.below.touching).sum();
    println!(
        "viscosity: {witnessed}/{} upper jets refuted, {touching} lower jets touch -> {}",
        attempts * summary.points.len(),
        path.display()
    );
    if let Some(p) = summary.points.iter().find(|p| p.above.found) {
        return Err(math_failure("viscosity", "no quadratic jet touches from above", json!({ "point": p })));
    }
    if let Some(p) = summary.points.iter().find(|p| p.below.verdict_failures > 0) {
        return Err(math_failure("viscosity", "G >= 0 for every jet touching from below", json!({ "point": p })));
    }
    Ok(())
}
