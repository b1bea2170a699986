use clap::Args;
use cma_core::{ComplexPoint, FamilyKind, HermitianForm, PsdReport, SolutionFamily};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{positive, Ctx};
use crate::config::{resolve_family, FamilyArg};
use crate::error::{math_failure, CliError};
use crate::overlay;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianOpts {
    /// Family kind or JSON descriptor [default: pogorelov2]
    #[arg(long)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Interleaved real coordinates x1,y1,x2,y2,... [default: 0.5 everywhere]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Finite-difference step [default: 1e-4]
    #[arg(long)]
    pub h: Option<f64>,
    /// Eigenvalue tolerance of the plurisubharmonicity check [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
}

overlay!(HessianOpts { family, dim, eps, point, h, tol });

#[derive(Debug, Serialize)]
struct HessianReport {
    family: SolutionFamily,
    point: Vec<f64>,
    h: f64,
    fd: HermitianForm,
    det_fd: f64,
    analytic: Option<HermitianForm>,
    det_analytic: Option<f64>,
    max_abs_diff: Option<f64>,
    rhs: Option<f64>,
    psd: PsdReport,
}

pub fn run(ctx: &Ctx, o: HessianOpts) -> Result<(), CliError> {
    let family = resolve_family(o.family.as_ref(), o.dim, o.eps, FamilyKind::PogorelovEps2, 0.0)?;
    let coords = o.point.unwrap_or_else(|| vec![0.5; 2 * family.dim()]);
    let point = ComplexPoint::new(coords).map_err(CliError::config)?;
    if point.dim() != family.dim() {
        return Err(CliError::config(format!("point has complex dimension {}, family {}", point.dim(), family.dim())));
    }
    let on_singular_set = family.singular_coords().iter().all(|&k| point.z(k).norm_sqr() == 0.0);
    if !family.is_smooth() && on_singular_set {
        return Err(CliError::config("the point lies on the singular set of the family"));
    }
    let h = positive("h", o.h.unwrap_or(1e-4))?;
    let tol = positive("tol", o.tol.unwrap_or(1e-8))?;
    let fd = family.fd_hessian(&point, h);
    let analytic = family.eval_analytic_hessian(&point).ok();
    let psd = fd.psd_report(tol);
    let report = HessianReport {
        family,
        point: point.coords().to_vec(),
        h,
        det_fd: fd.det(),
        det_analytic: analytic.as_ref().map(HermitianForm::det),
        max_abs_diff: analytic.as_ref().map(|a| a.max_abs_diff(&fd)),
        rhs: family.eval_rhs(&point).ok(),
        analytic,
        fd,
        psd,
    };
    let path = ctx.out.write_json("hessian.json", &report)?;
    println!("hessian: det {:.6e}, min eigenvalue {:.6e} -> {}", report.det_fd, psd.min_eigenvalue, path.display());
    if !psd.is_psd {
        return Err(math_failure(
            "hessian",
            "complex Hessian is positive semidefinite",
            json!({ "min_eigenvalue": psd.min_eigenvalue, "tol": tol }),
        ));
    }
    Ok(())
}
