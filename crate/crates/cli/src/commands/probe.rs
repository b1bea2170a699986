use clap::Args;
use cma_core::regularity::{ProbeConfig, W2pScanConfig};
use cma_core::{FamilyKind, RegularityReport};
use serde::Deserialize;
use serde_json::json;

use super::Ctx;
use crate::config::{resolve_family, FamilyArg};
use crate::error::{math_failure, CliError};
use crate::overlay;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOpts {
    /// Family kind or JSON descriptor; probes use its eps = 0 limit [default: pogorelov2]
    #[arg(long)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Scan exponents, strictly increasing [default: depends on the family]
    #[arg(long, value_delimiter = ',')]
    pub p_list: Option<Vec<f64>>,
    /// Strictly decreasing eps values [default: 4^-k, k = 0..6]
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Number of scan levels [default: 3]
    #[arg(long)]
    pub refinements: Option<usize>,
    /// Singular-axis points on the coarsest scan level [default: depends on the family]
    #[arg(long)]
    pub base_points: Option<usize>,
    /// Full probe settings (config file only)
    #[arg(skip)]
    pub probe: Option<ProbeConfig>,
}

overlay!(ProbeOpts { family, dim, p_list, eps_list, refinements, base_points, probe });

pub fn run(ctx: &Ctx, o: ProbeOpts) -> Result<(), CliError> {
    let family = resolve_family(o.family.as_ref(), o.dim, None, FamilyKind::PogorelovEps2, 0.0)?;
    let mut cfg = o.probe.unwrap_or_default();
    if let Some(p) = o.p_list {
        cfg.p_list = p;
    }
    if let Some(e) = o.eps_list {
        cfg.eps_list = e;
    }
    if o.refinements.is_some() || o.base_points.is_some() {
        let base = cfg.scan.take().unwrap_or_else(|| W2pScanConfig::for_family(&family));
        cfg.scan = Some(W2pScanConfig {
            refinements: o.refinements.unwrap_or(base.refinements),
            base_points: o.base_points.unwrap_or(base.base_points),
            ..base
        });
    }
    let report = RegularityReport::run(&family, &cfg).map_err(CliError::config)?;
    let json_path = ctx.out.write_json("probe.json", &report)?;
    ctx.out.write("probe.csv", report.to_csv_string().as_bytes())?;
    let verdicts: Vec<String> = report.w2p_scan.entries.iter().map(|e| format!("p={}: {}", e.p, e.verdict)).collect();
    println!(
        "probe: alpha {:.4} +- {:.1e}; {} -> {}",
        report.fitted_alpha.alpha,
        report.fitted_alpha.stderr,
        verdicts.join(", "),
        json_path.display()
    );
    if !report.w2p_scan.is_monotone() {
        return Err(math_failure("probe", "scan verdicts are monotone in p", json!({ "scan": report.w2p_scan })));
    }
    if let Some(e) = report.convergence.iter().find(|e| e.sup_u > e.u_bound) {
        return Err(math_failure("probe", "sup|u^eps - u^0| stays below its closed-form bound", json!({ "entry": e })));
    }
    Ok(())
}
