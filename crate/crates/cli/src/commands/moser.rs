use clap::Args;
use cma_core::moser::{
    b_product, chain_weight, critical_exponent, log_a_series, moser_table, moser_table_csv, p_sequence, BProduct,
    ChainWeight, LogSeries,
};
use cma_core::MoserParams;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Ctx;
use crate::error::{math_failure, CliError};
use crate::overlay;

/// Relative tolerance on `2 p_{k+1} + n = 2 n p_k / (n - 1)`.
const RECURRENCE_TOL: f64 = 1e-12;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoserOpts {
    /// Complex dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Starting exponent [default: 1]
    #[arg(long)]
    pub a: Option<f64>,
    /// Last row of the table [default: 60]
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Outer radius [default: 1]
    #[arg(long)]
    pub big_r: Option<f64>,
    /// Inner radius [default: 0.5]
    #[arg(long)]
    pub r: Option<f64>,
    /// Gradient bound of the right-hand side [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Constant multiplier in a_k [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// Cauchy tolerance for the log a_k series [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
}

overlay!(MoserOpts { n, a, kmax, big_r, r, lambda, c, tol });

#[derive(Debug, Serialize)]
struct MoserSummary {
    params: MoserParams,
    kmax: usize,
    p0: f64,
    critical_exponent: f64,
    b_product: BProduct,
    log_series: LogSeries,
    chain_weight: ChainWeight,
    recurrence_max_rel_error: f64,
}

pub fn run(ctx: &Ctx, o: MoserOpts) -> Result<(), CliError> {
    let defaults = MoserParams::new(2, 1.0);
    let params = MoserParams {
        n: o.n.unwrap_or(defaults.n),
        a: o.a.unwrap_or(defaults.a),
        big_r: o.big_r.unwrap_or(defaults.big_r),
        r: o.r.unwrap_or(defaults.r),
        lambda: o.lambda.unwrap_or(defaults.lambda),
        c: o.c.unwrap_or(defaults.c),
    };
    params.validate().map_err(CliError::config)?;
    let kmax = o.kmax.unwrap_or(60);
    let tol = o.tol.unwrap_or(1e-9);
    let rows = moser_table(&params, kmax).map_err(CliError::config)?;
    let n = params.n as f64;
    let mut recurrence = 0.0f64;
    for k in 0..kmax {
        let p = p_sequence(&params, k).map_err(CliError::config)?;
        let next = p_sequence(&params, k + 1).map_err(CliError::config)?;
        let rhs = 2.0 * n * p / (n - 1.0);
        recurrence = recurrence.max(((2.0 * next + n) - rhs).abs() / rhs);
    }
    let summary = MoserSummary {
        params,
        kmax,
        p0: params.p0(),
        critical_exponent: critical_exponent(&params).map_err(CliError::config)?,
        b_product: b_product(&params, kmax.max(1)).map_err(CliError::config)?,
        log_series: log_a_series(&params, tol).map_err(CliError::config)?,
        chain_weight: chain_weight(&params, kmax).map_err(CliError::config)?,
        recurrence_max_rel_error: recurrence,
    };
    let csv = ctx.out.write("moser.csv", moser_table_csv(&rows).as_bytes())?;
    ctx.out.write_json("moser.json", &summary)?;
    println!(
        "moser: p0 = {}, prod b_k = {:.12} (limit {}) -> {}",
        summary.p0,
        summary.b_product.value,
        summary.b_product.limit,
        csv.display()
    );
    if recurrence > RECURRENCE_TOL {
        return Err(math_failure(
            "moser",
            "2 p_{k+1} + n = 2 n p_k / (n - 1)",
            json!({ "max_rel_error": recurrence, "tol": RECURRENCE_TOL }),
        ));
    }
    if summary.b_product.k_star.is_none() {
        return Err(math_failure("moser", "prod b_k converges to p0 / a", json!({ "b_product": summary.b_product })));
    }
    if summary.log_series.cauchy_index.is_none() {
        return Err(math_failure("moser", "sum log a_k is Cauchy", json!({ "log_series": summary.log_series, "tol": tol })));
    }
    Ok(())
}
