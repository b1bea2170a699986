//! Exponent bookkeeping for the Moser iteration and the pointwise
//! third-order sub-sum inequality.
//!
//! With `p_k = a (n/(n-1))^k + n(n-1)/2` and `b_k = (2 p_k + n) / (2 p_k)`
//! the product `b_1 ... b_k` telescopes to `(n/(n-1))^k p_0 / p_k`, which
//! increases to `p_0 / a`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest iteration index the tables are computed to.
pub const K_CAP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoserError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("k = {k} exceeds the cap {cap}")]
    IndexTooLarge { k: usize, cap: usize },
    #[error("{quantity} overflows f64 at k = {k}")]
    Overflow { quantity: &'static str, k: usize },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub n: usize,
    pub a: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    /// Multiplier standing in for the unspecified universal constant.
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
}

impl MoserParams {
    pub fn new(n: usize, a: f64) -> Self {
        Self { n, a, big_r: 1.0, r: 0.5, lambda: 1.0, c: 1.0 }
    }

    pub fn with_radii(mut self, big_r: f64, r: f64) -> Self {
        self.big_r = big_r;
        self.r = r;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<(), MoserError> {
        let bad = |msg: String| Err(MoserError::InvalidParams(msg));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad(format!("a must be positive and finite, got {}", self.a));
        }
        if !(0.0 < self.r && self.r < self.big_r && self.big_r <= 1.0) {
            return bad(format!("need 0 < r < R <= 1, got r = {}, R = {}", self.r, self.big_r));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("Lambda must be positive, got {}", self.lambda));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        Ok(())
    }

    fn ratio(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 1.0)
    }

    fn offset(&self) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0) / 2.0
    }

    pub fn p0(&self) -> f64 {
        self.a + self.offset()
    }
}

fn check_k(k: usize) -> Result<(), MoserError> {
    if k > K_CAP {
        return Err(MoserError::IndexTooLarge { k, cap: K_CAP });
    }
    Ok(())
}

/// `p_k = a (n/(n-1))^k + n(n-1)/2`.
pub fn p_sequence(params: &MoserParams, k: usize) -> Result<f64, MoserError> {
    params.validate()?;
    check_k(k)?;
    let p = params.a * params.ratio().powi(k as i32) + params.offset();
    if !p.is_finite() {
        return Err(MoserError::Overflow { quantity: "p_k", k });
    }
    Ok(p)
}

/// `b_k = (2 p_k + n) / (2 p_k)`.
pub fn b_term(params: &MoserParams, k: usize) -> Result<f64, MoserError> {
    let p = p_sequence(params, k)?;
    Ok((2.0 * p + params.n as f64) / (2.0 * p))
}

/// `P_0 = 2 n p_0 / (n-1)`; also equal to `n^2 + 2 n a / (n-1)`.
pub fn critical_exponent(params: &MoserParams) -> Result<f64, MoserError> {
    params.validate()?;
    let n = params.n as f64;
    Ok(2.0 * n * params.p0() / (n - 1.0))
}

/// Second closed form of the critical exponent, kept for cross-checking.
pub fn critical_exponent_expanded(params: &MoserParams) -> Result<f64, MoserError> {
    params.validate()?;
    let n = params.n as f64;
    Ok(n * n + 2.0 * n * params.a / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BProduct {
    /// `b_1 ... b_k`, multiplied out term by term.
    pub value: f64,
    /// `p_0 / a`, the limit as `k -> infinity`.
    pub limit: f64,
    /// First `k` with `|b_1 ... b_k - p_0/a| < 1e-6`, if reached by [`K_CAP`].
    pub k_star: Option<usize>,
}

/// `b_1 ... b_k` together with its limit and the index where it is within 1e-6 of it.
pub fn b_product(params: &MoserParams, k: usize) -> Result<BProduct, MoserError> {
    params.validate()?;
    if k == 0 {
        return Err(MoserError::InvalidParams("b_product needs k >= 1".into()));
    }
    check_k(k)?;
    let limit = params.p0() / params.a;
    let mut prod = 1.0;
    let mut value = f64::NAN;
    let mut k_star = None;
    for j in 1..=K_CAP {
        prod *= b_term(params, j)?;
        if j == k {
            value = prod;
        }
        if k_star.is_none() && (prod - limit).abs() < 1e-6 {
            k_star = Some(j);
        }
        if j >= k && k_star.is_some() {
            break;
        }
    }
    Ok(BProduct { value, limit, k_star })
}

/// `a_k = (C 2^k p_k^{3/2} / (R - r))^{1/p_k}`.
pub fn a_coefficient(params: &MoserParams, k: usize) -> Result<f64, MoserError> {
    Ok(log_a_coefficient(params, k)?.exp())
}

fn log_a_coefficient(params: &MoserParams, k: usize) -> Result<f64, MoserError> {
    let p = p_sequence(params, k)?;
    let log_base =
        params.c.ln() + k as f64 * std::f64::consts::LN_2 + 1.5 * p.ln() - (params.big_r - params.r).ln();
    Ok(log_base / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserRow {
    pub k: usize,
    pub p_k: f64,
    pub b_k: f64,
    pub b_product: f64,
    pub a_k: f64,
    pub log_a_sum: f64,
}

/// Rows `k = 1 ..= k_max`.
pub fn moser_table(params: &MoserParams, k_max: usize) -> Result<Vec<MoserRow>, MoserError> {
    params.validate()?;
    check_k(k_max)?;
    let mut rows = Vec::with_capacity(k_max);
    let mut prod = 1.0;
    let mut log_sum = 0.0;
    for k in 1..=k_max {
        let p_k = p_sequence(params, k)?;
        let b_k = b_term(params, k)?;
        let log_a = log_a_coefficient(params, k)?;
        prod *= b_k;
        log_sum += log_a;
        rows.push(MoserRow { k, p_k, b_k, b_product: prod, a_k: log_a.exp(), log_a_sum: log_sum });
    }
    Ok(rows)
}

/// CSV rendering of [`moser_table`] with a header line.
pub fn moser_table_csv(rows: &[MoserRow]) -> String {
    let mut out = String::from("k,p_k,b_k,b_product,a_k,log_a_sum\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.k, r.p_k, r.b_k, r.b_product, r.a_k, r.log_a_sum
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSeries {
    /// `sum_{k <= K_CAP} log a_k`.
    pub sum: f64,
    /// First `k` after which every later partial sum stays within `tol` of the final one.
    pub cauchy_index: Option<usize>,
}

/// Partial sums of `log a_k` up to [`K_CAP`] and where they settle to `tol`.
pub fn log_a_series(params: &MoserParams, tol: f64) -> Result<LogSeries, MoserError> {
    let rows = moser_table(params, K_CAP)?;
    let sum = rows.last().map_or(0.0, |r| r.log_a_sum);
    let tail: f64 = {
        // geometric tail estimate from the last two increments
        let x = log_a_coefficient(params, K_CAP - 1)?;
        let y = log_a_coefficient(params, K_CAP)?;
        if y >= 0.0 && y < x {
            y * (y / x) / (1.0 - y / x)
        } else {
            f64::INFINITY
        }
    };
    let cauchy_index = if tail < tol {
        rows.iter().position(|r| (sum - r.log_a_sum).abs() + tail < tol).map(|i| rows[i].k)
    } else {
        None
    };
    Ok(LogSeries { sum, cauchy_index })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainWeight {
    /// `log(a_K a_{K-1}^{b_K} a_{K-2}^{b_{K-1} b_K} ...)`.
    pub log_weight: f64,
    /// `(p_0/a) * sum_{j <= K} max(log a_j, 0)`.
    pub log_bound: f64,
}

/// Log of the iterated weight collected after `k` Moser steps and its a-priori bound.
pub fn chain_weight(params: &MoserParams, k: usize) -> Result<ChainWeight, MoserError> {
    let rows = moser_table(params, k)?;
    let mut log_weight = 0.0;
    // Horner form: W_j = a_j * W_{j-1}^{b_j}
    for row in &rows {
        log_weight = row.b_k * log_weight + row.a_k.ln();
    }
    let limit = params.p0() / params.a;
    let log_bound = limit * rows.iter().map(|r| r.a_k.ln().max(0.0)).sum::<f64>();
    Ok(ChainWeight { log_weight, log_bound })
}

/// Diagonal Hessian eigenvalues `d` and third derivatives `T[a][b][k]`
/// (row-major, `n^3` entries) symmetric in `(a, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderSample {
    n: usize,
    d: Vec<f64>,
    t: Vec<Complex64>,
}

impl ThirdOrderSample {
    pub fn new(d: Vec<f64>, t: Vec<Complex64>) -> Result<Self, MoserError> {
        let n = d.len();
        if n == 0 || t.len() != n * n * n {
            return Err(MoserError::InvalidSample(format!("need n^3 = {} tensor entries, got {}", n * n * n, t.len())));
        }
        if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(MoserError::InvalidSample("diagonal entries must be positive".into()));
        }
        let s = Self { n, d, t };
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    if s.get(a, b, k) != s.get(k, b, a) {
                        return Err(MoserError::InvalidSample(format!("T[{a}][{b}][{k}] != T[{k}][{b}][{a}]")));
                    }
                }
            }
        }
        Ok(s)
    }

    /// Tensor with every entry zero except the given ones (and their `(a, k)` mirrors).
    pub fn sparse(d: Vec<f64>, entries: &[((usize, usize, usize), Complex64)]) -> Result<Self, MoserError> {
        let n = d.len();
        let mut t = vec![Complex64::new(0.0, 0.0); n * n * n];
        for &((a, b, k), v) in entries {
            if a >= n || b >= n || k >= n {
                return Err(MoserError::InvalidSample(format!("index ({a}, {b}, {k}) out of range")));
            }
            t[(a * n + b) * n + k] = v;
            t[(k * n + b) * n + a] = v;
        }
        Self::new(d, t)
    }

    /// Complex-Gaussian tensor symmetrized in `(a, k)`, `d` log-uniform on `(1e-3, 1e3)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let d: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let mut t = vec![Complex64::new(0.0, 0.0); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for k in a..n {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let v = Complex64::new(re, im);
                    t[(a * n + b) * n + k] = v;
                    t[(k * n + b) * n + a] = v;
                }
            }
        }
        Self { n, d, t }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn get(&self, a: usize, b: usize, k: usize) -> Complex64 {
        self.t[(a * self.n + b) * self.n + k]
    }

    /// Multiplies every `d_i` by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self { n: self.n, d: self.d.iter().map(|v| v * c).collect(), t: self.t.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsumCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `lhs = sum_{i,k} |T[i][k][k]|^2/(d_i d_k)` against the full sum
/// `rhs = sum_{a,b,k} |T[b][a][k]|^2/(d_a d_b)`.
pub fn third_order_subsum_check(s: &ThirdOrderSample) -> SubsumCheck {
    let n = s.n;
    let mut lhs = 0.0;
    for i in 0..n {
        for k in 0..n {
            lhs += s.get(i, k, k).norm_sqr() / (s.d[i] * s.d[k]);
        }
    }
    let mut rhs = 0.0;
    for a in 0..n {
        for b in 0..n {
            let w = 1.0 / (s.d[a] * s.d[b]);
            for k in 0..n {
                rhs += s.get(b, a, k).norm_sqr() * w;
            }
        }
    }
    SubsumCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 * rhs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsumSweep {
    pub samples: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`.
    pub max_ratio: f64,
}

const SWEEP_CHUNK: usize = 1024;

/// Runs [`third_order_subsum_check`] on `count` random samples. Chunk `c`
/// draws from stream `c` of a ChaCha generator keyed by `seed`, so the
/// outcome does not depend on the thread count.
pub fn random_subsum_sweep(n: usize, count: usize, seed: u64) -> SubsumSweep {
    let chunks = count.div_ceil(SWEEP_CHUNK);
    let parts: Vec<(usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = SWEEP_CHUNK.min(count - c * SWEEP_CHUNK);
            let mut violations = 0;
            let mut max_ratio: f64 = 0.0;
            for _ in 0..len {
                let r = third_order_subsum_check(&ThirdOrderSample::random(n, &mut rng));
                if !r.holds {
                    violations += 1;
                }
                if r.rhs > 0.0 {
                    max_ratio = max_ratio.max(r.lhs / r.rhs);
                }
            }
            (violations, max_ratio)
        })
        .collect();
    SubsumSweep {
        samples: count,
        violations: parts.iter().map(|p| p.0).sum(),
        max_ratio: parts.iter().map(|p| p.1).fold(0.0, f64::max),
    }
}
