//! Empirical regularity diagnostics for the solution families: Hölder
//! exponents from ball oscillations, `W^{2,p}` (or Laplacian `L^p`) refinement
//! scans across the integrability threshold, the blow-up of the Lipschitz
//! constant of the right-hand side, and the `eps -> 0` convergence modes.
//!
//! Everything here is deterministic: shell directions come from a fixed seed
//! and all reductions use fixed-size blocks.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{FamilyError, FamilyKind, SolutionFamily};
use crate::grid::{lp_norm, sample, stencil, ComplexPoint, GridDomain, GridError, REDUCTION_BLOCK};

/// Directions sampled on every sphere shell (the coordinate axes are added on top).
pub const SHELL_POINTS: usize = 1024;
/// Slope at or above which a scan entry is declared bounded.
pub const BOUNDED_SLOPE: f64 = -0.05;
/// Slope at or below which a scan entry is declared divergent.
pub const DIVERGENT_SLOPE: f64 = -0.2;

const SHELL_SEED: u64 = 0x05ee_d0f5_be11;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("oscillation {osc:e} at radius {radius:e} is too small to fit")]
    DegenerateFit { radius: f64, osc: f64 },
    #[error("invalid radii: {0}")]
    InvalidRadii(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Least-squares line through `(x_i, y_i)`: returns `(slope, intercept, slope stderr)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// `count` radii from `lo` to `hi`, equally spaced in `log`.
pub fn geometric_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo, "need 0 < lo < hi and count >= 2");
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub alpha: f64,
    pub stderr: f64,
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
}

fn check_radii(radii: &[f64]) -> Result<(), RegularityError> {
    if radii.len() < 6 {
        return Err(RegularityError::InvalidRadii(format!("need at least 6 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(RegularityError::InvalidRadii("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RegularityError::InvalidRadii("radii must be strictly increasing".into()));
    }
    if radii[radii.len() - 1] / radii[0] < 100.0 * (1.0 - 1e-12) {
        return Err(RegularityError::InvalidRadii("radii must span at least two decades".into()));
    }
    Ok(())
}

/// Unit directions shared by every shell: the `±e_a` axes followed by
/// [`SHELL_POINTS`] normalized Gaussian vectors.
fn shell_directions(m: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * m + SHELL_POINTS);
    for a in 0..m {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; m];
            d[a] = s;
            dirs.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SHELL_SEED);
    while dirs.len() < 2 * m + SHELL_POINTS {
        let d: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(d.into_iter().map(|v| v / norm).collect());
        }
    }
    dirs
}

/// Hölder exponent of `f` at `center`: slope of `log osc(f, B_rho)` against
/// `log rho`, with the oscillation taken over the center and the sphere
/// shell of radius `rho`.
pub fn holder_fit_fn<F>(f: F, center: &[f64], radii: &[f64]) -> Result<HolderFit, RegularityError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_radii(radii)?;
    if center.is_empty() || center.len() % 2 != 0 {
        return Err(RegularityError::InvalidArgument(format!("center needs an even number of reals, got {}", center.len())));
    }
    let dirs = shell_directions(center.len());
    let f0 = f(center);
    let oscillations: Vec<f64> = radii
        .par_iter()
        .map(|&rho| {
            let mut buf = vec![0.0; center.len()];
            let (mut lo, mut hi) = (f0, f0);
            for d in &dirs {
                for (b, (c, v)) in buf.iter_mut().zip(center.iter().zip(d)) {
                    *b = c + rho * v;
                }
                let v = f(&buf);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        })
        .collect();
    for (&radius, &osc) in radii.iter().zip(&oscillations) {
        if !(osc.is_finite() && osc > f64::MIN_POSITIVE) {
            return Err(RegularityError::DegenerateFit { radius, osc });
        }
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = oscillations.iter().map(|o| o.ln()).collect();
    let (alpha, _, stderr) = linear_fit(&x, &y);
    Ok(HolderFit { alpha, stderr, radii: radii.to_vec(), oscillations })
}

/// [`holder_fit_fn`] for the `eps = 0` member of `family`; `center` must lie
/// on its singular set.
pub fn holder_fit(family: &SolutionFamily, center: &ComplexPoint, radii: &[f64]) -> Result<HolderFit, RegularityError> {
    if center.dim() != family.dim() {
        return Err(FamilyError::DimensionMismatch { expected: family.dim(), got: center.dim() }.into());
    }
    let off = family.singular_coords().iter().any(|&k| center.z(k) != Complex64::new(0.0, 0.0));
    if off {
        return Err(RegularityError::InvalidArgument("center is not on the singular set".into()));
    }
    let limit = family.limit();
    holder_fit_fn(|x| limit.value(x), center.coords(), radii)
}

/// What a refinement scan integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMeasure {
    /// Frobenius norm of the full real Hessian (`W^{2,p}` seminorm).
    Hessian,
    /// Absolute value of the complex Laplacian.
    Laplacian,
}

/// Grid layout of a refinement scan. Only the axes normal to the singular
/// set are refined; the remaining axes keep `regular_points` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2pScanConfig {
    /// Points per singular axis on the coarsest level (odd, so the singular set is on the grid).
    pub base_points: usize,
    /// Number of levels; each halves the singular spacing.
    pub refinements: usize,
    pub singular_half_width: f64,
    pub regular_half_width: f64,
    pub regular_points: usize,
    pub measure: ScanMeasure,
}

impl W2pScanConfig {
    /// Layout tuned so the finest-pair slope separates the verdicts within a
    /// few seconds per family.
    pub fn for_family(family: &SolutionFamily) -> Self {
        let (base_points, singular_half_width, measure) = match family.kind() {
            FamilyKind::Blocki => (9, 0.25, ScanMeasure::Laplacian),
            _ if family.dim() == 2 => (161, 0.1, ScanMeasure::Hessian),
            _ if family.dim() == 3 => (81, 0.1, ScanMeasure::Hessian),
            _ => (41, 0.1, ScanMeasure::Hessian),
        };
        Self { base_points, refinements: 3, singular_half_width, regular_half_width: 0.5, regular_points: 5, measure }
    }

    fn validate(&self) -> Result<(), RegularityError> {
        let bad = |msg: &str| Err(RegularityError::InvalidArgument(msg.into()));
        if self.base_points < 5 || self.base_points % 2 == 0 {
            return bad("base_points must be odd and at least 5");
        }
        if self.refinements < 2 {
            return bad("a scan needs at least two refinement levels");
        }
        if self.regular_points < 5 {
            return bad("regular_points must be at least 5");
        }
        if !(self.singular_half_width > 0.0 && self.regular_half_width > 0.0) {
            return bad("half-widths must be positive");
        }
        Ok(())
    }

    fn points_at(&self, level: usize) -> usize {
        (self.base_points - 1) * (1 << level) + 1
    }
}

/// Integrability threshold in `p` of the scanned quantity for `family`.
pub fn w2p_threshold(family: &SolutionFamily) -> f64 {
    let n = family.dim() as f64;
    match family.kind() {
        FamilyKind::Blocki => n * (n - 1.0),
        // Hessian ~ |w|^{2/n - 2} in the real 2-plane of w.
        _ => n / (n - 1.0),
    }
}

/// Default scan exponents, on both sides of [`w2p_threshold`].
pub fn default_p_list(family: &SolutionFamily) -> Vec<f64> {
    let t = w2p_threshold(family);
    match family.kind() {
        FamilyKind::Blocki => vec![t - 2.0, t + 2.0, t + 4.0],
        _ if family.dim() == 2 => vec![1.5, 2.5],
        _ => vec![t - 0.7, t - 0.3, t + 0.3],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn from_slope(slope: f64) -> Self {
        if slope >= BOUNDED_SLOPE {
            Verdict::Bounded
        } else if slope <= DIVERGENT_SLOPE {
            Verdict::Divergent
        } else {
            Verdict::Inconclusive
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub p: f64,
    /// Slope of `log norm` against `log h` between the two finest levels.
    pub slope: f64,
    pub verdict: Verdict,
    /// Slopes between consecutive levels, coarse to fine.
    pub pair_slopes: Vec<f64>,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W2pScan {
    pub measure: ScanMeasure,
    /// Singular-axis spacing per level.
    pub spacings: Vec<f64>,
    pub entries: Vec<ScanEntry>,
}

impl W2pScan {
    /// Verdicts never go from divergent back to bounded as `p` grows.
    pub fn is_monotone(&self) -> bool {
        let mut seen_divergent = false;
        for e in &self.entries {
            match e.verdict {
                Verdict::Divergent => seen_divergent = true,
                Verdict::Bounded if seen_divergent => return false,
                _ => {}
            }
        }
        true
    }

    /// Monotone, bounded somewhere below `threshold`, divergent somewhere
    /// above it, and no verdict on the wrong side.
    pub fn flips_across(&self, threshold: f64) -> bool {
        let wrong_side = self.entries.iter().any(|e| {
            (e.p < threshold && e.verdict == Verdict::Divergent) || (e.p > threshold && e.verdict == Verdict::Bounded)
        });
        let below = self.entries.iter().any(|e| e.p < threshold && e.verdict == Verdict::Bounded);
        let above = self.entries.iter().any(|e| e.p > threshold && e.verdict == Verdict::Divergent);
        self.is_monotone() && !wrong_side && below && above
    }
}

/// Tensor grid used by the scans. It mirrors [`GridDomain`] node for node but
/// is never materialized, so it is not subject to the node cap.
struct ScanLattice {
    center: Vec<f64>,
    half: Vec<f64>,
    points: Vec<usize>,
    tube_coords: Vec<usize>,
    tube: f64,
}

impl ScanLattice {
    fn spacing(&self, a: usize) -> f64 {
        2.0 * self.half[a] / (self.points[a] - 1) as f64
    }

    fn coord(&self, a: usize, i: usize) -> f64 {
        self.center[a] - self.half[a] + i as f64 * self.spacing(a)
    }

    fn excluded(&self, x: &[f64]) -> bool {
        if self.tube <= 0.0 {
            return false;
        }
        let d2: f64 = self.tube_coords.iter().map(|&k| x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1]).sum();
        d2.sqrt() < self.tube
    }
}

/// `(sum_{interior, outside tube} |q|^p * cell)^{1/p}` for every `p` in `ps`,
/// with `q` the chosen second-order quantity of `f` evaluated on the fly.
fn streamed_norms<F>(lat: &ScanLattice, f: &F, measure: ScanMeasure, ps: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = lat.points.len();
    let n = m / 2;
    let inner: Vec<usize> = lat.points.iter().map(|p| p - 2).collect();
    let count: usize = inner.iter().product();
    let h: Vec<f64> = (0..m).map(|a| lat.spacing(a)).collect();
    let cell: f64 = h.iter().product();
    let blocks = count.div_ceil(REDUCTION_BLOCK);
    let partial: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = vec![0.0; ps.len()];
            let mut idx = vec![0usize; m];
            let mut x = vec![0.0; m];
            let mut buf = vec![0.0; m];
            let mut real = vec![0.0; m * m];
            let mut cplx = vec![Complex64::new(0.0, 0.0); n * n];
            let end = ((b + 1) * REDUCTION_BLOCK).min(count);
            for flat in b * REDUCTION_BLOCK..end {
                let mut rem = flat;
                for a in (0..m).rev() {
                    idx[a] = rem % inner[a] + 1;
                    rem /= inner[a];
                    x[a] = lat.coord(a, idx[a]);
                }
                if lat.excluded(&x) {
                    continue;
                }
                let probe = |moves: &[(usize, i32)]| {
                    buf.copy_from_slice(&x);
                    for &(a, s) in moves {
                        buf[a] = lat.coord(a, (idx[a] as i64 + s as i64) as usize);
                    }
                    f(&buf)
                };
                let q = match measure {
                    ScanMeasure::Hessian => {
                        stencil::real_hessian(m, &h, f(&x), probe, &mut real);
                        real.iter().map(|v| v * v).sum::<f64>().sqrt()
                    }
                    ScanMeasure::Laplacian => {
                        stencil::wirtinger_hessian(n, &h, f(&x), probe, &mut cplx);
                        (0..n).map(|i| cplx[i * n + i].re).sum::<f64>().abs()
                    }
                };
                for (s, &p) in sums.iter_mut().zip(ps) {
                    *s += q.powf(p) * cell;
                }
            }
            sums
        })
        .collect();
    ps.iter()
        .enumerate()
        .map(|(k, &p)| partial.iter().map(|s| s[k]).sum::<f64>().powf(1.0 / p))
        .collect()
}

/// Refinement scan of the `eps = 0` member of `family`. At level `k` the
/// singular axes carry `(base_points - 1) 2^k + 1` nodes and the tube of
/// radius `2h` around the singular set is excluded.
pub fn w2p_divergence_scan(
    family: &SolutionFamily,
    p_list: &[f64],
    cfg: &W2pScanConfig,
) -> Result<W2pScan, RegularityError> {
    cfg.validate()?;
    if p_list.is_empty() || p_list.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(RegularityError::InvalidArgument("p values must be positive and finite".into()));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RegularityError::InvalidArgument("p values must be strictly increasing".into()));
    }
    let limit = family.limit();
    let singular = family.singular_coords();
    let m = 2 * family.dim();
    let is_singular_axis = |a: usize| singular.contains(&(a / 2));
    let mut spacings = Vec::with_capacity(cfg.refinements);
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(cfg.refinements);
    for level in 0..cfg.refinements {
        let np = cfg.points_at(level);
        let h = 2.0 * cfg.singular_half_width / (np - 1) as f64;
        let lat = ScanLattice {
            center: vec![0.0; m],
            half: (0..m)
                .map(|a| if is_singular_axis(a) { cfg.singular_half_width } else { cfg.regular_half_width })
                .collect(),
            points: (0..m).map(|a| if is_singular_axis(a) { np } else { cfg.regular_points }).collect(),
            tube_coords: singular.clone(),
            tube: 2.0 * h,
        };
        levels.push(streamed_norms(&lat, &|x: &[f64]| limit.value(x), cfg.measure, p_list));
        spacings.push(h);
    }
    let entries = p_list
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let norms: Vec<f64> = levels.iter().map(|l| l[k]).collect();
            let pair_slopes: Vec<f64> = (1..norms.len())
                .map(|j| (norms[j] / norms[j - 1]).ln() / (spacings[j] / spacings[j - 1]).ln())
                .collect();
            let slope = *pair_slopes.last().expect("at least two levels");
            ScanEntry { p, slope, verdict: Verdict::from_slope(slope), pair_slopes, norms }
        })
        .collect();
    Ok(W2pScan { measure: cfg.measure, spacings, entries })
}

/// Dense line scan for [`rhs_lipschitz_scaling`]: `w` runs over the real
/// segment `[-half_width, half_width]` with the other coordinates at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzConfig {
    pub half_width: f64,
    pub points: usize,
    /// Head coordinates `z_1 .. z_{n-1}` as interleaved reals; zeros if empty.
    pub base: Vec<f64>,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        Self { half_width: 1.0, points: 40_001, base: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEntry {
    pub eps: f64,
    pub sup_gradient: f64,
    /// `sup_gradient` over the previous entry's value.
    pub ratio: Option<f64>,
}

fn require_eps_family(family: &SolutionFamily) -> Result<(), RegularityError> {
    if !family.kind().has_eps() {
        return Err(FamilyError::UnsupportedFamily(family.kind(), "eps probes").into());
    }
    Ok(())
}

fn check_eps_list(eps_list: &[f64]) -> Result<(), RegularityError> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(RegularityError::InvalidArgument("eps values must be positive and finite".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(RegularityError::InvalidArgument("eps values must be strictly decreasing".into()));
    }
    Ok(())
}

/// `eps = 4^{-k}` for `k = 0 .. count`.
pub fn quartering_eps(count: usize) -> Vec<f64> {
    (0..count).map(|k| 0.25f64.powi(k as i32)).collect()
}

/// Max over the scan line of `|grad F(., eps)|`, with the gradient taken by
/// central differences of step `1e-4 min(1, sqrt eps)` in every real direction.
pub fn rhs_lipschitz_scaling(
    family: &SolutionFamily,
    eps_list: &[f64],
    cfg: &LipschitzConfig,
) -> Result<Vec<LipschitzEntry>, RegularityError> {
    require_eps_family(family)?;
    check_eps_list(eps_list)?;
    let m = 2 * family.dim();
    if !cfg.base.is_empty() && cfg.base.len() != m - 2 {
        return Err(RegularityError::InvalidArgument(format!("base needs {} reals, got {}", m - 2, cfg.base.len())));
    }
    if cfg.points < 2 || !(cfg.half_width > 0.0) {
        return Err(RegularityError::InvalidArgument("scan line needs two points and a positive width".into()));
    }
    let mut out: Vec<LipschitzEntry> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let fam = family.with_eps(eps)?;
        let step = 1e-4 * eps.sqrt().min(1.0);
        let dt = 2.0 * cfg.half_width / (cfg.points - 1) as f64;
        let sup = (0..cfg.points)
            .into_par_iter()
            .map(|k| {
                let mut x = vec![0.0; m];
                x[..cfg.base.len()].copy_from_slice(&cfg.base);
                x[m - 2] = -cfg.half_width + k as f64 * dt;
                let mut g2 = 0.0;
                for a in 0..m {
                    let keep = x[a];
                    x[a] = keep + step;
                    let up = fam.rhs(&x);
                    x[a] = keep - step;
                    let dn = fam.rhs(&x);
                    x[a] = keep;
                    g2 += ((up - dn) / (2.0 * step)).powi(2);
                }
                g2.sqrt()
            })
            .reduce(|| 0.0, f64::max);
        let ratio = out.last().map(|prev| sup / prev.sup_gradient);
        out.push(LipschitzEntry { eps, sup_gradient: sup, ratio });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub eps: f64,
    /// `max |u^eps - u^0|` over the grid.
    pub sup_u: f64,
    /// Closed-form bound `c(1 + max|z|^2) eps^{1/n}` (`c = 2` for the `C^2` family).
    pub u_bound: f64,
    /// `L^p` norm of `F(., eps) - F_0` over the grid.
    pub f_lp: f64,
    /// `max |F(., eps) - F_0|` over nodes on the singular set.
    pub f_sup_slice: f64,
}

/// Compares `u^eps` and `F(., eps)` with their `eps = 0` limits on a fixed grid.
pub fn convergence_study(
    family: &SolutionFamily,
    eps_list: &[f64],
    p: f64,
    domain: &GridDomain,
) -> Result<Vec<ConvergenceEntry>, RegularityError> {
    require_eps_family(family)?;
    check_eps_list(eps_list)?;
    if !(p.is_finite() && p > 0.0) {
        return Err(RegularityError::InvalidArgument("p must be positive and finite".into()));
    }
    if domain.complex_dim() != family.dim() {
        return Err(FamilyError::DimensionMismatch { expected: family.dim(), got: domain.complex_dim() }.into());
    }
    let limit = family.limit();
    let f0 = family.rhs_limit().expect("eps families have a limit right-hand side");
    let singular = family.singular_coords();
    let head = family.dim() - 1;
    let mut coords = vec![0.0; domain.axes()];
    let mut max_head = 0.0f64;
    let mut slice = Vec::new();
    for idx in 0..domain.node_count() {
        domain.node_coords(idx, &mut coords);
        max_head = max_head.max((0..2 * head).map(|a| coords[a] * coords[a]).sum());
        if singular.iter().all(|&k| coords[2 * k] == 0.0 && coords[2 * k + 1] == 0.0) {
            slice.push(idx);
        }
    }
    if slice.is_empty() {
        return Err(RegularityError::InvalidArgument("grid has no nodes on the singular set".into()));
    }
    let n = family.dim() as f64;
    let (c, power) = match family.kind() {
        FamilyKind::PogorelovEps2 => (2.0, 0.5),
        _ => (1.0, 1.0 / n),
    };
    let u0 = sample(domain, |x| limit.value(x))?;
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let fam = family.with_eps(eps)?;
        let ue = sample(domain, |x| fam.value(x))?;
        let sup_u = ue.sub(&u0)?.max_abs();
        let df = sample(domain, |x| fam.rhs(x) - f0)?;
        let f_sup_slice = slice.iter().map(|&i| df.values()[i].abs()).fold(0.0, f64::max);
        out.push(ConvergenceEntry {
            eps,
            sup_u,
            u_bound: c * (1.0 + max_head) * eps.powf(power),
            f_lp: lp_norm(&df, p),
            f_sup_slice,
        });
    }
    Ok(out)
}

/// Settings for a full [`RegularityReport`]. Family-dependent fields left
/// empty fall back to [`ProbeConfig::for_family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub radii: Vec<f64>,
    pub p_list: Vec<f64>,
    pub scan: Option<W2pScanConfig>,
    pub eps_list: Vec<f64>,
    pub lipschitz: LipschitzConfig,
    pub convergence_p: f64,
    /// Points per axis of the convergence grid: 17 in `C^2`, 9 in `C^3`, 5 above.
    pub convergence_points: Option<usize>,
    pub convergence_half_width: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            radii: Vec::new(),
            p_list: Vec::new(),
            scan: None,
            eps_list: Vec::new(),
            lipschitz: LipschitzConfig::default(),
            convergence_p: 2.0,
            convergence_points: None,
            convergence_half_width: 1.0,
        }
    }
}

impl ProbeConfig {
    /// All fields filled with the defaults for `family`.
    pub fn for_family(family: &SolutionFamily) -> Self {
        Self::default().resolved(family)
    }

    pub fn resolved(mut self, family: &SolutionFamily) -> Self {
        if self.radii.is_empty() {
            self.radii = geometric_radii(1e-3, 1e-1, 7);
        }
        if self.p_list.is_empty() {
            self.p_list = default_p_list(family);
        }
        if self.scan.is_none() {
            self.scan = Some(W2pScanConfig::for_family(family));
        }
        if self.eps_list.is_empty() {
            self.eps_list = quartering_eps(7);
        }
        if self.convergence_points.is_none() {
            self.convergence_points = Some(match family.dim() {
                2 => 17,
                3 => 9,
                _ => 5,
            });
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub family: SolutionFamily,
    pub fitted_alpha: HolderFit,
    pub w2p_threshold: f64,
    pub w2p_scan: W2pScan,
    /// Empty for families without an `eps` parameter.
    pub lip_f_scaling: Vec<LipschitzEntry>,
    /// Empty for families without an `eps` parameter.
    pub convergence: Vec<ConvergenceEntry>,
}

impl RegularityReport {
    /// Runs every applicable probe with the center at the origin.
    pub fn run(family: &SolutionFamily, cfg: &ProbeConfig) -> Result<Self, RegularityError> {
        let cfg = cfg.clone().resolved(family);
        let center = ComplexPoint::origin(family.dim());
        let fitted_alpha = holder_fit(family, &center, &cfg.radii)?;
        let scan_cfg = cfg.scan.as_ref().expect("resolved");
        let w2p_scan = w2p_divergence_scan(family, &cfg.p_list, scan_cfg)?;
        let (lip_f_scaling, convergence) = if family.kind().has_eps() {
            let lip = rhs_lipschitz_scaling(family, &cfg.eps_list, &cfg.lipschitz)?;
            let domain = GridDomain::cube(family.dim(), cfg.convergence_half_width, cfg.convergence_points.expect("resolved"))?;
            let conv = convergence_study(family, &cfg.eps_list, cfg.convergence_p, &domain)?;
            (lip, conv)
        } else {
            (Vec::new(), Vec::new())
        };
        let report = Self {
            family: *family,
            fitted_alpha,
            w2p_threshold: w2p_threshold(family),
            w2p_scan,
            lip_f_scaling,
            convergence,
        };
        report.validate()?;
        Ok(report)
    }

    /// Checks that every number is finite and the scan exponents increase.
    pub fn validate(&self) -> Result<(), RegularityError> {
        let mut nums = vec![self.fitted_alpha.alpha, self.fitted_alpha.stderr];
        for e in &self.w2p_scan.entries {
            nums.extend([e.p, e.slope]);
            nums.extend(&e.norms);
        }
        for e in &self.lip_f_scaling {
            nums.extend([e.eps, e.sup_gradient]);
        }
        for e in &self.convergence {
            nums.extend([e.eps, e.sup_u, e.u_bound, e.f_lp, e.f_sup_slice]);
        }
        if let Some(v) = nums.iter().find(|v| !v.is_finite()) {
            return Err(RegularityError::InvalidArgument(format!("report holds a non-finite value {v}")));
        }
        if self.w2p_scan.entries.windows(2).any(|w| w[1].p <= w[0].p) {
            return Err(RegularityError::InvalidArgument("scan p values are not increasing".into()));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    /// One row per measurement: `measurement,parameter,value,secondary,tertiary,label`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("measurement,parameter,value,secondary,tertiary,label\n");
        let a = &self.fitted_alpha;
        s.push_str(&format!("holder_alpha,,{:.12e},{:.12e},,\n", a.alpha, a.stderr));
        for (r, o) in a.radii.iter().zip(&a.oscillations) {
            s.push_str(&format!("oscillation,{r:.12e},{o:.12e},,,\n"));
        }
        for e in &self.w2p_scan.entries {
            let finest = e.norms.last().copied().unwrap_or(f64::NAN);
            s.push_str(&format!("w2p_slope,{:.12e},{:.12e},{:.12e},,{}\n", e.p, e.slope, finest, e.verdict));
        }
        for e in &self.lip_f_scaling {
            let ratio = e.ratio.map(|r| format!("{r:.12e}")).unwrap_or_default();
            s.push_str(&format!("lipschitz,{:.12e},{:.12e},{ratio},,\n", e.eps, e.sup_gradient));
        }
        for e in &self.convergence {
            s.push_str(&format!(
                "convergence,{:.12e},{:.12e},{:.12e},{:.12e},\n",
                e.eps, e.sup_u, e.f_lp, e.f_sup_slice
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{complex_laplacian_fd, w2p_seminorm};

    fn radii() -> Vec<f64> {
        geometric_radii(1e-3, 1e-1, 7)
    }

    #[test]
    fn pure_powers_calibrate() {
        for gamma in [0.4, 2.0 / 3.0, 1.0] {
            let f = move |x: &[f64]| (x[2] * x[2] + x[3] * x[3]).powf(gamma / 2.0);
            let fit = holder_fit_fn(f, &[0.0; 4], &radii()).unwrap();
            assert!((fit.alpha - gamma).abs() < 0.02, "{gamma}: {fit:?}");
            assert!(fit.stderr < 1e-6);
        }
    }

    #[test]
    fn family_exponents() {
        let cases = [
            (SolutionFamily::pogorelov2(0.0), 1.0),
            (SolutionFamily::pogorelov_n(3, 0.0), 2.0 / 3.0),
            (SolutionFamily::theorem_v(2), 1.0),
        ];
        for (fam, alpha) in cases {
            let fit = holder_fit(&fam, &ComplexPoint::origin(fam.dim()), &radii()).unwrap();
            assert!((fit.alpha - alpha).abs() < 0.05, "{fam:?}: {fit:?}");
        }
    }

    #[test]
    fn holder_rejects_bad_input() {
        let fam = SolutionFamily::pogorelov2(0.0);
        let o = ComplexPoint::origin(2);
        assert!(matches!(holder_fit(&fam, &o, &geometric_radii(1e-2, 1e-1, 7)), Err(RegularityError::InvalidRadii(_))));
        assert!(matches!(holder_fit(&fam, &o, &geometric_radii(1e-3, 1e-1, 5)), Err(RegularityError::InvalidRadii(_))));
        let off = ComplexPoint::new(vec![0.0, 0.0, 0.5, 0.0]).unwrap();
        assert!(matches!(holder_fit(&fam, &off, &radii()), Err(RegularityError::InvalidArgument(_))));
        let flat = holder_fit_fn(|_| 3.0, &[0.0; 4], &radii());
        assert!(matches!(flat, Err(RegularityError::DegenerateFit { .. })));
    }

    #[test]
    fn streamed_norms_match_grid_norms() {
        let fam = SolutionFamily::pogorelov_n(3, 0.0);
        let f = |x: &[f64]| fam.value(x);
        let lat = ScanLattice {
            center: vec![0.0; 6],
            half: vec![0.5, 0.5, 0.5, 0.5, 0.1, 0.1],
            points: vec![5, 5, 5, 5, 9, 9],
            tube_coords: vec![2],
            tube: 0.05,
        };
        let domain = GridDomain::new(lat.center.clone(), lat.half.clone(), lat.points.clone())
            .unwrap()
            .with_tube_coords(vec![2])
            .unwrap()
            .with_tube(0.05)
            .unwrap();
        let u = sample(&domain, f).unwrap();
        let ps = [0.9, 1.8];
        let streamed = streamed_norms(&lat, &f, ScanMeasure::Hessian, &ps);
        for (k, &p) in ps.iter().enumerate() {
            let grid = w2p_seminorm(&u, p).unwrap();
            assert!((streamed[k] - grid).abs() <= 1e-12 * grid, "{} vs {grid}", streamed[k]);
        }
        let lap = complex_laplacian_fd(&u);
        let streamed = streamed_norms(&lat, &f, ScanMeasure::Laplacian, &ps);
        for (k, &p) in ps.iter().enumerate() {
            let grid = lp_norm(&lap, p);
            assert!((streamed[k] - grid).abs() <= 1e-12 * grid, "{} vs {grid}", streamed[k]);
        }
    }

    #[test]
    fn c2_scan_flips_at_two() {
        let fam = SolutionFamily::pogorelov2(0.0);
        let scan = w2p_divergence_scan(&fam, &[1.5, 2.5], &W2pScanConfig::for_family(&fam)).unwrap();
        assert_eq!(scan.entries[0].verdict, Verdict::Bounded, "{scan:?}");
        assert_eq!(scan.entries[1].verdict, Verdict::Divergent, "{scan:?}");
        assert!(scan.flips_across(2.0));
        assert!(!scan.flips_across(3.0));
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(Verdict::from_slope(0.01), Verdict::Bounded);
        assert_eq!(Verdict::from_slope(-0.05), Verdict::Bounded);
        assert_eq!(Verdict::from_slope(-0.1), Verdict::Inconclusive);
        assert_eq!(Verdict::from_slope(-0.2), Verdict::Divergent);
    }

    #[test]
    fn scan_rejects_unsorted_p() {
        let fam = SolutionFamily::pogorelov2(0.0);
        let cfg = W2pScanConfig::for_family(&fam);
        assert!(w2p_divergence_scan(&fam, &[2.5, 1.5], &cfg).is_err());
        let coarse = W2pScanConfig { refinements: 1, ..cfg };
        assert!(w2p_divergence_scan(&fam, &[1.5], &coarse).is_err());
    }

    #[test]
    fn lipschitz_ratios_near_two() {
        let fam = SolutionFamily::pogorelov2(1.0);
        let out = rhs_lipschitz_scaling(&fam, &quartering_eps(7), &LipschitzConfig::default()).unwrap();
        for e in &out[1..] {
            let r = e.ratio.unwrap();
            assert!((1.7..=2.3).contains(&r), "{e:?}");
        }
        let tiny = rhs_lipschitz_scaling(&fam, &[1.0, 1e-4], &LipschitzConfig::default()).unwrap();
        let r = tiny[1].ratio.unwrap();
        assert!((r / 100.0 - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn convergence_columns() {
        let fam = SolutionFamily::pogorelov2(1.0);
        let domain = GridDomain::cube(2, 1.0, 17).unwrap();
        let out = convergence_study(&fam, &quartering_eps(7), 2.0, &domain).unwrap();
        for w in out.windows(2) {
            assert!(w[1].sup_u < w[0].sup_u && w[1].f_lp < w[0].f_lp, "{w:?}");
        }
        for e in &out {
            assert!(e.sup_u <= e.u_bound, "{e:?}");
            // max over the slice of 2(1 + |z|^2) - 1 with |z|^2 <= 2
            assert!((e.f_sup_slice - 5.0).abs() < 1e-12, "{e:?}");
        }
        let at_origin = fam.with_eps(0.37).unwrap().rhs(&[0.0; 4]);
        assert_eq!(at_origin, 2.0);
    }

    #[test]
    fn report_round_trip() {
        let fam = SolutionFamily::pogorelov2(0.0);
        let mut cfg = ProbeConfig::for_family(&fam);
        cfg.scan = Some(W2pScanConfig { base_points: 21, ..W2pScanConfig::for_family(&fam) });
        cfg.lipschitz.points = 2001;
        cfg.convergence_points = Some(9);
        let report = RegularityReport::run(&fam, &cfg).unwrap();
        let json = report.to_json_string().unwrap();
        let back: RegularityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let csv = report.to_csv_string();
        assert_eq!(csv.lines().count(), 1 + 1 + 7 + 2 + 7 + 7);
    }
}
