//! Viscosity tests for `G(X) = 1 - det X` (`+inf` off the PSD cone) at the
//! singular set of the `eps = 0` families, using quadratic jets.
//!
//! Below the singular set the family behaves like a cone `K |w|^gamma` with
//! `gamma <= 1`, so no quadratic can touch from above and any quadratic
//! touching from below has a non-positive `z`-block in its complex Hessian.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::SolutionFamily;
use crate::grid::ComplexPoint;
use crate::hermitian::HermitianForm;

/// Default absolute tolerance on the smallest eigenvalue in [`g_operator`].
pub const PSD_TOL: f64 = 1e-12;
/// Margin below which a sampled gap counts against touching.
pub const TOUCH_MARGIN: f64 = 1e-10;
/// Margin a witness has to beat in [`search_touch_above`].
pub const WITNESS_MARGIN: f64 = 1e-12;
/// Minimum number of ball samples used to certify touching.
pub const MIN_TOUCH_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscosityError {
    #[error("base point is not on the singular set of the family")]
    BasePointOffSingularSet,
    #[error("jet value {jet} differs from the function value {value} at the base point")]
    ValueMismatch { jet: f64, value: f64 },
    #[error("expected complex dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid jet: {0}")]
    InvalidJet(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `G(X) = 1 - det X` when the smallest eigenvalue of `X` is `>= -tol`, `+inf` otherwise.
pub fn g_operator(x: &HermitianForm, tol: f64) -> f64 {
    if x.psd_report(tol).is_psd {
        1.0 - x.det()
    } else {
        f64::INFINITY
    }
}

/// [`g_operator`] bound to a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityOperator {
    dim: usize,
    tol: f64,
}

impl ViscosityOperator {
    pub fn new(dim: usize) -> Result<Self, ViscosityError> {
        if dim < 2 {
            return Err(ViscosityError::InvalidArgument(format!("dimension must be >= 2, got {dim}")));
        }
        Ok(Self { dim, tol: PSD_TOL })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn apply(&self, x: &HermitianForm) -> Result<f64, ViscosityError> {
        if x.dim() != self.dim {
            return Err(ViscosityError::DimensionMismatch { expected: self.dim, got: x.dim() });
        }
        Ok(g_operator(x, self.tol))
    }
}

/// `q(x) = c + g.(x - p) + 1/2 (x - p)^T H (x - p)` in interleaved real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticJet {
    base: ComplexPoint,
    c: f64,
    g: Vec<f64>,
    /// Row-major `2n x 2n`.
    h: Vec<f64>,
}

impl QuadraticJet {
    pub fn new(base: ComplexPoint, c: f64, g: Vec<f64>, h: Vec<f64>) -> Result<Self, ViscosityError> {
        let m = base.coords().len();
        if g.len() != m || h.len() != m * m {
            return Err(ViscosityError::InvalidJet(format!(
                "need {m} gradient and {} Hessian entries, got {} and {}",
                m * m,
                g.len(),
                h.len()
            )));
        }
        if !c.is_finite() || g.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(ViscosityError::InvalidJet("non-finite coefficient".into()));
        }
        for a in 0..m {
            for b in 0..a {
                if h[a * m + b] != h[b * m + a] {
                    return Err(ViscosityError::InvalidJet(format!("Hessian not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(Self { base, c, g, h })
    }

    /// Constant jet `q == c`.
    pub fn constant(base: ComplexPoint, c: f64) -> Self {
        let m = base.coords().len();
        Self { base, c, g: vec![0.0; m], h: vec![0.0; m * m] }
    }

    pub fn base(&self) -> &ComplexPoint {
        &self.base
    }

    pub fn value_at_base(&self) -> f64 {
        self.c
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g
    }

    pub fn hessian(&self) -> &[f64] {
        &self.h
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.g.len();
        let p = self.base.coords();
        let mut lin = 0.0;
        let mut quad = 0.0;
        for a in 0..m {
            let da = x[a] - p[a];
            lin += self.g[a] * da;
            let row = &self.h[a * m..(a + 1) * m];
            let hd: f64 = row.iter().zip(x.iter().zip(p)).map(|(h, (xb, pb))| h * (xb - pb)).sum();
            quad += da * hd;
        }
        self.c + lin + 0.5 * quad
    }
}

/// Exact complex Hessian of a quadratic jet.
pub fn complex_hessian_of_jet(q: &QuadraticJet) -> HermitianForm {
    let n = q.base.dim();
    let m = 2 * n;
    let h = |a: usize, b: usize| q.h[a * m + b];
    HermitianForm::from_fn(n, |i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        Complex64::new(0.25 * (h(xi, xj) + h(yi, yj)), 0.25 * (h(xi, yj) - h(yi, xj)))
    })
    .expect("square")
}

fn check_base(u: &SolutionFamily, p0: &ComplexPoint) -> Result<Vec<usize>, ViscosityError> {
    if p0.dim() != u.dim() {
        return Err(ViscosityError::DimensionMismatch { expected: u.dim(), got: p0.dim() });
    }
    let sing = u.singular_coords();
    if u.is_smooth() || sing.iter().any(|&k| p0.z(k).norm_sqr() != 0.0) {
        return Err(ViscosityError::BasePointOffSingularSet);
    }
    Ok(sing)
}

/// `K` with `u(p0 + v) = K |v|^gamma` for `v` in the singular directions.
pub fn cone_coefficient(u: &SolutionFamily, p0: &ComplexPoint) -> Result<f64, ViscosityError> {
    let sing = check_base(u, p0)?;
    let mut x = p0.coords().to_vec();
    x[2 * sing[0]] = 1.0;
    Ok(u.value(&x) - u.value(p0.coords()))
}

/// `count` deterministic points of the singular set of `u`: the origin first,
/// then points whose regular coordinates are spread over `[-0.9, 0.9]`.
pub fn singular_base_points(u: &SolutionFamily, count: usize) -> Vec<ComplexPoint> {
    let sing = u.singular_coords();
    (0..count)
        .map(|j| {
            let mut x = vec![0.0; 2 * u.dim()];
            if j > 0 {
                let t = j as f64;
                for k in (0..u.dim()).filter(|k| !sing.contains(k)) {
                    let s = k as f64;
                    x[2 * k] = 0.9 * (1.3 * t + s).sin();
                    x[2 * k + 1] = 0.9 * (2.1 * t + 0.5 * s).cos();
                }
            }
            ComplexPoint::new(x).expect("even length")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchBelowReport {
    pub touches: bool,
    /// Smallest sampled `u - q`.
    pub min_gap: f64,
    #[serde(with = "crate::serde_f64")]
    pub g_value: f64,
    /// `g_value >= -1e-10` whenever the jet touches; vacuously true otherwise.
    pub verdict: bool,
    pub samples: usize,
    pub psd_tol: f64,
}

fn ball_point(rng: &mut ChaCha8Rng, center: &[f64], radius: f64, log_radial: bool, out: &mut [f64]) {
    let m = center.len();
    let mut norm = 0.0;
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
        norm += *v * *v;
    }
    let norm = norm.sqrt().max(f64::MIN_POSITIVE);
    let r = if log_radial {
        radius * 10f64.powf(-8.0 * rng.random::<f64>())
    } else {
        radius * rng.random::<f64>().powf(1.0 / m as f64)
    };
    for (v, c) in out.iter_mut().zip(center) {
        *v = c + *v / norm * r;
    }
}

/// Certifies `u - q >= -1e-10` on `samples` points of the ball around the
/// jet's base (half uniform, half at log-uniform distances) and, if so,
/// evaluates `G` on the jet's complex Hessian.
pub fn check_touch_below(
    u: &SolutionFamily,
    q: &QuadraticJet,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<TouchBelowReport, ViscosityError> {
    check_base(u, &q.base)?;
    let value = u.value(q.base.coords());
    if (q.c - value).abs() > 1e-12 {
        return Err(ViscosityError::ValueMismatch { jet: q.c, value });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ViscosityError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = q.base.coords();
    let mut x = vec![0.0; center.len()];
    let mut min_gap = f64::INFINITY;
    for s in 0..samples {
        ball_point(&mut rng, center, radius, s % 2 == 1, &mut x);
        min_gap = min_gap.min(u.value(&x) - q.eval(&x));
    }
    let touches = min_gap >= -TOUCH_MARGIN;
    let g_value = g_operator(&complex_hessian_of_jet(q), PSD_TOL);
    Ok(TouchBelowReport {
        touches,
        min_gap,
        g_value,
        verdict: !touches || g_value >= -TOUCH_MARGIN,
        samples,
        psd_tol: PSD_TOL,
    })
}

fn random_symmetric(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Vec<f64> {
    let mut s = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
            s[a * m + b] = v;
            s[b * m + a] = v;
        }
    }
    s
}

/// Random jet at `p0` that is a plausible lower touching candidate: zero
/// gradient and negative semidefinite Hessian along the regular directions
/// (occasionally perturbed), random mixed and singular blocks, and a
/// singular-direction gradient up to 1.5 times the cone coefficient.
pub fn random_below_candidate(
    u: &SolutionFamily,
    p0: &ComplexPoint,
    rng: &mut ChaCha8Rng,
) -> Result<QuadraticJet, ViscosityError> {
    let sing = check_base(u, p0)?;
    let k = cone_coefficient(u, p0)?;
    let m = 2 * u.dim();
    let singular_axis = |a: usize| sing.contains(&(a / 2));
    let reg: Vec<usize> = (0..m).filter(|&a| !singular_axis(a)).collect();
    let sng: Vec<usize> = (0..m).filter(|&a| singular_axis(a)).collect();

    let mut h = vec![0.0; m * m];
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    // regular block: -B B^T (+ rare indefinite perturbation)
    let r = reg.len();
    let b: Vec<f64> = (0..r * r).map(|_| rng.sample::<f64, _>(StandardNormal) * scale.sqrt()).collect();
    let perturb = if rng.random::<f64>() < 0.2 { random_symmetric(rng, r, 0.1 * scale) } else { vec![0.0; r * r] };
    for i in 0..r {
        for j in 0..r {
            let bbt: f64 = (0..r).map(|l| b[i * r + l] * b[j * r + l]).sum();
            h[reg[i] * m + reg[j]] = -bbt + perturb[i * r + j];
        }
    }
    let s = sng.len();
    let ws = random_symmetric(rng, s, scale);
    for i in 0..s {
        for j in 0..s {
            h[sng[i] * m + sng[j]] = ws[i * s + j];
        }
    }
    for &a in &reg {
        for &c in &sng {
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * 0.1 * scale;
            h[a * m + c] = v;
            h[c * m + a] = v;
        }
    }
    let mut g = vec![0.0; m];
    let dir: Vec<f64> = (0..s).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mag = rng.random_range(0.0..1.5) * k;
    for (i, &a) in sng.iter().enumerate() {
        g[a] = dir[i] / norm * mag;
    }
    QuadraticJet::new(p0.clone(), u.value(p0.coords()), g, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchBelowSweep {
    pub candidates: usize,
    pub touching: usize,
    pub verdict_failures: usize,
}

/// [`check_touch_below`] over `candidates` random jets from
/// [`random_below_candidate`]; candidate `i` uses stream `i` of `seed`.
pub fn touch_below_sweep(
    u: &SolutionFamily,
    p0: &ComplexPoint,
    radius: f64,
    candidates: usize,
    samples: usize,
    seed: u64,
) -> Result<TouchBelowSweep, ViscosityError> {
    check_base(u, p0)?;
    let reports = (0..candidates)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let q = random_below_candidate(u, p0, &mut rng)?;
            check_touch_below(u, &q, radius, samples, rng.random())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TouchBelowSweep {
        candidates,
        touching: reports.iter().filter(|r| r.touches).count(),
        verdict_failures: reports.iter().filter(|r| !r.verdict).count(),
    })
}

/// Largest `u - q` found on rays through the base point in the singular
/// directions, at distances `radius * 2^-j`.
pub fn witness_margin(u: &SolutionFamily, q: &QuadraticJet, radius: f64) -> Result<f64, ViscosityError> {
    let sing = check_base(u, &q.base)?;
    let p = q.base.coords();
    let axes: Vec<usize> = sing.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let gw: Vec<f64> = axes.iter().map(|&a| -q.g[a]).collect();
    let gn = gw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gn > 0.0 {
        dirs.push(gw.iter().map(|v| v / gn).collect());
    }
    for i in 0..axes.len() {
        for sgn in [1.0, -1.0] {
            let mut d = vec![0.0; axes.len()];
            d[i] = sgn;
            dirs.push(d);
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut x = p.to_vec();
    for d in &dirs {
        for j in 0..64 {
            let t = radius * 0.5f64.powi(j);
            for (i, &a) in axes.iter().enumerate() {
                x[a] = p[a] + t * d[i];
            }
            best = best.max(u.value(&x) - q.eval(&x));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchAboveReport {
    pub attempts: usize,
    /// Attempts for which a point with `q < u - 1e-12` was found.
    pub witnessed: usize,
    /// Whether some attempted jet had no witness, i.e. might touch from above.
    pub found: bool,
    /// Largest `u - q` seen over all attempts.
    pub best_violation: f64,
    /// Smallest per-attempt best margin; the weakest certificate.
    pub weakest_margin: f64,
}

/// Random quadratic jets through `(p0, u(p0))` with log-uniform Hessian
/// scales up to `1e6` and arbitrary gradients, each refuted by a witness
/// from [`witness_margin`].
pub fn search_touch_above(
    u: &SolutionFamily,
    p0: &ComplexPoint,
    radius: f64,
    attempts: usize,
    seed: u64,
) -> Result<TouchAboveReport, ViscosityError> {
    check_base(u, p0)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ViscosityError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let m = 2 * u.dim();
    let c = u.value(p0.coords());
    let margins = (0..attempts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let scale = 10f64.powf(rng.random_range(-2.0..6.0));
            let h = random_symmetric(&mut rng, m, scale);
            let gscale = 10f64.powf(rng.random_range(-2.0..1.0));
            let g: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal) * gscale).collect();
            let q = QuadraticJet::new(p0.clone(), c, g, h)?;
            witness_margin(u, &q, radius)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let witnessed = margins.iter().filter(|&&v| v > WITNESS_MARGIN).count();
    Ok(TouchAboveReport {
        attempts,
        witnessed,
        found: witnessed < attempts,
        best_violation: margins.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        weakest_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// `G` of the finite-difference complex Hessian at a regular point.
pub fn classical_g(u: &SolutionFamily, p: &ComplexPoint, h: f64) -> Result<f64, ViscosityError> {
    if p.dim() != u.dim() {
        return Err(ViscosityError::DimensionMismatch { expected: u.dim(), got: p.dim() });
    }
    Ok(g_operator(&u.fd_hessian(p, h), PSD_TOL))
}
