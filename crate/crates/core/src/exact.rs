//! Closed-form Pogorelov-type solution families.
//!
//! | kind            | dim `m` | value                                                        |
//! |-----------------|---------|--------------------------------------------------------------|
//! | `pogorelov2`    | 2       | `2 (1 + |z|^2) (|w|^2 + eps)^{1/2}`                          |
//! | `pogorelov-n`   | >= 3    | `(1 + |z_1|^2 + ... + |z_{m-1}|^2) (|w|^2 + eps)^{1/m}`      |
//! | `theorem-v`     | >= 2    | `m^{2/m} (1 + |z_1|^2 + ... + |z_{m-1}|^2) |z_m|^{2/m}`      |
//! | `degenerate`    | >= 2    | `m^{2/m} (|z_1|^2 + ... + |z_{m-1}|^2) |z_m|^{2/m}`          |
//! | `blocki`        | >= 2    | `(1 + |z_1|^2) (|z_2|^2 + ... + |z_m|^2)^{1 - 1/m}`          |
//!
//! The last coordinate `w = z_m` carries the singularity for every family
//! except `blocki`, whose singular set is `{z_2 = ... = z_m = 0}`.
//! For `pogorelov-n` every exponent is `1/m`, so the limit `eps = 0` is
//! `(1 + sum |z_i|^2) |w|^{2/m}` with `det = 1/m^2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{complex_hessian_fd_at, ComplexPoint};
use crate::hermitian::HermitianForm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("point has complex dimension {got}, family needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0:?} has no closed-form {1}")]
    UnsupportedFamily(FamilyKind, &'static str),
    #[error("point lies on the singular set of the eps = 0 limit")]
    SingularPoint,
    #[error("invalid family: {0}")]
    InvalidFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "pogorelov2")]
    PogorelovEps2,
    #[serde(rename = "pogorelov-n")]
    PogorelovEpsN,
    #[serde(rename = "theorem-v")]
    TheoremV,
    #[serde(rename = "degenerate")]
    Degenerate,
    #[serde(rename = "blocki")]
    Blocki,
}

impl std::str::FromStr for FamilyKind {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, FamilyError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| FamilyError::InvalidFamily(format!("unknown family {s:?}")))
    }
}

#[derive(Deserialize)]
struct Descriptor {
    kind: FamilyKind,
    dim: Option<usize>,
    #[serde(default)]
    eps: f64,
}

impl TryFrom<Descriptor> for SolutionFamily {
    type Error = FamilyError;
    fn try_from(d: Descriptor) -> Result<Self, FamilyError> {
        let dim = d.dim.unwrap_or(match d.kind {
            FamilyKind::PogorelovEpsN => 3,
            _ => 2,
        });
        SolutionFamily::new(d.kind, dim, d.eps)
    }
}

/// A member of one of the five closed-form families; JSON form
/// `{"kind": "...", "dim": m, "eps": e}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Descriptor")]
pub struct SolutionFamily {
    kind: FamilyKind,
    dim: usize,
    eps: f64,
}

/// Output of [`SolutionFamily::verify_identity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub det_analytic: f64,
    pub rhs: f64,
    pub abs_gap: f64,
}

fn sq(x: &[f64], k: usize) -> f64 {
    x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1]
}

impl SolutionFamily {
    pub fn new(kind: FamilyKind, dim: usize, eps: f64) -> Result<Self, FamilyError> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(FamilyError::InvalidFamily(format!("eps must be finite and >= 0, got {eps}")));
        }
        let ok = match kind {
            FamilyKind::PogorelovEps2 => dim == 2,
            FamilyKind::PogorelovEpsN => dim >= 3,
            _ => dim >= 2,
        };
        if !ok {
            return Err(FamilyError::InvalidFamily(format!("{kind:?} is not defined in dimension {dim}")));
        }
        let eps = if kind.has_eps() { eps } else { 0.0 };
        Ok(Self { kind, dim, eps })
    }

    pub fn pogorelov2(eps: f64) -> Self {
        Self::new(FamilyKind::PogorelovEps2, 2, eps).expect("valid eps")
    }

    pub fn pogorelov_n(m: usize, eps: f64) -> Self {
        Self::new(FamilyKind::PogorelovEpsN, m, eps).expect("valid dimension and eps")
    }

    pub fn theorem_v(n: usize) -> Self {
        Self::new(FamilyKind::TheoremV, n, 0.0).expect("n >= 2")
    }

    pub fn degenerate(n: usize) -> Self {
        Self::new(FamilyKind::Degenerate, n, 0.0).expect("n >= 2")
    }

    pub fn blocki(n: usize) -> Self {
        Self::new(FamilyKind::Blocki, n, 0.0).expect("n >= 2")
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Same family at `eps = 0`.
    pub fn limit(&self) -> Self {
        Self { eps: 0.0, ..*self }
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, FamilyError> {
        Self::new(self.kind, self.dim, eps)
    }

    /// Complex coordinates whose vanishing defines the singular set.
    pub fn singular_coords(&self) -> Vec<usize> {
        match self.kind {
            FamilyKind::Blocki => (1..self.dim).collect(),
            _ => vec![self.dim - 1],
        }
    }

    /// Whether the function is smooth everywhere (`eps > 0` Pogorelov kinds).
    pub fn is_smooth(&self) -> bool {
        self.kind.has_eps() && self.eps > 0.0
    }

    /// Exponent `gamma` with `u(p + v) - u(p) ~ |v|^gamma` transversally to the singular set.
    pub fn cone_exponent(&self) -> f64 {
        let m = self.dim as f64;
        match self.kind {
            FamilyKind::PogorelovEps2 => 1.0,
            FamilyKind::PogorelovEpsN | FamilyKind::TheoremV | FamilyKind::Degenerate => 2.0 / m,
            FamilyKind::Blocki => 2.0 * (1.0 - 1.0 / m),
        }
    }

    /// Limit of the right-hand side as `eps -> 0` away from the singular set.
    pub fn rhs_limit(&self) -> Option<f64> {
        match self.kind {
            FamilyKind::PogorelovEps2 | FamilyKind::TheoremV => Some(1.0),
            FamilyKind::PogorelovEpsN => Some(1.0 / (self.dim * self.dim) as f64),
            FamilyKind::Degenerate => Some(0.0),
            FamilyKind::Blocki => None,
        }
    }

    fn check_dim(&self, z: &ComplexPoint) -> Result<(), FamilyError> {
        if z.dim() != self.dim {
            return Err(FamilyError::DimensionMismatch { expected: self.dim, got: z.dim() });
        }
        Ok(())
    }

    fn head_sq(&self, x: &[f64]) -> f64 {
        (0..self.dim - 1).map(|k| sq(x, k)).sum()
    }

    /// Value at raw interleaved coordinates; no dimension check.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let m = self.dim as f64;
        let w2 = sq(x, self.dim - 1);
        match self.kind {
            FamilyKind::PogorelovEps2 => 2.0 * (1.0 + sq(x, 0)) * (w2 + self.eps).sqrt(),
            FamilyKind::PogorelovEpsN => (1.0 + self.head_sq(x)) * (w2 + self.eps).powf(1.0 / m),
            FamilyKind::TheoremV => m.powf(2.0 / m) * ((1.0 + self.head_sq(x)) * w2.powf(1.0 / m)),
            FamilyKind::Degenerate => m.powf(2.0 / m) * self.head_sq(x) * w2.powf(1.0 / m),
            FamilyKind::Blocki => {
                let tail: f64 = (1..self.dim).map(|k| sq(x, k)).sum();
                (1.0 + sq(x, 0)) * tail.powf(1.0 - 1.0 / m)
            }
        }
    }

    pub fn eval_value(&self, z: &ComplexPoint) -> Result<f64, FamilyError> {
        self.check_dim(z)?;
        Ok(self.value(z.coords()))
    }

    fn check_regular(&self, z: &ComplexPoint) -> Result<(), FamilyError> {
        let on_singular = self.singular_coords().iter().all(|&k| sq(z.coords(), k) == 0.0);
        if self.eps == 0.0 && on_singular {
            return Err(FamilyError::SingularPoint);
        }
        Ok(())
    }

    /// Closed-form complex Hessian `(u_{i jbar})`, Pogorelov kinds only.
    pub fn eval_analytic_hessian(&self, z: &ComplexPoint) -> Result<HermitianForm, FamilyError> {
        self.check_dim(z)?;
        if !self.kind.has_eps() {
            return Err(FamilyError::UnsupportedFamily(self.kind, "Hessian"));
        }
        self.check_regular(z)?;
        let m = self.dim;
        let w = z.z(m - 1);
        let s = w.norm_sqr() + self.eps;
        let a = 1.0 + self.head_sq(z.coords());
        let mut entries = vec![Complex64::new(0.0, 0.0); m * m];
        match self.kind {
            FamilyKind::PogorelovEps2 => {
                entries[0] = Complex64::new(2.0 * s.sqrt(), 0.0);
                entries[1] = z.z(0).conj() * w / s.sqrt();
                entries[3] = Complex64::new(0.5 * a * s.powf(-1.5) * (w.norm_sqr() + 2.0 * self.eps), 0.0);
            }
            _ => {
                let mf = m as f64;
                let n = m - 1;
                for i in 0..n {
                    entries[i * m + i] = Complex64::new(s.powf(1.0 / mf), 0.0);
                    entries[i * m + n] = z.z(i).conj() * w / mf * s.powf(-(n as f64) / mf);
                }
                let ww = a / (mf * mf) * s.powf(-(2.0 * n as f64 + 1.0) / mf) * (w.norm_sqr() + mf * self.eps);
                entries[n * m + n] = Complex64::new(ww, 0.0);
            }
        }
        // lower triangle from the upper one
        for i in 0..m {
            for j in (i + 1)..m {
                entries[j * m + i] = entries[i * m + j].conj();
            }
        }
        Ok(HermitianForm::new(m, entries).expect("m*m entries"))
    }

    /// Closed-form `det(u_{i jbar})`.
    pub fn eval_rhs(&self, z: &ComplexPoint) -> Result<f64, FamilyError> {
        self.check_dim(z)?;
        match self.kind {
            FamilyKind::Blocki => Err(FamilyError::UnsupportedFamily(self.kind, "right-hand side")),
            FamilyKind::TheoremV | FamilyKind::Degenerate => {
                self.check_regular(z)?;
                Ok(self.rhs_limit().expect("defined"))
            }
            _ => {
                self.check_regular(z)?;
                Ok(self.rhs(z.coords()))
            }
        }
    }

    /// Right-hand side at raw coordinates for the smooth Pogorelov kinds.
    #[inline]
    pub fn rhs(&self, x: &[f64]) -> f64 {
        let m = self.dim as f64;
        let w2 = sq(x, self.dim - 1);
        let a = 1.0 + self.head_sq(x);
        match self.kind {
            FamilyKind::PogorelovEps2 => w2 / (w2 + self.eps) + 2.0 * self.eps * a / (w2 + self.eps),
            FamilyKind::PogorelovEpsN => w2 / (m * m) / (w2 + self.eps) + self.eps / m * a / (w2 + self.eps),
            _ => self.rhs_limit().unwrap_or(f64::NAN),
        }
    }

    /// Compares `det` of the analytic Hessian with the closed-form right-hand side.
    pub fn verify_identity(&self, z: &ComplexPoint) -> Result<IdentityCheck, FamilyError> {
        let det_analytic = self.eval_analytic_hessian(z)?.det();
        let rhs = self.eval_rhs(z)?;
        Ok(IdentityCheck { det_analytic, rhs, abs_gap: (det_analytic - rhs).abs() })
    }

    /// As [`verify_identity`](Self::verify_identity) with a central-difference
    /// Hessian of spacing `h`; works for families without an analytic Hessian.
    pub fn verify_identity_fd(&self, z: &ComplexPoint, h: f64) -> Result<IdentityCheck, FamilyError> {
        self.check_dim(z)?;
        let rhs = self.eval_rhs(z)?;
        let det_analytic = self.fd_hessian(z, h).det();
        Ok(IdentityCheck { det_analytic, rhs, abs_gap: (det_analytic - rhs).abs() })
    }

    pub fn fd_hessian(&self, z: &ComplexPoint, h: f64) -> HermitianForm {
        complex_hessian_fd_at(&|x: &[f64]| self.value(x), z, h)
    }
}

/// Sampling and checking options for [`identity_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub points: usize,
    pub seed: u64,
    /// Coordinates are drawn uniformly from `[-radius, radius]`.
    pub radius: f64,
    /// Points with `|w|` at or below this are redrawn.
    pub min_w: f64,
    /// Finite-difference step; `None` uses the analytic Hessian.
    pub fd_step: Option<f64>,
}

impl SweepOptions {
    pub fn new(points: usize, seed: u64) -> Self {
        Self { points, seed, radius: 2.0, min_w: 1e-3, fd_step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySweep {
    pub points: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
    /// Coordinates of the point with the largest gap.
    pub worst_point: Vec<f64>,
    pub worst: IdentityCheck,
}

/// Checks `det(u_{i jbar}) = F` at random points away from the singular set.
/// Point `i` is drawn from stream `i` of the seed.
pub fn identity_sweep(family: &SolutionFamily, opts: &SweepOptions) -> Result<IdentitySweep, FamilyError> {
    if opts.points == 0 || !(opts.radius > opts.min_w && opts.min_w >= 0.0) {
        return Err(FamilyError::InvalidFamily("sweep needs points > 0 and radius > min_w >= 0".into()));
    }
    let m = 2 * family.dim();
    let sing = family.singular_coords();
    let checks = (0..opts.points)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let x = loop {
                let x: Vec<f64> = (0..m).map(|_| rng.random_range(-opts.radius..opts.radius)).collect();
                let w2: f64 = sing.iter().map(|&k| sq(&x, k)).sum();
                if w2.sqrt() > opts.min_w {
                    break x;
                }
            };
            let z = ComplexPoint::new(x).expect("even length");
            let check = match opts.fd_step {
                Some(h) => family.verify_identity_fd(&z, h)?,
                None => family.verify_identity(&z)?,
            };
            Ok((z, check))
        })
        .collect::<Result<Vec<_>, FamilyError>>()?;
    let (worst_idx, _) = checks
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, (_, c))| if c.abs_gap > acc.1 { (i, c.abs_gap) } else { acc });
    let mean_gap = checks.iter().map(|(_, c)| c.abs_gap).sum::<f64>() / opts.points as f64;
    let (z, worst) = &checks[worst_idx];
    Ok(IdentitySweep {
        points: opts.points,
        max_gap: worst.abs_gap,
        mean_gap,
        worst_point: z.coords().to_vec(),
        worst: *worst,
    })
}

impl FamilyKind {
    pub fn has_eps(self) -> bool {
        matches!(self, FamilyKind::PogorelovEps2 | FamilyKind::PogorelovEpsN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> ComplexPoint {
        ComplexPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn value_examples() {
        assert_eq!(SolutionFamily::pogorelov2(1.0).eval_value(&pt(&[0.0; 4])).unwrap(), 2.0);
        assert_eq!(SolutionFamily::theorem_v(2).eval_value(&pt(&[0.0, 0.0, 1.0, 0.0])).unwrap(), 2.0);
        for n in 2..5 {
            let mut x = vec![0.7; 2 * n];
            x[2 * n - 2] = 0.0;
            x[2 * n - 1] = 0.0;
            assert_eq!(SolutionFamily::degenerate(n).eval_value(&pt(&x)).unwrap(), 0.0);
        }
        assert!(matches!(
            SolutionFamily::pogorelov2(1.0).eval_value(&pt(&[0.0; 6])),
            Err(FamilyError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn hessian_examples() {
        let h = SolutionFamily::pogorelov2(0.0).eval_analytic_hessian(&pt(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(h.max_abs_diff(&HermitianForm::from_real_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap()) < 1e-15);
        let h = SolutionFamily::pogorelov2(1.0).eval_analytic_hessian(&pt(&[0.0; 4])).unwrap();
        assert!(h.max_abs_diff(&HermitianForm::diagonal(&[2.0, 1.0])) < 1e-15);
        let z = [0.3, -0.4, 0.0, 0.0];
        let h = SolutionFamily::pogorelov_n(3, 1.0).eval_analytic_hessian(&pt(&[z[0], z[1], 0.5, 0.1, 0.0, 0.0])).unwrap();
        let a = 1.0 + 0.09 + 0.16 + 0.25 + 0.01;
        assert!(h.max_abs_diff(&HermitianForm::diagonal(&[1.0, 1.0, a * 3.0 / 9.0])) < 1e-15);
    }

    #[test]
    fn hessian_refusals() {
        let p = pt(&[0.3, 0.0, 0.0, 0.0]);
        assert_eq!(SolutionFamily::pogorelov2(0.0).eval_analytic_hessian(&p), Err(FamilyError::SingularPoint));
        assert_eq!(SolutionFamily::pogorelov2(0.0).eval_rhs(&p), Err(FamilyError::SingularPoint));
        assert!(matches!(
            SolutionFamily::theorem_v(2).eval_analytic_hessian(&pt(&[0.0, 0.0, 1.0, 0.0])),
            Err(FamilyError::UnsupportedFamily(FamilyKind::TheoremV, _))
        ));
        assert!(matches!(
            SolutionFamily::blocki(3).eval_rhs(&pt(&[0.1; 6])),
            Err(FamilyError::UnsupportedFamily(FamilyKind::Blocki, _))
        ));
        // the continuous limit is still evaluable on the singular set
        assert_eq!(SolutionFamily::pogorelov2(0.0).eval_value(&p).unwrap(), 0.0);
    }

    #[test]
    fn rhs_examples() {
        let f = SolutionFamily::pogorelov2(1.0);
        assert_eq!(f.eval_rhs(&pt(&[0.0; 4])).unwrap(), 2.0);
        let f0 = SolutionFamily::pogorelov2(0.0);
        assert_eq!(f0.eval_rhs(&pt(&[0.4, 2.0, -0.3, 0.1])).unwrap(), 1.0);
        for m in 3..6 {
            let mut x = vec![0.2; 2 * m];
            x[2 * m - 2] = 0.9;
            let v = SolutionFamily::pogorelov_n(m, 0.0).eval_rhs(&pt(&x)).unwrap();
            assert!((v - 1.0 / (m * m) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_at_a_point() {
        let p = pt(&[0.3, -1.2, 0.5, 0.25]);
        for eps in [0.0, 0.01, 0.3, 2.0] {
            let c = SolutionFamily::pogorelov2(eps).verify_identity(&p).unwrap();
            assert!(c.abs_gap <= 1e-10 * (1.0 + c.rhs.abs()), "{c:?}");
        }
    }

    #[test]
    fn scaling_bridge_to_theorem_v() {
        for m in 3..6 {
            let x: Vec<f64> = (0..2 * m).map(|k| 0.1 * k as f64 - 0.35).collect();
            let scale = (m as f64).powf(2.0 / m as f64);
            let lhs = scale * SolutionFamily::pogorelov_n(m, 0.0).value(&x);
            assert!((lhs - SolutionFamily::theorem_v(m).value(&x)).abs() < 1e-14 * lhs.abs());
        }
    }

    #[test]
    fn descriptor_json() {
        let f: SolutionFamily = serde_json::from_str(r#"{"kind": "pogorelov-n", "dim": 4, "eps": 0.5}"#).unwrap();
        assert_eq!(f, SolutionFamily::pogorelov_n(4, 0.5));
        let back: SolutionFamily = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<SolutionFamily>(r#"{"kind": "pogorelov2", "dim": 3}"#).is_err());
        assert!(serde_json::from_str::<SolutionFamily>(r#"{"kind": "pogorelov2", "eps": -1}"#).is_err());
        assert_eq!("theorem-v".parse::<FamilyKind>().unwrap(), FamilyKind::TheoremV);
    }

    #[test]
    fn sweep_is_reproducible() {
        let fam = SolutionFamily::pogorelov2(0.3);
        let opts = SweepOptions::new(100, 7);
        let a = identity_sweep(&fam, &opts).unwrap();
        assert!(a.max_gap < 1e-10, "{a:?}");
        assert_eq!(a, identity_sweep(&fam, &opts).unwrap());
        let fd = identity_sweep(&SolutionFamily::theorem_v(2), &SweepOptions { fd_step: Some(1e-4), ..opts }).unwrap();
        assert!(fd.max_gap < 1e-4, "{fd:?}");
        assert!(identity_sweep(&SolutionFamily::blocki(3), &opts).is_err());
    }
}
