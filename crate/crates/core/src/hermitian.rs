//! Small dense complex-Hermitian linear algebra.
//!
//! Every complex Hessian in the crate passes through [`HermitianForm`]. The
//! dimensions involved are tiny (at most a handful), so everything here is
//! plain Gaussian elimination, Cholesky and cyclic Jacobi on `Vec` storage.
//! The `*_in_place` helpers operate on caller-provided buffers so the grid
//! kernels can run them per node without allocating.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HermitianError {
    #[error("dimension must be at least 1")]
    EmptyForm,
    #[error("expected {expected} entries for a {dim}x{dim} form, got {got}")]
    ShapeMismatch { dim: usize, expected: usize, got: usize },
    #[error("form is singular (|det| = {det:e} below threshold {threshold:e})")]
    SingularForm { det: f64, threshold: f64 },
    #[error("form is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

/// An `n x n` complex Hermitian matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianForm {
    dim: usize,
    entries: Vec<Complex64>,
}

/// Result of [`HermitianForm::psd_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    pub is_pd: bool,
}

impl HermitianForm {
    /// Builds a form from row-major entries, replacing `A` by `(A + A*)/2`.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self, HermitianError> {
        if dim == 0 {
            return Err(HermitianError::EmptyForm);
        }
        if entries.len() != dim * dim {
            return Err(HermitianError::ShapeMismatch {
                dim,
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut form = Self { dim, entries };
        form.symmetrize();
        Ok(form)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self, HermitianError> {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self::new(dim, entries)
    }

    /// Real symmetric input, e.g. `[[2.0, 1.0], [1.0, 1.0]]`.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, HermitianError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(HermitianError::ShapeMismatch {
                dim,
                expected: dim * dim,
                got: rows.iter().map(|r| r.len()).sum(),
            });
        }
        Self::from_fn(dim, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self::diagonal(&vec![0.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        assert!(dim > 0, "diagonal form needs at least one entry");
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = Complex64::new(*d, 0.0);
        }
        Self { dim, entries }
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self.entries[i * n + i];
            self.entries[i * n + i] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = (self.entries[i * n + j] + self.entries[j * n + i].conj()) * 0.5;
                self.entries[i * n + j] = avg;
                self.entries[j * n + i] = avg.conj();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// Largest entry modulus.
    pub fn scale(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add_scaled_identity(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.entries[i * self.dim + i] += c;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * c).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Vec<Complex64> {
        matmul(self.dim, &self.entries, &other.entries)
    }

    /// `U* H U` for a square (ideally unitary) `U` given row-major.
    pub fn congruence(&self, u: &[Complex64]) -> Self {
        let n = self.dim;
        let u_star: Vec<Complex64> = (0..n * n).map(|k| u[(k % n) * n + k / n].conj()).collect();
        let hu = matmul(n, &self.entries, u);
        Self::new(n, matmul(n, &u_star, &hu)).expect("square product")
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Determinant; the imaginary residue of the elimination is discarded.
    pub fn det(&self) -> f64 {
        let mut buf = self.entries.clone();
        let det = det_in_place(self.dim, &mut buf);
        debug_assert!(
            det.im.abs() <= 1e-12 * det.norm().max(self.scale().powi(self.dim as i32)).max(f64::MIN_POSITIVE),
            "complex determinant residue {det}"
        );
        det.re
    }

    /// `log det`, summing the logs of Cholesky pivots.
    pub fn log_det(&self) -> Result<f64, HermitianError> {
        let mut buf = self.entries.clone();
        log_det_in_place(self.dim, &mut buf)
    }

    /// Inverse, refused when `|det|` is below `1e-14 * scale` times the
    /// product of all eigenvalue moduli except the smallest, i.e. when the
    /// smallest eigenvalue is negligible against the entries.
    pub fn inverse(&self) -> Result<Self, HermitianError> {
        let n = self.dim;
        let det = self.det();
        let mut moduli: Vec<f64> = self.eigenvalues().iter().map(|l| l.abs()).collect();
        moduli.sort_by(f64::total_cmp);
        let threshold = 1e-14 * self.scale() * moduli[1..].iter().product::<f64>();
        if !(det.abs() > threshold) {
            return Err(HermitianError::SingularForm { det, threshold });
        }
        let mut a = self.entries.clone();
        let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
        if !inverse_in_place(n, &mut a, &mut inv) {
            return Err(HermitianError::SingularForm { det, threshold });
        }
        Self::new(n, inv)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let m = 2 * n;
        // Real embedding [[A, -B], [B, A]] of A + iB; each eigenvalue appears twice.
        let mut s = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                s[i * m + j] = z.re;
                s[(i + n) * m + j + n] = z.re;
                s[i * m + j + n] = -z.im;
                s[(i + n) * m + j] = z.im;
            }
        }
        let mut eig = jacobi_eigenvalues(m, &mut s);
        eig.sort_by(|a, b| a.total_cmp(b));
        eig.into_iter().step_by(2).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn psd_report(&self, tol: f64) -> PsdReport {
        let min_eigenvalue = self.min_eigenvalue();
        PsdReport { min_eigenvalue, is_psd: min_eigenvalue >= -tol, is_pd: min_eigenvalue > tol }
    }
}

pub fn herm_det(h: &HermitianForm) -> f64 {
    h.det()
}

pub fn herm_inverse(h: &HermitianForm) -> Result<HermitianForm, HermitianError> {
    h.inverse()
}

pub fn psd_report(h: &HermitianForm, tol: f64) -> PsdReport {
    h.psd_report(tol)
}

pub fn log_det(h: &HermitianForm) -> Result<f64, HermitianError> {
    h.log_det()
}

fn matmul(n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; destroys `a`.
pub(crate) fn det_in_place(n: usize, a: &mut [Complex64]) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))
            .unwrap();
        if a[pivot * n + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in (col + 1)..n {
            let factor = a[r * n + col] / p;
            if factor.norm() != 0.0 {
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= factor * v;
                }
            }
        }
    }
    det
}

/// In-place `LDL*`: on success returns `sum log d_i`. Destroys `a`.
pub(crate) fn log_det_in_place(n: usize, a: &mut [Complex64]) -> Result<f64, HermitianError> {
    let mut acc = 0.0;
    for k in 0..n {
        let d = a[k * n + k].re;
        if !(d > 0.0) {
            return Err(HermitianError::NotPositiveDefinite { pivot: k, value: d });
        }
        acc += d.ln();
        for i in (k + 1)..n {
            let lik = a[i * n + k] / d;
            for j in (k + 1)..=i {
                let v = lik * a[k * n + j];
                a[i * n + j] -= v;
            }
        }
        // mirror updated lower triangle into the upper half for the next pivots
        for i in (k + 1)..n {
            for j in (i + 1)..n {
                a[i * n + j] = a[j * n + i].conj();
            }
        }
    }
    Ok(acc)
}

/// Gauss-Jordan inverse with partial pivoting; `false` if a zero pivot appears.
pub(crate) fn inverse_in_place(n: usize, a: &mut [Complex64], inv: &mut [Complex64]) -> bool {
    for v in inv.iter_mut() {
        *v = Complex64::new(0.0, 0.0);
    }
    for i in 0..n {
        inv[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))
            .unwrap();
        if a[pivot * n + col].norm() == 0.0 {
            return false;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let p = a[col * n + col].inv();
        for j in 0..n {
            a[col * n + j] *= p;
            inv[col * n + j] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col];
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let av = a[col * n + j];
                let iv = inv[col * n + j];
                a[r * n + j] -= factor * av;
                inv[r * n + j] -= factor * iv;
            }
        }
    }
    true
}

/// Cyclic Jacobi on a real symmetric `m x m` matrix; returns the diagonal.
fn jacobi_eigenvalues(m: usize, s: &mut [f64]) -> Vec<f64> {
    let frob: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i * m + j] * s[i * m + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = s[p * m + p];
                let aqq = s[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = c * skp - sn * skq;
                    s[k * m + q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = c * spk - sn * sqk;
                    s[q * m + k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..m).map(|i| s[i * m + i]).collect()
}
