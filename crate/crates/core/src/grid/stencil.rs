//! Central-difference stencils shared by grid fields and point evaluations.
//!
//! A probe returns the sampled value after moving `step` nodes along each
//! listed axis. Pure second differences use the 3-point stencil, mixed ones
//! the 4-point cross stencil.

use num_complex::Complex64;

use super::ComplexPoint;
use crate::hermitian::HermitianForm;

#[inline(always)]
fn pure<P: FnMut(&[(usize, i32)]) -> f64>(probe: &mut P, center: f64, a: usize, h: f64) -> f64 {
    (probe(&[(a, 1)]) - 2.0 * center + probe(&[(a, -1)])) / (h * h)
}

#[inline(always)]
fn mixed<P: FnMut(&[(usize, i32)]) -> f64>(probe: &mut P, a: usize, b: usize, ha: f64, hb: f64) -> f64 {
    (probe(&[(a, 1), (b, 1)]) - probe(&[(a, 1), (b, -1)]) - probe(&[(a, -1), (b, 1)])
        + probe(&[(a, -1), (b, -1)]))
        / (4.0 * ha * hb)
}

/// Complex Hessian `u_{i jbar} = 1/4[(u_{x_i x_j} + u_{y_i y_j}) + i(u_{x_i y_j} - u_{y_i x_j})]`
/// written row-major into `out` (length `n*n`).
#[inline]
pub(crate) fn wirtinger_hessian<P>(n: usize, spacings: &[f64], center: f64, mut probe: P, out: &mut [Complex64])
where
    P: FnMut(&[(usize, i32)]) -> f64,
{
    for i in 0..n {
        let (xi, yi) = (2 * i, 2 * i + 1);
        let d = 0.25 * (pure(&mut probe, center, xi, spacings[xi]) + pure(&mut probe, center, yi, spacings[yi]));
        out[i * n + i] = Complex64::new(d, 0.0);
        for j in (i + 1)..n {
            let (xj, yj) = (2 * j, 2 * j + 1);
            let re = 0.25
                * (mixed(&mut probe, xi, xj, spacings[xi], spacings[xj])
                    + mixed(&mut probe, yi, yj, spacings[yi], spacings[yj]));
            let im = 0.25
                * (mixed(&mut probe, xi, yj, spacings[xi], spacings[yj])
                    - mixed(&mut probe, yi, xj, spacings[yi], spacings[xj]));
            out[i * n + j] = Complex64::new(re, im);
            out[j * n + i] = Complex64::new(re, -im);
        }
    }
}

/// Full real `m x m` Hessian (`m = 2n`), symmetric by construction.
#[inline]
pub(crate) fn real_hessian<P>(m: usize, spacings: &[f64], center: f64, mut probe: P, out: &mut [f64])
where
    P: FnMut(&[(usize, i32)]) -> f64,
{
    for a in 0..m {
        out[a * m + a] = pure(&mut probe, center, a, spacings[a]);
        for b in (a + 1)..m {
            let v = mixed(&mut probe, a, b, spacings[a], spacings[b]);
            out[a * m + b] = v;
            out[b * m + a] = v;
        }
    }
}

fn point_probe<'a, F: Fn(&[f64]) -> f64>(
    f: &'a F,
    base: &'a [f64],
    h: f64,
    buf: &'a mut Vec<f64>,
) -> impl FnMut(&[(usize, i32)]) -> f64 + 'a {
    move |moves| {
        buf.clear();
        buf.extend_from_slice(base);
        for &(axis, step) in moves {
            buf[axis] += step as f64 * h;
        }
        f(buf)
    }
}

/// Complex Hessian of `f` at `at` using spacing `h` on every real axis.
pub fn complex_hessian_fd_at<F: Fn(&[f64]) -> f64>(f: &F, at: &ComplexPoint, h: f64) -> HermitianForm {
    let n = at.dim();
    let spacings = vec![h; 2 * n];
    let center = f(at.coords());
    let mut buf = Vec::with_capacity(2 * n);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    wirtinger_hessian(n, &spacings, center, point_probe(f, at.coords(), h, &mut buf), &mut out);
    HermitianForm::new(n, out).expect("n*n entries")
}

/// Real `2n x 2n` Hessian of `f` at `at`, row-major.
pub fn real_hessian_fd_at<F: Fn(&[f64]) -> f64>(f: &F, at: &ComplexPoint, h: f64) -> Vec<f64> {
    let m = at.coords().len();
    let spacings = vec![h; m];
    let center = f(at.coords());
    let mut buf = Vec::with_capacity(m);
    let mut out = vec![0.0; m * m];
    real_hessian(m, &spacings, center, point_probe(f, at.coords(), h, &mut buf), &mut out);
    out
}
