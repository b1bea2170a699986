//! Matrix-free linearized Monge–Ampère stencil.
//!
//! At each interior node the operator is `v -> tr(B CH(v))` where `CH` is
//! the finite-difference complex Hessian and `B` the inverse of the complex
//! Hessian of the current iterate. `B` is stored as `n^2` reals per node:
//! the `n` diagonal entries followed by `(Re, Im)` of `B_ij` for `i < j`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::{stencil, GridDomain, MAX_GRID_DIM, REDUCTION_BLOCK};
use crate::hermitian::{inverse_in_place, log_det_in_place, HermitianForm};

/// Node layout of one grid level.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub n: usize,
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub h: Vec<f64>,
    pub len: usize,
    /// Flat index of node 0 of every row (last axis) whose other indices are interior.
    pub rows: Vec<usize>,
    /// Parity of the row's multi-index, bit `a` for axis `a`.
    pub row_parity: Vec<u32>,
}

impl Geometry {
    pub fn new(dims: Vec<usize>, h: Vec<f64>) -> Self {
        let m = dims.len();
        let mut strides = vec![1; m];
        for a in (0..m - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let len = strides[0] * dims[0];
        let last = dims[m - 1];
        let mut rows = Vec::new();
        let mut row_parity = Vec::new();
        let mut multi = vec![0usize; m - 1];
        for r in 0..len / last {
            let mut rem = r;
            for a in (0..m - 1).rev() {
                multi[a] = rem % dims[a];
                rem /= dims[a];
            }
            if multi.iter().zip(&dims).all(|(&i, &p)| i >= 1 && i + 1 < p) {
                rows.push(r * last);
                row_parity.push(multi.iter().enumerate().map(|(a, &i)| ((i & 1) as u32) << a).sum());
            }
        }
        Self { n: m / 2, dims, strides, h, len, rows, row_parity }
    }

    pub fn from_domain(d: &GridDomain) -> Self {
        Self::new(d.points_per_axis().to_vec(), d.spacings())
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn last(&self) -> usize {
        self.dims[self.axes() - 1]
    }

    pub fn interior_count(&self) -> usize {
        self.rows.len() * (self.last() - 2)
    }

    pub fn coef_len(&self) -> usize {
        self.n * self.n
    }

    pub fn coarsen(&self) -> Option<Self> {
        if self.dims.iter().any(|&p| p < 5 || (p - 1) % 2 != 0) {
            return None;
        }
        Some(Self::new(
            self.dims.iter().map(|p| (p - 1) / 2 + 1).collect(),
            self.h.iter().map(|h| 2.0 * h).collect(),
        ))
    }

    /// Calls `f(idx)` for every interior node, rows in parallel.
    pub fn for_each_interior<F: Fn(usize) + Sync>(&self, f: F) {
        let last = self.last();
        self.rows.par_iter().for_each(|&base| {
            for i in 1..last - 1 {
                f(base + i);
            }
        });
    }
}

/// Read access shared by plain slices and the colored Gauss–Seidel view.
pub(crate) trait NodeRead {
    fn at(&self, i: usize) -> f64;
}

impl NodeRead for [f64] {
    #[inline(always)]
    fn at(&self, i: usize) -> f64 {
        self[i]
    }
}

/// Slice shared across threads during a colored sweep. Threads write only
/// nodes of the current color and read only nodes of other colors, which
/// the stencil guarantees never coincide.
pub(crate) struct ColoredView {
    ptr: *mut f64,
    len: usize,
}

unsafe impl Sync for ColoredView {}
unsafe impl Send for ColoredView {}

impl ColoredView {
    pub fn new(v: &mut [f64]) -> Self {
        Self { ptr: v.as_mut_ptr(), len: v.len() }
    }

    /// # Safety
    /// No other thread may access node `i` concurrently.
    #[inline(always)]
    pub unsafe fn write(&self, i: usize, val: f64) {
        debug_assert!(i < self.len);
        self.ptr.add(i).write(val);
    }
}

impl NodeRead for ColoredView {
    #[inline(always)]
    fn at(&self, i: usize) -> f64 {
        debug_assert!(i < self.len);
        unsafe { self.ptr.add(i).read() }
    }
}

/// Per-node inverse Hessian coefficients.
#[derive(Debug, Clone)]
pub(crate) struct Coefficients {
    pub nc: usize,
    pub data: Vec<f64>,
}

impl Coefficients {
    pub fn identity(geo: &Geometry) -> Self {
        let nc = geo.coef_len();
        let mut data = vec![0.0; geo.len * nc];
        for node in data.chunks_mut(nc) {
            node[..geo.n].fill(1.0);
        }
        Self { nc, data }
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.nc..(idx + 1) * self.nc]
    }

    pub fn form(&self, n: usize, idx: usize) -> HermitianForm {
        let c = self.node(idx);
        let mut e = vec![Complex64::new(0.0, 0.0); n * n];
        let mut k = n;
        for i in 0..n {
            e[i * n + i] = Complex64::new(c[i], 0.0);
            for j in (i + 1)..n {
                e[i * n + j] = Complex64::new(c[k], c[k + 1]);
                e[j * n + i] = Complex64::new(c[k], -c[k + 1]);
                k += 2;
            }
        }
        HermitianForm::new(n, e).expect("n*n entries")
    }

    /// Values at coarse nodes `2 I` of the fine grid.
    pub fn inject(&self, fine: &Geometry, coarse: &Geometry) -> Self {
        let nc = self.nc;
        let m = fine.axes();
        let mut data = vec![0.0; coarse.len * nc];
        data.par_chunks_mut(nc).enumerate().for_each(|(ci, out)| {
            let mut rem = ci;
            let mut fi = 0;
            for a in (0..m).rev() {
                let i = rem % coarse.dims[a];
                rem /= coarse.dims[a];
                fi += 2 * i * fine.strides[a];
            }
            out.copy_from_slice(self.node(fi));
        });
        Self { nc, data }
    }
}

#[inline(always)]
fn pure<V: NodeRead + ?Sized>(v: &V, i: usize, s: usize, c: f64, ih2: f64) -> f64 {
    (v.at(i + s) + v.at(i - s) - 2.0 * c) * ih2
}

#[inline(always)]
fn mixed<V: NodeRead + ?Sized>(v: &V, i: usize, sa: usize, sb: usize, q: f64) -> f64 {
    (v.at(i + sa + sb) - v.at(i + sa - sb) - v.at(i - sa + sb) + v.at(i - sa - sb)) * q
}

/// Precomputed stencil weights.
#[derive(Debug, Clone)]
pub(crate) struct StencilWeights {
    ih2: [f64; 2 * MAX_GRID_DIM],
    q: [[f64; 2 * MAX_GRID_DIM]; 2 * MAX_GRID_DIM],
}

impl StencilWeights {
    pub fn new(geo: &Geometry) -> Self {
        let mut ih2 = [0.0; 2 * MAX_GRID_DIM];
        let mut q = [[0.0; 2 * MAX_GRID_DIM]; 2 * MAX_GRID_DIM];
        for a in 0..geo.axes() {
            ih2[a] = 1.0 / (geo.h[a] * geo.h[a]);
            for b in 0..geo.axes() {
                q[a][b] = 1.0 / (4.0 * geo.h[a] * geo.h[b]);
            }
        }
        Self { ih2, q }
    }
}

/// `(L v)(i)` and the diagonal entry of `L` at interior node `i`.
#[inline(always)]
pub(crate) fn apply_at<V: NodeRead + ?Sized>(
    geo: &Geometry,
    w: &StencilWeights,
    c: &[f64],
    v: &V,
    i: usize,
) -> (f64, f64) {
    let n = geo.n;
    let s = &geo.strides;
    let center = v.at(i);
    let mut acc = 0.0;
    let mut diag = 0.0;
    for k in 0..n {
        let (x, y) = (2 * k, 2 * k + 1);
        let lap = pure(v, i, s[x], center, w.ih2[x]) + pure(v, i, s[y], center, w.ih2[y]);
        acc += 0.25 * c[k] * lap;
        diag -= 0.5 * c[k] * (w.ih2[x] + w.ih2[y]);
    }
    let mut k = n;
    for a in 0..n {
        let (xa, ya) = (2 * a, 2 * a + 1);
        for b in (a + 1)..n {
            let (xb, yb) = (2 * b, 2 * b + 1);
            let re = mixed(v, i, s[xa], s[xb], w.q[xa][xb]) + mixed(v, i, s[ya], s[yb], w.q[ya][yb]);
            let im = mixed(v, i, s[xa], s[yb], w.q[xa][yb]) - mixed(v, i, s[ya], s[xb], w.q[ya][xb]);
            acc += 0.5 * (c[k] * re + c[k + 1] * im);
            k += 2;
        }
    }
    (acc, diag)
}

/// `out = L v` on interior nodes, zero on the boundary.
pub(crate) fn apply(geo: &Geometry, coef: &Coefficients, v: &[f64], out: &mut [f64]) {
    let w = StencilWeights::new(geo);
    out.fill(0.0);
    let view = ColoredView::new(out);
    geo.for_each_interior(|i| {
        let (lv, _) = apply_at(geo, &w, coef.node(i), v, i);
        // SAFETY: each interior node is visited by exactly one row task.
        unsafe { view.write(i, lv) };
    });
}

/// `out = b - L v` on interior nodes, zero on the boundary.
pub(crate) fn residual(geo: &Geometry, coef: &Coefficients, v: &[f64], b: &[f64], out: &mut [f64]) {
    let w = StencilWeights::new(geo);
    out.fill(0.0);
    let view = ColoredView::new(out);
    geo.for_each_interior(|i| {
        let (lv, _) = apply_at(geo, &w, coef.node(i), v, i);
        // SAFETY: each interior node is visited by exactly one row task.
        unsafe { view.write(i, b[i] - lv) };
    });
}

/// Outcome of evaluating `log det CH(u)` at every interior node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum HessianScan {
    /// All pivots exceeded the guard; carries the max-norm of `log det - rhs`.
    Ok { max_residual: f64 },
    /// First interior node (in flat order) whose Hessian failed the guard.
    NotPd { node: usize, pivot: f64 },
}

fn node_hessian(geo: &Geometry, u: &[f64], i: usize, out: &mut [Complex64]) {
    let n = geo.n;
    let s = &geo.strides;
    stencil::wirtinger_hessian(
        n,
        &geo.h,
        u[i],
        |moves| {
            let mut j = i as isize;
            for &(a, step) in moves {
                j += step as isize * s[a] as isize;
            }
            u[j as usize]
        },
        &mut out[..n * n],
    );
}

fn min_pivot(n: usize, h: &[Complex64]) -> f64 {
    // LDL* pivots of a copy
    let mut a = [Complex64::new(0.0, 0.0); MAX_GRID_DIM * MAX_GRID_DIM];
    a[..n * n].copy_from_slice(&h[..n * n]);
    let mut min = f64::INFINITY;
    for k in 0..n {
        let d = a[k * n + k].re;
        min = min.min(d);
        if !(d > 0.0) {
            return d;
        }
        for i in (k + 1)..n {
            let lik = a[i * n + k] / d;
            for j in (k + 1)..n {
                let v = lik * a[k * n + j];
                a[i * n + j] -= v;
            }
        }
    }
    min
}

/// Writes `log det CH(u) - rhs` into `res` (zero on the boundary) and
/// reports the max-norm, or the first node whose Hessian has an `LDL*`
/// pivot `<= guard`.
pub(crate) fn log_det_residual(geo: &Geometry, u: &[f64], rhs: &[f64], guard: f64, res: &mut [f64]) -> HessianScan {
    let n = geo.n;
    let last = geo.last();
    res.fill(0.0);
    let view = ColoredView::new(res);
    let per_row: Vec<Result<f64, (usize, f64)>> = geo
        .rows
        .par_iter()
        .map(|&base| {
            let mut h = [Complex64::new(0.0, 0.0); MAX_GRID_DIM * MAX_GRID_DIM];
            let mut max: f64 = 0.0;
            for i in base + 1..base + last - 1 {
                node_hessian(geo, u, i, &mut h);
                let p = min_pivot(n, &h);
                if !(p > guard) {
                    return Err((i, p));
                }
                let ld = log_det_in_place(n, &mut h[..n * n]).expect("pivots checked");
                let r = ld - rhs[i];
                // SAFETY: each interior node is visited by exactly one row task.
                unsafe { view.write(i, r) };
                max = max.max(r.abs());
            }
            Ok(max)
        })
        .collect();
    let mut max: f64 = 0.0;
    for r in per_row {
        match r {
            Ok(m) => max = max.max(m),
            Err((node, pivot)) => return HessianScan::NotPd { node, pivot },
        }
    }
    HessianScan::Ok { max_residual: max }
}

/// Inverse complex Hessians of `u` at interior nodes (identity on the boundary).
/// Assumes [`log_det_residual`] has already accepted `u`.
pub(crate) fn inverse_hessians(geo: &Geometry, u: &[f64], coef: &mut Coefficients) {
    let n = geo.n;
    let nc = coef.nc;
    let last = geo.last();
    for node in coef.data.chunks_mut(nc) {
        node.fill(0.0);
        node[..n].fill(1.0);
    }
    let view = ColoredView::new(&mut coef.data);
    geo.rows.par_iter().for_each(|&base| {
        let mut h = [Complex64::new(0.0, 0.0); MAX_GRID_DIM * MAX_GRID_DIM];
        let mut inv = [Complex64::new(0.0, 0.0); MAX_GRID_DIM * MAX_GRID_DIM];
        for i in base + 1..base + last - 1 {
            node_hessian(geo, u, i, &mut h);
            let ok = inverse_in_place(n, &mut h[..n * n], &mut inv[..n * n]);
            debug_assert!(ok);
            let mut k = n;
            // SAFETY: node i's coefficient block is written by this row task only.
            unsafe {
                for a in 0..n {
                    view.write(i * nc + a, inv[a * n + a].re);
                    for b in (a + 1)..n {
                        // average the two triangles to stay exactly Hermitian
                        let z = 0.5 * (inv[a * n + b] + inv[b * n + a].conj());
                        view.write(i * nc + k, z.re);
                        view.write(i * nc + k + 1, z.im);
                        k += 2;
                    }
                }
            }
        }
    });
}

/// Deterministic dot product over blocks of [`REDUCTION_BLOCK`].
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCTION_BLOCK)
        .zip(b.par_chunks(REDUCTION_BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
