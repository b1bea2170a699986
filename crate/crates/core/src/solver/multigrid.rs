//! Geometric multigrid V-cycle for the linearized operator.
//!
//! Coarse levels halve every axis and reuse the fine coefficients at the
//! coincident nodes. Smoothing is Gauss–Seidel ordered by the parity of the
//! multi-index: nodes with equal parity never appear in each other's
//! stencil, so each color is updated in parallel without races.

use rayon::prelude::*;

use super::operator::{apply_at, residual, ColoredView, Coefficients, Geometry, NodeRead, StencilWeights};

/// Interior node count at or below which a level is solved by repeated sweeps.
const COARSEST_NODES: usize = 512;
const COARSEST_SWEEPS: usize = 40;

/// One forward (or backward) pass over all `2^m` colors.
pub(crate) fn gauss_seidel(geo: &Geometry, coef: &Coefficients, x: &mut [f64], b: &[f64], reverse: bool) {
    let m = geo.axes();
    let last = geo.last();
    let w = StencilWeights::new(geo);
    let colors = 1u32 << m;
    let view = ColoredView::new(x);
    let row_bits = (1u32 << (m - 1)) - 1;
    for step in 0..colors {
        let color = if reverse { colors - 1 - step } else { step };
        let start = if (color >> (m - 1)) & 1 == 1 { 1 } else { 2 };
        geo.rows.par_iter().zip(geo.row_parity.par_iter()).for_each(|(&base, &par)| {
            if par != (color & row_bits) {
                return;
            }
            let mut i = start;
            while i < last - 1 {
                let idx = base + i;
                let (lx, diag) = apply_at(geo, &w, coef.node(idx), &view, idx);
                let new = view.at(idx) + (b[idx] - lx) / diag;
                // SAFETY: same-color nodes are never stencil neighbors.
                unsafe { view.write(idx, new) };
                i += 2;
            }
        });
    }
}

/// Full-weighting restriction along one axis.
fn restrict_axis(src: &[f64], dims: &[usize], axis: usize) -> (Vec<f64>, Vec<usize>) {
    let len = dims[axis];
    let new_len = (len - 1) / 2 + 1;
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![0.0; outer * new_len * inner];
    out.par_chunks_mut(inner).enumerate().for_each(|(row, dst)| {
        let (o, c) = (row / new_len, row % new_len);
        let at = |f: usize| &src[(o * len + f) * inner..(o * len + f + 1) * inner];
        if c == 0 || c == new_len - 1 {
            dst.copy_from_slice(at(2 * c));
        } else {
            let (l, mid, r) = (at(2 * c - 1), at(2 * c), at(2 * c + 1));
            for k in 0..inner {
                dst[k] = 0.25 * l[k] + 0.5 * mid[k] + 0.25 * r[k];
            }
        }
    });
    let mut nd = dims.to_vec();
    nd[axis] = new_len;
    (out, nd)
}

pub(crate) fn restrict(src: &[f64], dims: &[usize]) -> Vec<f64> {
    let mut cur = src.to_vec();
    let mut d = dims.to_vec();
    for a in 0..dims.len() {
        let (next, nd) = restrict_axis(&cur, &d, a);
        cur = next;
        d = nd;
    }
    cur
}

/// Interpolation to the doubled grid along one axis. With `cubic` the odd
/// nodes use 4-point Lagrange weights (one-sided next to the ends),
/// otherwise the midpoint average.
fn prolong_axis(src: &[f64], dims: &[usize], axis: usize, cubic: bool) -> (Vec<f64>, Vec<usize>) {
    let len = dims[axis];
    let new_len = 2 * (len - 1) + 1;
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![0.0; outer * new_len * inner];
    let cubic = cubic && len >= 4;
    out.par_chunks_mut(inner).enumerate().for_each(|(row, dst)| {
        let (o, f) = (row / new_len, row % new_len);
        let at = |c: usize| &src[(o * len + c) * inner..(o * len + c + 1) * inner];
        if f % 2 == 0 {
            dst.copy_from_slice(at(f / 2));
            return;
        }
        let c = f / 2;
        if !cubic {
            let (l, r) = (at(c), at(c + 1));
            for k in 0..inner {
                dst[k] = 0.5 * (l[k] + r[k]);
            }
            return;
        }
        let (first, w) = if c == 0 {
            (0, [5.0, 15.0, -5.0, 1.0])
        } else if c == len - 2 {
            (len - 4, [1.0, -5.0, 15.0, 5.0])
        } else {
            (c - 1, [-1.0, 9.0, 9.0, -1.0])
        };
        let s = [at(first), at(first + 1), at(first + 2), at(first + 3)];
        for k in 0..inner {
            dst[k] = (w[0] * s[0][k] + w[1] * s[1][k] + w[2] * s[2][k] + w[3] * s[3][k]) / 16.0;
        }
    });
    let mut nd = dims.to_vec();
    nd[axis] = new_len;
    (out, nd)
}

pub(crate) fn prolong(src: &[f64], coarse_dims: &[usize], cubic: bool) -> Vec<f64> {
    let mut cur = src.to_vec();
    let mut d = coarse_dims.to_vec();
    for a in 0..coarse_dims.len() {
        let (next, nd) = prolong_axis(&cur, &d, a, cubic);
        cur = next;
        d = nd;
    }
    cur
}

fn zero_boundary(geo: &Geometry, v: &mut [f64]) {
    let mut interior = vec![false; geo.len];
    let last = geo.last();
    for &base in &geo.rows {
        interior[base + 1..base + last - 1].fill(true);
    }
    v.par_iter_mut().zip(interior.par_iter()).for_each(|(x, &keep)| {
        if !keep {
            *x = 0.0;
        }
    });
}

struct Level {
    geo: Geometry,
    coef: Coefficients,
}

/// Grid hierarchy with coefficients injected from the finest level.
pub(crate) struct Hierarchy {
    levels: Vec<Level>,
    pub pre: usize,
    pub post: usize,
}

impl Hierarchy {
    pub fn new(geo: &Geometry, coef: &Coefficients) -> Self {
        let empty = Coefficients { nc: coef.nc, data: Vec::new() };
        let mut levels = vec![Level { geo: geo.clone(), coef: empty }];
        loop {
            let top = levels.last().expect("non-empty");
            if top.geo.interior_count() <= COARSEST_NODES {
                break;
            }
            let Some(next) = top.geo.coarsen() else { break };
            let src = if levels.len() == 1 { coef } else { &top.coef };
            let injected = src.inject(&top.geo, &next);
            levels.push(Level { geo: next, coef: injected });
        }
        Self { levels, pre: 2, post: 2 }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle for `L x = b` starting from `x = 0`; `fine` holds the
    /// finest-level coefficients, which the hierarchy does not copy.
    pub fn vcycle(&self, fine: &Coefficients, b: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        self.cycle(0, fine, b, x);
    }

    fn cycle(&self, l: usize, fine: &Coefficients, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let coef = if l == 0 { fine } else { &level.coef };
        let geo = &level.geo;
        if l + 1 == self.levels.len() {
            for s in 0..COARSEST_SWEEPS {
                gauss_seidel(geo, coef, x, b, s % 2 == 1);
            }
            return;
        }
        for s in 0..self.pre {
            gauss_seidel(geo, coef, x, b, s % 2 == 1);
        }
        let mut r = vec![0.0; geo.len];
        residual(geo, coef, x, b, &mut r);
        let mut rc = restrict(&r, &geo.dims);
        drop(r);
        let coarse = &self.levels[l + 1].geo;
        zero_boundary(coarse, &mut rc);
        let mut ec = vec![0.0; coarse.len];
        self.cycle(l + 1, fine, &rc, &mut ec);
        drop(rc);
        let mut e = prolong(&ec, &coarse.dims, false);
        drop(ec);
        zero_boundary(geo, &mut e);
        x.par_iter_mut().zip(e.par_iter()).for_each(|(xi, ei)| *xi += ei);
        drop(e);
        for s in 0..self.post {
            gauss_seidel(geo, coef, x, b, s % 2 == 0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::operator::{apply, norm2};

    #[test]
    fn transfer_shapes_and_constants() {
        let dims = vec![5, 9];
        let ones = vec![1.0; 45];
        let r = restrict(&ones, &dims);
        assert_eq!(r.len(), 3 * 5);
        assert!(r.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let p = prolong(&r, &[3, 5], true);
        assert_eq!(p.len(), 45);
        assert!(p.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn cubic_prolongation_is_exact_on_cubics() {
        let cd = [5, 5];
        let f = |x: f64, y: f64| x * x * x - 2.0 * x * y * y + y + 0.5;
        let coarse: Vec<f64> = (0..25).map(|k| f((k / 5) as f64, (k % 5) as f64)).collect();
        let fine = prolong(&coarse, &cd, true);
        for k in 0..81 {
            let (x, y) = ((k / 9) as f64 * 0.5, (k % 9) as f64 * 0.5);
            assert!((fine[k] - f(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_seidel_ordering_is_valid() {
        // with identity coefficients one colored sweep must match a sweep done
        // node by node in color order
        let geo = Geometry::new(vec![7, 7, 7, 7], vec![0.3; 4]);
        let coef = Coefficients::identity(&geo);
        let b: Vec<f64> = (0..geo.len).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut x = vec![0.0; geo.len];
        gauss_seidel(&geo, &coef, &mut x, &b, false);
        let mut y = vec![0.0; geo.len];
        let w = StencilWeights::new(&geo);
        for color in 0..16u32 {
            for idx in 0..geo.len {
                let mut rem = idx;
                let mut par = 0u32;
                let mut interior = true;
                for a in (0..4).rev() {
                    let i = rem % 7;
                    rem /= 7;
                    par |= ((i & 1) as u32) << a;
                    interior &= i >= 1 && i <= 5;
                }
                if interior && par == color {
                    let (lx, d) = apply_at(&geo, &w, coef.node(idx), y.as_slice(), idx);
                    y[idx] += (b[idx] - lx) / d;
                }
            }
        }
        assert_eq!(x, y);
    }

    #[test]
    fn vcycle_contracts() {
        let geo = Geometry::new(vec![17, 17, 17, 17], vec![2.0 / 16.0; 4]);
        let mut coef = Coefficients::identity(&geo);
        // anisotropic, complex off-diagonal
        for node in coef.data.chunks_mut(4) {
            node.copy_from_slice(&[1.5, 0.7, 0.3, -0.4]);
        }
        let h = Hierarchy::new(&geo, &coef);
        assert!(h.depth() >= 3);
        let b: Vec<f64> = (0..geo.len).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
        let mut bb = b.clone();
        zero_boundary(&geo, &mut bb);
        let mut x = vec![0.0; geo.len];
        let mut corr = vec![0.0; geo.len];
        let mut r = bb.clone();
        let r0 = norm2(&r);
        for _ in 0..6 {
            h.vcycle(&coef, &r, &mut corr);
            for (xi, ci) in x.iter_mut().zip(&corr) {
                *xi += ci;
            }
            residual(&geo, &coef, &x, &bb, &mut r);
        }
        let mut lx = vec![0.0; geo.len];
        apply(&geo, &coef, &x, &mut lx);
        assert!(norm2(&r) < 5e-3 * r0, "{} vs {}", norm2(&r), r0);
    }
}
