//! Complex Laplacian and discrete `L^p` / `W^{2,p}` norms.
//!
//! Quadrature is node value times the volume of the node's cell
//! `[x - h/2, x + h/2]` clipped to the box. Nodes in the excluded tube and
//! unavailable (`NaN`) nodes are skipped. Block sums are combined in a fixed
//! order so results are independent of the thread count.

use rayon::prelude::*;

use super::{stencil, GridDomain, GridError, GridField, MAX_GRID_DIM, REDUCTION_BLOCK};

/// Clipped cell volume of node `idx`.
fn cell_weight(domain: &GridDomain, idx: usize, full: f64) -> f64 {
    let mut w = full;
    let mut rem = idx;
    for a in (0..domain.axes()).rev() {
        let p = domain.points_per_axis()[a];
        let i = rem % p;
        if i == 0 || i == p - 1 {
            w *= 0.5;
        }
        rem /= p;
    }
    w
}

fn blocked_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = len.div_ceil(REDUCTION_BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let end = ((b + 1) * REDUCTION_BLOCK).min(len);
            (b * REDUCTION_BLOCK..end).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

/// `(sum |f|^p * cell)^{1/p}` over available, non-excluded nodes.
pub fn lp_norm(f: &GridField, p: f64) -> f64 {
    assert!(p > 0.0, "lp_norm needs p > 0");
    let domain = f.domain();
    let full = domain.cell_volume();
    let tube = domain.excluded_tube_radius() > 0.0;
    let axes = domain.axes();
    let total = blocked_sum(f.len(), |idx| {
        let v = f.values()[idx];
        if v.is_nan() {
            return 0.0;
        }
        if tube {
            let mut buf = [0.0; 2 * MAX_GRID_DIM];
            domain.node_coords(idx, &mut buf[..axes]);
            if domain.is_excluded(&buf[..axes]) {
                return 0.0;
            }
        }
        v.abs().powf(p) * cell_weight(domain, idx, full)
    });
    total.powf(1.0 / p)
}

/// Trace of the finite-difference complex Hessian; `NaN` on the boundary ring.
pub fn complex_laplacian_fd(u: &GridField) -> GridField {
    let domain = u.domain();
    let n = domain.complex_dim();
    let strides = domain.strides();
    let spacings = domain.spacings();
    let mut out = vec![f64::NAN; u.len()];
    out.par_chunks_mut(REDUCTION_BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut h = [num_complex::Complex64::new(0.0, 0.0); MAX_GRID_DIM * MAX_GRID_DIM];
        for (k, slot) in chunk.iter_mut().enumerate() {
            let idx = b * REDUCTION_BLOCK + k;
            if domain.is_boundary(idx) {
                continue;
            }
            stencil::wirtinger_hessian(
                n,
                &spacings,
                u.values()[idx],
                |moves| u.shifted(idx, &strides, moves),
                &mut h[..n * n],
            );
            *slot = (0..n).map(|i| h[i * n + i].re).sum();
        }
    });
    GridField::from_raw(domain.clone(), out)
}

/// `L^p` norm of the Frobenius norm of the full real finite-difference
/// Hessian, over interior non-excluded nodes.
pub fn w2p_seminorm(u: &GridField, p: f64) -> Result<f64, GridError> {
    assert!(p > 0.0, "w2p_seminorm needs p > 0");
    let domain = u.domain();
    if domain.points_per_axis().iter().any(|&q| q < 5) {
        return Err(GridError::TooCoarse { needed: 5 });
    }
    let m = domain.axes();
    let strides = domain.strides();
    let spacings = domain.spacings();
    let cell = domain.cell_volume();
    let tube = domain.excluded_tube_radius() > 0.0;
    let total = blocked_sum(u.len(), |idx| {
        if domain.is_boundary(idx) {
            return 0.0;
        }
        if tube {
            let mut buf = [0.0; 2 * MAX_GRID_DIM];
            domain.node_coords(idx, &mut buf[..m]);
            if domain.is_excluded(&buf[..m]) {
                return 0.0;
            }
        }
        let mut hess = [0.0; 4 * MAX_GRID_DIM * MAX_GRID_DIM];
        stencil::real_hessian(m, &spacings, u.values()[idx], |moves| u.shifted(idx, &strides, moves), &mut hess[..m * m]);
        let frob = hess[..m * m].iter().map(|v| v * v).sum::<f64>().sqrt();
        frob.powf(p) * cell
    });
    Ok(total.powf(1.0 / p))
}
