//! Uniform grids over boxes in `C^n = R^{2n}` and fields sampled on them.
//!
//! Coordinates are interleaved `(x1, y1, ..., xn, yn)` with `z_k = x_k + i y_k`.
//! Grid values are stored row-major: axis 0 varies slowest, axis `2n - 1`
//! fastest.

mod io;
mod norms;
pub(crate) mod stencil;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hermitian::HermitianForm;

pub use norms::{complex_laplacian_fd, lp_norm, w2p_seminorm};
pub use stencil::{complex_hessian_fd_at, real_hessian_fd_at};

/// Hard cap on node count. 65 points per axis in C^2 is 1.79e7 nodes.
pub const MAX_NODES: usize = 20_000_000;

/// Largest complex dimension supported by grids.
pub const MAX_GRID_DIM: usize = 4;

/// Nodes per block in parallel reductions. Fixed so sums do not depend on the
/// thread count.
pub(crate) const REDUCTION_BLOCK: usize = 4096;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("point needs an even, nonzero number of real coordinates, got {0}")]
    InvalidPoint(usize),
    #[error("invalid grid domain: {0}")]
    InvalidDomain(String),
    #[error("grid has {nodes} nodes, above the cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("non-finite sample {value} at node {index} ({coords:?})")]
    NonFiniteSample { index: usize, coords: Vec<f64>, value: f64 },
    #[error("node {0} lies on the boundary ring")]
    BoundaryNode(usize),
    #[error("operation needs at least {needed} points per axis")]
    TooCoarse { needed: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed grid file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A point of `C^n` stored as `2n` reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ComplexPoint {
    coords: Vec<f64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GridError> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(GridError::InvalidPoint(coords.len()));
        }
        Ok(Self { coords })
    }

    pub fn from_complex(z: &[Complex64]) -> Result<Self, GridError> {
        Self::new(z.iter().flat_map(|c| [c.re, c.im]).collect())
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: vec![0.0; 2 * n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn z(&self, k: usize) -> Complex64 {
        Complex64::new(self.coords[2 * k], self.coords[2 * k + 1])
    }
}

impl TryFrom<Vec<f64>> for ComplexPoint {
    type Error = GridError;
    fn try_from(coords: Vec<f64>) -> Result<Self, GridError> {
        Self::new(coords)
    }
}

impl From<ComplexPoint> for Vec<f64> {
    fn from(p: ComplexPoint) -> Self {
        p.coords
    }
}

/// Box `center +- half_widths` sampled with `points_per_axis` nodes per axis.
///
/// Nodes within `excluded_tube_radius` of the singular set
/// `{z_k = 0 : k in tube_coords}` are left out of norm integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    center: Vec<f64>,
    half_widths: Vec<f64>,
    points_per_axis: Vec<usize>,
    #[serde(default)]
    excluded_tube_radius: f64,
    #[serde(default)]
    tube_coords: Vec<usize>,
}

impl GridDomain {
    pub fn new(center: Vec<f64>, half_widths: Vec<f64>, points_per_axis: Vec<usize>) -> Result<Self, GridError> {
        let n_complex = center.len() / 2;
        let domain = Self {
            center,
            half_widths,
            points_per_axis,
            excluded_tube_radius: 0.0,
            tube_coords: vec![n_complex.saturating_sub(1)],
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Cube of the given half-width centred at the origin of `C^n`.
    pub fn cube(n: usize, half_width: f64, points: usize) -> Result<Self, GridError> {
        Self::new(vec![0.0; 2 * n], vec![half_width; 2 * n], vec![points; 2 * n])
    }

    pub fn with_tube(mut self, radius: f64) -> Result<Self, GridError> {
        self.excluded_tube_radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tube_coords(mut self, coords: Vec<usize>) -> Result<Self, GridError> {
        self.tube_coords = coords;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let axes = self.center.len();
        if axes == 0 || axes % 2 != 0 {
            return Err(GridError::InvalidPoint(axes));
        }
        if axes / 2 > MAX_GRID_DIM {
            return Err(GridError::InvalidDomain(format!(
                "complex dimension {} exceeds the supported maximum {MAX_GRID_DIM}",
                axes / 2
            )));
        }
        if self.half_widths.len() != axes || self.points_per_axis.len() != axes {
            return Err(GridError::InvalidDomain("center, half_widths and points_per_axis differ in length".into()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(GridError::InvalidDomain("center must be finite".into()));
        }
        if self.half_widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GridError::InvalidDomain("half widths must be positive and finite".into()));
        }
        if self.points_per_axis.iter().any(|&p| p < 3) {
            return Err(GridError::InvalidDomain("need at least 3 points per axis".into()));
        }
        let min_half = self.half_widths.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.excluded_tube_radius >= 0.0 && self.excluded_tube_radius < min_half) {
            return Err(GridError::InvalidDomain(format!(
                "tube radius {} must lie in [0, {min_half})",
                self.excluded_tube_radius
            )));
        }
        if self.tube_coords.iter().any(|&k| k >= axes / 2) {
            return Err(GridError::InvalidDomain("tube coordinate out of range".into()));
        }
        let nodes = self.points_per_axis.iter().try_fold(1usize, |acc, &p| acc.checked_mul(p));
        match nodes {
            Some(n) if n <= MAX_NODES => Ok(()),
            Some(n) => Err(GridError::TooManyNodes { nodes: n, cap: MAX_NODES }),
            None => Err(GridError::TooManyNodes { nodes: usize::MAX, cap: MAX_NODES }),
        }
    }

    pub fn axes(&self) -> usize {
        self.center.len()
    }

    pub fn complex_dim(&self) -> usize {
        self.center.len() / 2
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points_per_axis
    }

    pub fn excluded_tube_radius(&self) -> f64 {
        self.excluded_tube_radius
    }

    pub fn tube_coords(&self) -> &[usize] {
        &self.tube_coords
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_widths[axis] / (self.points_per_axis[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.axes()).map(|a| self.spacing(a)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.axes()).map(|a| self.spacing(a)).product()
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.axes()];
        for a in (0..self.axes().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.points_per_axis[a + 1];
        }
        strides
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.axes()).rev() {
            let p = self.points_per_axis[a];
            out[a] = idx % p;
            idx /= p;
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.points_per_axis).fold(0, |acc, (&i, &p)| acc * p + i)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_widths[axis] + i as f64 * self.spacing(axis)
    }

    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.axes()).rev() {
            let p = self.points_per_axis[a];
            out[a] = self.coord(a, rem % p);
            rem /= p;
        }
    }

    pub fn node_point(&self, idx: usize) -> ComplexPoint {
        let mut coords = vec![0.0; self.axes()];
        self.node_coords(idx, &mut coords);
        ComplexPoint { coords }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let mut rem = idx;
        for a in (0..self.axes()).rev() {
            let p = self.points_per_axis[a];
            let i = rem % p;
            if i == 0 || i == p - 1 {
                return true;
            }
            rem /= p;
        }
        false
    }

    /// Distance from the singular set `{z_k = 0 : k in tube_coords}`.
    pub fn singular_distance(&self, coords: &[f64]) -> f64 {
        self.tube_coords
            .iter()
            .map(|&k| coords[2 * k] * coords[2 * k] + coords[2 * k + 1] * coords[2 * k + 1])
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_excluded(&self, coords: &[f64]) -> bool {
        self.excluded_tube_radius > 0.0 && self.singular_distance(coords) < self.excluded_tube_radius
    }

    /// Same box with `(points - 1)` halved on every axis, if all counts allow it.
    pub fn coarsened(&self) -> Option<Self> {
        if self.points_per_axis.iter().any(|&p| p < 5 || (p - 1) % 2 != 0) {
            return None;
        }
        let mut coarse = self.clone();
        coarse.points_per_axis = self.points_per_axis.iter().map(|p| (p - 1) / 2 + 1).collect();
        coarse.excluded_tube_radius = 0.0;
        Some(coarse)
    }

    /// Same box with `(points - 1)` doubled on every axis.
    pub fn refined(&self) -> Result<Self, GridError> {
        let mut fine = self.clone();
        fine.points_per_axis = self.points_per_axis.iter().map(|p| 2 * (p - 1) + 1).collect();
        fine.validate()?;
        Ok(fine)
    }
}

/// Real samples on a [`GridDomain`]. `NaN` marks a node where a derived
/// quantity is not available (the boundary ring of a Laplacian field).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl GridField {
    pub fn from_values(domain: GridDomain, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != domain.node_count() {
            return Err(GridError::DimensionMismatch { expected: domain.node_count(), got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| v.is_infinite()) {
            return Err(GridError::NonFiniteSample { index, coords: domain.node_point(index).coords, value });
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: GridDomain, c: f64) -> Self {
        let values = vec![c; domain.node_count()];
        Self { domain, values }
    }

    pub(crate) fn from_raw(domain: GridDomain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.node_count());
        Self { domain, values }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_available(&self, idx: usize) -> bool {
        !self.values[idx].is_nan()
    }

    /// Whether node `idx` falls inside the excluded tube.
    pub fn is_excluded(&self, idx: usize) -> bool {
        if self.domain.excluded_tube_radius == 0.0 {
            return false;
        }
        let mut buf = [0.0; 2 * MAX_GRID_DIM];
        let coords = &mut buf[..self.domain.axes()];
        self.domain.node_coords(idx, coords);
        self.domain.is_excluded(coords)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        if self.domain.points_per_axis != other.domain.points_per_axis {
            return Err(GridError::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let values = self.values.par_iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { domain: self.domain.clone(), values })
    }

    /// Returns `(values[idx + offset], ...)` through flat strides.
    #[inline]
    pub(crate) fn shifted(&self, idx: usize, strides: &[usize], moves: &[(usize, i32)]) -> f64 {
        let mut j = idx as isize;
        for &(axis, step) in moves {
            j += step as isize * strides[axis] as isize;
        }
        self.values[j as usize]
    }

    pub fn to_csv_string(&self) -> String {
        io::to_csv(self)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, GridError> {
        io::from_csv(text)
    }

    pub fn to_json_string(&self) -> Result<String, GridError> {
        io::to_json(self)
    }

    pub fn from_json_str(text: &str) -> Result<Self, GridError> {
        io::from_json(text)
    }
}

/// Evaluates `f` at every node. `f` receives the node's real coordinates.
pub fn sample<F>(domain: &GridDomain, f: F) -> Result<GridField, GridError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    domain.validate()?;
    let axes = domain.axes();
    let mut values = vec![0.0; domain.node_count()];
    values.par_chunks_mut(REDUCTION_BLOCK).enumerate().for_each(|(block, chunk)| {
        let mut coords = [0.0; 2 * MAX_GRID_DIM];
        let coords = &mut coords[..axes];
        for (k, v) in chunk.iter_mut().enumerate() {
            domain.node_coords(block * REDUCTION_BLOCK + k, coords);
            *v = f(coords);
        }
    });
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(GridError::NonFiniteSample { index, coords: domain.node_point(index).coords, value });
    }
    Ok(GridField { domain: domain.clone(), values })
}

/// Second-order central-difference complex Hessian at an interior node.
pub fn complex_hessian_fd(u: &GridField, idx: usize) -> Result<HermitianForm, GridError> {
    let domain = u.domain();
    if idx >= u.len() {
        return Err(GridError::DimensionMismatch { expected: u.len(), got: idx });
    }
    if domain.is_boundary(idx) {
        return Err(GridError::BoundaryNode(idx));
    }
    let n = domain.complex_dim();
    let strides = domain.strides();
    let spacings = domain.spacings();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    stencil::wirtinger_hessian(n, &spacings, u.values()[idx], |moves| u.shifted(idx, &strides, moves), &mut out);
    Ok(HermitianForm::new(n, out).expect("n*n entries"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_axis_values() {
        let d = GridDomain::new(vec![0.0; 2], vec![1.0; 2], vec![5, 3]).unwrap();
        let f = sample(&d, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let along_x: Vec<f64> = (0..5).map(|i| f.values()[d.flat_index(&[i, 1])]).collect();
        assert_eq!(along_x, vec![1.0, 0.25, 0.0, 0.25, 1.0]);
        let ones = sample(&d, |_| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sample_rejects_non_finite() {
        let d = GridDomain::cube(1, 1.0, 3).unwrap();
        let err = sample(&d, |x| 1.0 / (x[0] * x[0] + x[1] * x[1])).unwrap_err();
        assert!(matches!(err, GridError::NonFiniteSample { index: 4, .. }));
    }

    #[test]
    fn domain_validation() {
        assert!(GridDomain::new(vec![0.0; 3], vec![1.0; 3], vec![3; 3]).is_err());
        assert!(GridDomain::cube(2, 1.0, 2).is_err());
        assert!(GridDomain::cube(2, -1.0, 3).is_err());
        assert!(GridDomain::cube(2, 1.0, 5).unwrap().with_tube(1.0).is_err());
        assert!(matches!(GridDomain::cube(2, 1.0, 80), Err(GridError::TooManyNodes { .. })));
        assert!(GridDomain::cube(2, 1.0, 65).is_ok());
        assert!(GridDomain::cube(5, 1.0, 3).is_err());
    }

    #[test]
    fn index_round_trip_and_boundary() {
        let d = GridDomain::new(vec![0.0; 4], vec![1.0; 4], vec![3, 4, 5, 3]).unwrap();
        let mut m = [0usize; 4];
        for idx in 0..d.node_count() {
            d.multi_index(idx, &mut m);
            assert_eq!(d.flat_index(&m), idx);
            let interior = m.iter().zip(d.points_per_axis()).all(|(&i, &p)| i > 0 && i < p - 1);
            assert_eq!(d.is_boundary(idx), !interior);
        }
    }

    #[test]
    fn hessian_of_modulus_squared() {
        let d = GridDomain::cube(2, 1.0, 5).unwrap();
        let u = sample(&d, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let h = complex_hessian_fd(&u, d.flat_index(&[2, 2, 2, 2])).unwrap();
        assert!(h.max_abs_diff(&HermitianForm::diagonal(&[1.0, 0.0])) < 1e-12);
        assert!(matches!(complex_hessian_fd(&u, 0), Err(GridError::BoundaryNode(0))));
    }

    #[test]
    fn pluriharmonic_has_zero_hessian() {
        let d = GridDomain::cube(2, 1.0, 7).unwrap();
        let u = sample(&d, |x| x[0] * x[0] - x[1] * x[1]).unwrap();
        let h = complex_hessian_fd(&u, d.flat_index(&[2, 3, 4, 3])).unwrap();
        assert!(h.max_abs_diff(&HermitianForm::zeros(2)) < 1e-12);
    }

    #[test]
    fn tube_exclusion() {
        let d = GridDomain::cube(2, 1.0, 5).unwrap().with_tube(0.6).unwrap();
        let f = GridField::constant(d.clone(), 1.0);
        assert!(f.is_excluded(d.flat_index(&[0, 0, 2, 2])));
        assert!(!f.is_excluded(d.flat_index(&[2, 2, 0, 2])));
    }
}
