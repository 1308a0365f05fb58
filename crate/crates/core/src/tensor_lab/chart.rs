use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Access pattern shared by finite-difference operators: a point type, a
/// step per axis and a way to move to neighbouring points.
pub trait Stencil {
    type Point: Clone + Send + Sync;

    fn dims(&self) -> usize;
    fn step(&self, axis: usize) -> f64;
    fn shift(&self, p: &Self::Point, axis: usize, offset: i64) -> Self::Point;
}

/// Uniform grid on a rectangular box with periodic identification on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicChart {
    extents: Vec<f64>,
    resolution: Vec<usize>,
}

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_DIMS: usize = 4;

impl PeriodicChart {
    pub fn new(extents: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let dims = extents.len();
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::domain(format!("chart dimension {dims} outside 1..={MAX_DIMS}")));
        }
        if resolution.len() != dims {
            return Err(Error::DimensionMismatch { expected: dims, found: resolution.len() });
        }
        if let Some(e) = extents.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::domain(format!("chart extent {e} must be positive")));
        }
        if let Some(r) = resolution.iter().find(|r| **r < MIN_RESOLUTION) {
            return Err(Error::domain(format!("resolution {r} below minimum {MIN_RESOLUTION}")));
        }
        Ok(Self { extents, resolution })
    }

    /// Square chart with equal extent and resolution on every axis.
    pub fn cube(dims: usize, extent: f64, resolution: usize) -> Result<Self> {
        Self::new(vec![extent; dims], vec![resolution; dims])
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.resolution[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dims()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Axis 0 varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dims());
        for r in &self.resolution {
            out.push(idx % r);
            idx /= r;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (m, r) in multi.iter().zip(&self.resolution) {
            idx += (m % r) * stride;
            stride *= r;
        }
        idx
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, i)| *i as f64 * self.spacing(a))
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution[..axis].iter().product()
    }
}

impl Stencil for PeriodicChart {
    type Point = usize;

    fn dims(&self) -> usize {
        self.extents.len()
    }

    fn step(&self, axis: usize) -> f64 {
        self.spacing(axis)
    }

    fn shift(&self, p: &usize, axis: usize, offset: i64) -> usize {
        let r = self.resolution[axis] as i64;
        let stride = self.stride(axis);
        let i = ((*p / stride) as i64) % r;
        let j = (i + offset).rem_euclid(r);
        (*p as i64 + (j - i) * stride as i64) as usize
    }
}

/// Finite-difference stencil in continuous coordinates with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateStencil {
    pub dims: usize,
    pub h: f64,
}

impl Stencil for CoordinateStencil {
    type Point = Vec<f64>;

    fn dims(&self) -> usize {
        self.dims
    }

    fn step(&self, _axis: usize) -> f64 {
        self.h
    }

    fn shift(&self, p: &Vec<f64>, axis: usize, offset: i64) -> Vec<f64> {
        let mut q = p.clone();
        q[axis] += offset as f64 * self.h;
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_wraps_periodically() {
        let chart = PeriodicChart::new(vec![1.0, 2.0], vec![8, 10]).unwrap();
        let p = chart.flat_index(&[7, 9]);
        assert_eq!(chart.multi_index(chart.shift(&p, 0, 1)), vec![0, 9]);
        assert_eq!(chart.multi_index(chart.shift(&p, 1, 1)), vec![7, 0]);
        assert_eq!(chart.multi_index(chart.shift(&p, 1, -12)), vec![7, 7]);
        assert_eq!(chart.shift(&chart.shift(&p, 0, 3), 0, -3), p);
    }

    #[test]
    fn rejects_bad_charts() {
        assert!(PeriodicChart::new(vec![], vec![]).is_err());
        assert!(PeriodicChart::new(vec![1.0; 5], vec![8; 5]).is_err());
        assert!(PeriodicChart::new(vec![1.0], vec![4]).is_err());
        assert!(PeriodicChart::new(vec![0.0], vec![8]).is_err());
        assert!(PeriodicChart::new(vec![1.0, 1.0], vec![8]).is_err());
    }

    #[test]
    fn spacing_and_coords() {
        let chart = PeriodicChart::cube(2, 2.0, 8).unwrap();
        assert_eq!(chart.spacing(1), 0.25);
        assert_eq!(chart.coords(chart.flat_index(&[2, 3])), vec![0.5, 0.75]);
    }
}
