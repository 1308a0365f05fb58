use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::chart::{CoordinateStencil, PeriodicChart, Stencil};
use super::linalg::is_positive_definite;
use crate::error::{Error, Result};

/// Default finite-difference step for coordinate-metric oracles.
pub const DEFAULT_ORACLE_STEP: f64 = 1e-3;

/// Anything that can hand out a metric matrix at the points of a stencil.
pub trait MetricSource: Sync {
    type S: Stencil + PartialEq + Sync;

    fn stencil(&self) -> &Self::S;
    fn metric_at(&self, p: &<Self::S as Stencil>::Point) -> DMatrix<f64>;
}

/// Anything that can hand out a real value at the points of a stencil.
pub trait ScalarSource: Sync {
    type S: Stencil + PartialEq + Sync;

    fn stencil(&self) -> &Self::S;
    fn value_at(&self, p: &<Self::S as Stencil>::Point) -> f64;
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Symmetric positive-definite matrix per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    chart: PeriodicChart,
    values: Vec<DMatrix<f64>>,
}

impl MetricField {
    /// Builds a field from per-point matrices. Only the upper triangle is
    /// read; the lower triangle is mirrored so the stored values are exactly
    /// symmetric.
    pub fn new(chart: PeriodicChart, mut values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != chart.len() {
            return Err(Error::DimensionMismatch { expected: chart.len(), found: values.len() });
        }
        let d = chart.dims();
        for (idx, m) in values.iter_mut().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
            }
            mirror_upper(m);
            if !is_positive_definite(m) {
                return Err(Error::domain(format!(
                    "metric not positive definite at grid point {:?}",
                    chart.multi_index(idx)
                )));
            }
        }
        Ok(Self { chart, values })
    }

    pub fn from_fn(chart: PeriodicChart, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let values = (0..chart.len()).map(|i| f(&chart.coords(i))).collect();
        Self::new(chart, values)
    }

    pub fn uniform(chart: PeriodicChart, m: DMatrix<f64>) -> Result<Self> {
        let values = vec![m; chart.len()];
        Self::new(chart, values)
    }

    pub fn flat(chart: PeriodicChart) -> Self {
        let d = chart.dims();
        let values = vec![DMatrix::identity(d, d); chart.len()];
        Self { chart, values }
    }

    pub fn chart(&self) -> &PeriodicChart {
        &self.chart
    }

    pub fn dims(&self) -> usize {
        self.chart.dims()
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> &DMatrix<f64> {
        &self.values[idx]
    }
}

impl MetricSource for MetricField {
    type S = PeriodicChart;

    fn stencil(&self) -> &PeriodicChart {
        &self.chart
    }

    fn metric_at(&self, p: &usize) -> DMatrix<f64> {
        self.values[*p].clone()
    }
}

/// Real value per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    chart: PeriodicChart,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(chart: PeriodicChart, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.len() {
            return Err(Error::DimensionMismatch { expected: chart.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite scalar at grid point {:?}",
                chart.multi_index(i)
            )));
        }
        Ok(Self { chart, values })
    }

    pub fn from_fn(chart: PeriodicChart, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..chart.len()).map(|i| f(&chart.coords(i))).collect();
        Self::new(chart, values)
    }

    pub fn constant(chart: PeriodicChart, v: f64) -> Self {
        let values = vec![v; chart.len()];
        Self { chart, values }
    }

    pub fn chart(&self) -> &PeriodicChart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl ScalarSource for ScalarField {
    type S = PeriodicChart;

    fn stencil(&self) -> &PeriodicChart {
        &self.chart
    }

    fn value_at(&self, p: &usize) -> f64 {
        self.values[*p]
    }
}

type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type RealFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Metric given in closed form on a coordinate domain, differentiated with a
/// fixed step.
#[derive(Clone)]
pub struct CoordinateMetric {
    stencil: CoordinateStencil,
    eval: Arc<MatrixFn>,
}

impl CoordinateMetric {
    pub fn new(dims: usize, eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self {
            stencil: CoordinateStencil { dims, h: DEFAULT_ORACLE_STEP },
            eval: Arc::new(eval),
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.stencil.h = h;
        self
    }

    pub fn step(&self) -> f64 {
        self.stencil.h
    }

    pub fn dims(&self) -> usize {
        self.stencil.dims
    }

    pub fn evaluate(&self, p: &[f64]) -> DMatrix<f64> {
        let mut m = (self.eval)(p);
        mirror_upper(&mut m);
        m
    }
}

impl fmt::Debug for CoordinateMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateMetric").field("stencil", &self.stencil).finish_non_exhaustive()
    }
}

impl MetricSource for CoordinateMetric {
    type S = CoordinateStencil;

    fn stencil(&self) -> &CoordinateStencil {
        &self.stencil
    }

    fn metric_at(&self, p: &Vec<f64>) -> DMatrix<f64> {
        self.evaluate(p)
    }
}

/// Scalar function in closed form, paired with a coordinate stencil.
#[derive(Clone)]
pub struct CoordinateScalar {
    stencil: CoordinateStencil,
    eval: Arc<RealFn>,
}

impl CoordinateScalar {
    pub fn new(dims: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            stencil: CoordinateStencil { dims, h: DEFAULT_ORACLE_STEP },
            eval: Arc::new(eval),
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.stencil.h = h;
        self
    }
}

impl fmt::Debug for CoordinateScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateScalar").field("stencil", &self.stencil).finish_non_exhaustive()
    }
}

impl ScalarSource for CoordinateScalar {
    type S = CoordinateStencil;

    fn stencil(&self) -> &CoordinateStencil {
        &self.stencil
    }

    fn value_at(&self, p: &Vec<f64>) -> f64 {
        (self.eval)(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_field_is_symmetric_by_storage() {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 99.0, 1.0]);
        let field = MetricField::uniform(chart, m).unwrap();
        assert_eq!(field.at(3)[(1, 0)], 0.5);
    }

    #[test]
    fn rejects_indefinite_metric_and_nan_scalar() {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MetricField::uniform(chart.clone(), m).is_err());
        let mut v = vec![0.0; chart.len()];
        v[5] = f64::NAN;
        assert!(ScalarField::new(chart, v).is_err());
    }
}
