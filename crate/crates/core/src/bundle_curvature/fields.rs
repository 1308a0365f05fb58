use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor_lab::chart::{PeriodicChart, Stencil};
use crate::tensor_lab::linalg::is_positive_definite;

/// Fiber metric Q_jk: symmetric positive-definite q×q matrix per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    chart: PeriodicChart,
    q: usize,
    values: Vec<DMatrix<f64>>,
}

impl QField {
    pub fn new(chart: PeriodicChart, q: usize, mut values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != chart.len() {
            return Err(Error::DimensionMismatch { expected: chart.len(), found: values.len() });
        }
        for m in values.iter_mut() {
            if m.nrows() != q || m.ncols() != q {
                return Err(Error::DimensionMismatch { expected: q, found: m.nrows() });
            }
            for i in 0..q {
                for j in (i + 1)..q {
                    m[(j, i)] = m[(i, j)];
                }
            }
            if !is_positive_definite(m) {
                return Err(Error::domain("fiber metric not positive definite"));
            }
        }
        Ok(Self { chart, q, values })
    }

    pub fn from_fn(chart: PeriodicChart, q: usize, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let values = (0..chart.len()).map(|i| f(&chart.coords(i))).collect();
        Self::new(chart, q, values)
    }

    pub fn uniform(chart: PeriodicChart, m: DMatrix<f64>) -> Result<Self> {
        let q = m.nrows();
        let values = vec![m; chart.len()];
        Self::new(chart, q, values)
    }

    pub fn chart(&self) -> &PeriodicChart {
        &self.chart
    }

    pub fn fiber_dim(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> &DMatrix<f64> {
        &self.values[idx]
    }
}

/// Local connection coefficients α^k_β (a q×dims matrix per point), plus a
/// constant background curvature per fiber direction.
///
/// The background term lets a flat periodic chart carry a bundle with
/// constant nonzero curvature, whose potential cannot be periodic. The
/// stored `values` are the periodic part; the full potential is
/// `values + ½ x^β B_βγ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionField {
    chart: PeriodicChart,
    q: usize,
    values: Vec<DMatrix<f64>>,
    flux: Vec<DMatrix<f64>>,
}

impl ConnectionField {
    pub fn new(chart: PeriodicChart, q: usize, values: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = chart.dims();
        Self::with_flux(chart, q, values, vec![DMatrix::zeros(d, d); q])
    }

    pub fn with_flux(
        chart: PeriodicChart,
        q: usize,
        values: Vec<DMatrix<f64>>,
        flux: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let d = chart.dims();
        if values.len() != chart.len() {
            return Err(Error::DimensionMismatch { expected: chart.len(), found: values.len() });
        }
        if let Some(m) = values.iter().find(|m| m.nrows() != q || m.ncols() != d) {
            return Err(Error::DimensionMismatch { expected: q * d, found: m.len() });
        }
        if values.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::domain("connection coefficients must be finite"));
        }
        if flux.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: flux.len() });
        }
        for b in &flux {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: b.nrows() });
            }
            if (b + b.transpose()).abs().max() != 0.0 {
                return Err(Error::domain("background curvature must be antisymmetric"));
            }
        }
        Ok(Self { chart, q, values, flux })
    }

    pub fn zero(chart: PeriodicChart, q: usize) -> Self {
        let d = chart.dims();
        let values = vec![DMatrix::zeros(q, d); chart.len()];
        Self { chart, q, values, flux: vec![DMatrix::zeros(d, d); q] }
    }

    pub fn from_fn(chart: PeriodicChart, q: usize, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let values = (0..chart.len()).map(|i| f(&chart.coords(i))).collect();
        Self::new(chart, q, values)
    }

    pub fn chart(&self) -> &PeriodicChart {
        &self.chart
    }

    pub fn fiber_dim(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn flux(&self) -> &[DMatrix<f64>] {
        &self.flux
    }

    pub fn replace_values(&self, values: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::with_flux(self.chart.clone(), self.q, values, self.flux.clone())
    }

    /// Potential of the background curvature in symmetric gauge, A_γ = ½ x^β B_βγ.
    pub fn background_potential(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.chart.dims();
        DMatrix::from_fn(self.q, d, |k, c| {
            0.5 * (0..d).map(|b| x[b] * self.flux[k][(b, c)]).sum::<f64>()
        })
    }

    /// F^k_βγ = ∂_β α^k_γ − ∂_γ α^k_β + B^k_βγ at every grid point, by
    /// central differences. Returned as `[point][k]` dims×dims matrices,
    /// antisymmetric by construction.
    pub fn curvature(&self) -> Vec<Vec<DMatrix<f64>>> {
        let chart = &self.chart;
        let d = chart.dims();
        (0..chart.len())
            .map(|idx| {
                let da: Vec<DMatrix<f64>> = (0..d)
                    .map(|a| {
                        let p = &self.values[chart.shift(&idx, a, 1)];
                        let m = &self.values[chart.shift(&idx, a, -1)];
                        (p - m) / (2.0 * chart.step(a))
                    })
                    .collect();
                (0..self.q)
                    .map(|k| {
                        let mut f = self.flux[k].clone();
                        for b in 0..d {
                            for c in (b + 1)..d {
                                let v = da[b][(k, c)] - da[c][(k, b)];
                                f[(b, c)] += v;
                                f[(c, b)] -= v;
                            }
                        }
                        f
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_includes_flux_and_is_antisymmetric() {
        let chart = PeriodicChart::cube(2, 1.0, 16).unwrap();
        let flux = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, -1.5, 0.0]);
        let vals = (0..chart.len())
            .map(|i| {
                let x = chart.coords(i);
                DMatrix::from_row_slice(1, 2, &[0.0, 0.1 * (2.0 * std::f64::consts::PI * x[0]).sin()])
            })
            .collect();
        let a = ConnectionField::with_flux(chart.clone(), 1, vals, vec![flux]).unwrap();
        for f in a.curvature() {
            assert_eq!(f[0][(0, 1)], -f[0][(1, 0)]);
            assert_eq!(f[0][(0, 0)], 0.0);
        }
        let f0 = &a.curvature()[0][0];
        // ∂_x(0.1 sin 2πx) at x = 0, second order accurate
        assert!((f0[(0, 1)] - 1.5 - 0.2 * std::f64::consts::PI).abs() < 0.02);
    }

    #[test]
    fn background_potential_has_requested_curl() {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let flux = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let a = ConnectionField::with_flux(chart.clone(), 1, vec![DMatrix::zeros(1, 2); 64], vec![flux])
            .unwrap();
        let h = 1e-4;
        let ay = |x: f64| a.background_potential(&[x, 0.3])[(0, 1)];
        let ax = |y: f64| a.background_potential(&[0.2, y])[(0, 0)];
        let curl = (ay(0.2 + h) - ay(0.2 - h)) / (2.0 * h) - (ax(0.3 + h) - ax(0.3 - h)) / (2.0 * h);
        assert!((curl + 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_antisymmetric_flux() {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let flux = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(ConnectionField::with_flux(chart, 1, vec![DMatrix::zeros(1, 2); 64], vec![flux]).is_err());
    }
}
