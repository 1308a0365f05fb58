//! Tensor-product periodic cubic B-spline interpolation of grid data.

use nalgebra::DMatrix;

use super::chart::{PeriodicChart, Stencil};

/// C² interpolant of one scalar component sampled on a periodic chart.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    chart: PeriodicChart,
    coeffs: Vec<f64>,
}

/// Inverse of the circulant interpolation matrix (1, 4, 1)/6.
fn circulant_inverse(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 4.0 / 6.0;
        m[(i, (i + 1) % n)] += 1.0 / 6.0;
        m[(i, (i + n - 1) % n)] += 1.0 / 6.0;
    }
    m.try_inverse().expect("cubic B-spline collocation matrix is diagonally dominant")
}

fn bspline_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

impl PeriodicSpline {
    pub fn new(chart: &PeriodicChart, values: &[f64]) -> Self {
        assert_eq!(values.len(), chart.len(), "sample count must match chart");
        let mut coeffs = values.to_vec();
        for axis in 0..chart.dims() {
            let n = chart.resolution()[axis];
            let inv = circulant_inverse(n);
            let mut line = vec![0.0; n];
            let mut out = vec![0.0; n];
            for start in 0..chart.len() {
                if chart.multi_index(start)[axis] != 0 {
                    continue;
                }
                let mut p = start;
                for v in line.iter_mut() {
                    *v = coeffs[p];
                    p = chart.shift(&p, axis, 1);
                }
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|j| inv[(i, j)] * line[j]).sum();
                }
                let mut p = start;
                for v in &out {
                    coeffs[p] = *v;
                    p = chart.shift(&p, axis, 1);
                }
            }
        }
        Self { chart: chart.clone(), coeffs }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.chart.dims();
        let mut base = Vec::with_capacity(d);
        let mut weights = Vec::with_capacity(d);
        for (a, xa) in x.iter().enumerate().take(d) {
            let s = xa / self.chart.spacing(a);
            let i = s.floor();
            weights.push(bspline_weights(s - i));
            base.push(i as i64 - 1);
        }
        let mut total = 0.0;
        let combos = 4usize.pow(d as u32);
        let mut multi = vec![0usize; d];
        for combo in 0..combos {
            let mut w = 1.0;
            let mut c = combo;
            for a in 0..d {
                let k = c % 4;
                c /= 4;
                w *= weights[a][k];
                let r = self.chart.resolution()[a] as i64;
                multi[a] = (base[a] + k as i64).rem_euclid(r) as usize;
            }
            total += w * self.coeffs[self.chart.flat_index(&multi)];
        }
        total
    }
}
