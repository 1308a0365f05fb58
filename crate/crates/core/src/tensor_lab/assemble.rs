//! Total-space metrics of torus bundles in a local trivialization.
//!
//! Coordinates are (x^β, θ^k) with the fiber coordinates appended. The
//! metric is g + Q(dθ + α, dθ + α):
//!
//! ```text
//! g̃_ββ' = g_ββ' + Q_kl α^k_β α^l_β'
//! g̃_βk  = Q_kl α^l_β
//! g̃_jk  = Q_jk
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;

use super::chart::Stencil;
use super::field::{CoordinateMetric, MetricField};
use super::interp::PeriodicSpline;
use crate::bundle_curvature::fields::{ConnectionField, QField};
use crate::error::{Error, Result};

/// Block metric from base metric `g` (d×d), fiber metric `q` (q×q) and
/// connection coefficients `alpha` (q×d).
pub fn total_metric_matrix(g: &DMatrix<f64>, q: &DMatrix<f64>, alpha: &DMatrix<f64>) -> DMatrix<f64> {
    let d = g.nrows();
    let k = q.nrows();
    let qa = q * alpha;
    let mut out = DMatrix::zeros(d + k, d + k);
    let base = g + alpha.transpose() * &qa;
    out.view_mut((0, 0), (d, d)).copy_from(&base);
    out.view_mut((0, d), (d, k)).copy_from(&qa.transpose());
    out.view_mut((d, 0), (k, d)).copy_from(&qa);
    out.view_mut((d, d), (k, k)).copy_from(q);
    out
}

/// Analytic variant: `base(x)` returns (g, Q, α) at a base point.
pub fn assemble_total_metric_with(
    dims: usize,
    q: usize,
    base: impl Fn(&[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) + Send + Sync + 'static,
) -> CoordinateMetric {
    CoordinateMetric::new(dims + q, move |p| {
        let (g, qm, a) = base(&p[..dims]);
        total_metric_matrix(&g, &qm, &a)
    })
}

/// Total-space metric of grid fields, with every base component
/// interpolated by periodic cubic splines so the oracle's second
/// differences exist.
pub fn assemble_total_metric(g: &MetricField, q: &QField, alpha: &ConnectionField) -> Result<CoordinateMetric> {
    let chart = g.chart();
    if q.chart() != chart || alpha.chart() != chart {
        return Err(Error::ChartMismatch);
    }
    if q.fiber_dim() != alpha.fiber_dim() {
        return Err(Error::DimensionMismatch { expected: q.fiber_dim(), found: alpha.fiber_dim() });
    }
    let d = chart.dims();
    let k = q.fiber_dim();
    let component = |get: &dyn Fn(usize) -> f64| {
        let vals: Vec<f64> = (0..chart.len()).map(get).collect();
        PeriodicSpline::new(chart, &vals)
    };
    let mut g_spl = Vec::new();
    for i in 0..d {
        for j in i..d {
            g_spl.push((i, j, component(&|p| g.at(p)[(i, j)])));
        }
    }
    let mut q_spl = Vec::new();
    for i in 0..k {
        for j in i..k {
            q_spl.push((i, j, component(&|p| q.at(p)[(i, j)])));
        }
    }
    let mut a_spl = Vec::new();
    for i in 0..k {
        for j in 0..d {
            a_spl.push((i, j, component(&|p| alpha.values()[p][(i, j)])));
        }
    }
    let alpha = Arc::new(alpha.clone());
    Ok(assemble_total_metric_with(d, k, move |x| {
        let mut gm = DMatrix::zeros(d, d);
        for (i, j, s) in &g_spl {
            let v = s.evaluate(x);
            gm[(*i, *j)] = v;
            gm[(*j, *i)] = v;
        }
        let mut qm = DMatrix::zeros(k, k);
        for (i, j, s) in &q_spl {
            let v = s.evaluate(x);
            qm[(*i, *j)] = v;
            qm[(*j, *i)] = v;
        }
        let mut am = alpha.background_potential(x);
        for (i, j, s) in &a_spl {
            am[(*i, *j)] += s.evaluate(x);
        }
        (gm, qm, am)
    }))
}
