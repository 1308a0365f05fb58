//! Christoffel symbols, Ricci curvature and scalar calculus by central
//! differences.
//!
//! First derivatives of the metric use the two-point central stencil. The
//! Ricci tensor differentiates the Christoffel symbols once more with the
//! same stencil (nested differences), so no second derivative of the metric
//! is ever formed directly. Scalar second derivatives use the compact
//! three-point and four-point stencils.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::chart::Stencil;
use super::field::{MetricField, MetricSource, ScalarSource};
use super::linalg::{asymmetry, spd_inverse, symmetrize};
use crate::error::{Error, Result};

/// Christoffel symbols of the second kind, stored as `[λ][β][γ]` for Γ^λ_βγ.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dims: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dims: usize) -> Self {
        Self { dims, data: vec![0.0; dims * dims * dims] }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn get(&self, l: usize, b: usize, c: usize) -> f64 {
        self.data[(l * self.dims + b) * self.dims + c]
    }

    #[inline]
    pub fn set(&mut self, l: usize, b: usize, c: usize, v: f64) {
        self.data[(l * self.dims + b) * self.dims + c] = v;
    }

    /// Contraction Γ^λ_λγ.
    pub fn trace(&self, c: usize) -> f64 {
        (0..self.dims).map(|l| self.get(l, l, c)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    fn combine(&self, other: &Self, scale: f64) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * scale).collect();
        Self { dims: self.dims, data }
    }
}

/// Metric, inverse, first derivatives and Christoffels at one point.
#[derive(Debug, Clone)]
pub struct LocalMetric {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub gamma: Christoffel,
}

/// Ricci tensor after symmetrization, with the antisymmetric defect of the
/// raw nested-difference result.
#[derive(Debug, Clone)]
pub struct RicciResult {
    pub ric: DMatrix<f64>,
    pub asymmetry: f64,
}

pub fn christoffel_from(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
    let d = g_inv.nrows();
    let mut gamma = Christoffel::zeros(d);
    for b in 0..d {
        for c in b..d {
            // lowered symbol Γ_{ν,βγ}
            let lowered: Vec<f64> = (0..d)
                .map(|n| 0.5 * (dg[b][(n, c)] + dg[c][(n, b)] - dg[n][(b, c)]))
                .collect();
            for l in 0..d {
                let v: f64 = (0..d).map(|n| g_inv[(l, n)] * lowered[n]).sum();
                gamma.set(l, b, c, v);
                gamma.set(l, c, b, v);
            }
        }
    }
    gamma
}

pub fn local_metric<M: MetricSource>(m: &M, p: &<M::S as Stencil>::Point) -> Result<LocalMetric> {
    let st = m.stencil();
    let d = st.dims();
    let g = m.metric_at(p);
    if g.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: g.nrows() });
    }
    let g_inv = spd_inverse(&g)?;
    let dg: Vec<DMatrix<f64>> = (0..d)
        .map(|a| {
            let h = st.step(a);
            let gp = m.metric_at(&st.shift(p, a, 1));
            let gm = m.metric_at(&st.shift(p, a, -1));
            (gp - gm) / (2.0 * h)
        })
        .collect();
    let gamma = christoffel_from(&g_inv, &dg);
    Ok(LocalMetric { g, g_inv, dg, gamma })
}

/// Γ^λ_βγ = ½ g^{λν}(∂_β g_νγ + ∂_γ g_νβ − ∂_ν g_βγ) by central differences.
pub fn christoffel<M: MetricSource>(m: &M, p: &<M::S as Stencil>::Point) -> Result<Christoffel> {
    Ok(local_metric(m, p)?.gamma)
}

/// Raw Ricci tensor from the Christoffels at a point and their first
/// derivatives `dgamma[a] = ∂_a Γ`.
pub fn ricci_kernel(gamma: &Christoffel, dgamma: &[Christoffel]) -> DMatrix<f64> {
    let d = gamma.dims();
    let mut ric = DMatrix::zeros(d, d);
    for b in 0..d {
        for c in 0..d {
            let mut v = 0.0;
            for l in 0..d {
                v += dgamma[l].get(l, b, c);
                v -= dgamma[b].get(l, l, c);
                for n in 0..d {
                    v += gamma.get(l, l, n) * gamma.get(n, b, c);
                    v -= gamma.get(l, b, n) * gamma.get(n, l, c);
                }
            }
            ric[(b, c)] = v;
        }
    }
    ric
}

fn finish_ricci(raw: DMatrix<f64>) -> RicciResult {
    RicciResult { asymmetry: asymmetry(&raw), ric: symmetrize(&raw) }
}

/// Ric_βγ = ∂_λ Γ^λ_βγ − ∂_β Γ^λ_λγ + Γ^λ_λν Γ^ν_βγ − Γ^λ_βν Γ^ν_λγ.
pub fn ricci<M: MetricSource>(m: &M, p: &<M::S as Stencil>::Point) -> Result<RicciResult> {
    let st = m.stencil();
    let d = st.dims();
    let gamma = christoffel(m, p)?;
    let mut dgamma = Vec::with_capacity(d);
    for a in 0..d {
        let gp = christoffel(m, &st.shift(p, a, 1))?;
        let gm = christoffel(m, &st.shift(p, a, -1))?;
        dgamma.push(gp.combine(&gm, 1.0 / (2.0 * st.step(a))));
    }
    Ok(finish_ricci(ricci_kernel(&gamma, &dgamma)))
}

/// Per-point metric data over a whole grid, computed once so neighbouring
/// points can share Christoffels.
pub fn local_metric_field(m: &MetricField) -> Result<Vec<LocalMetric>> {
    (0..m.chart().len()).into_par_iter().map(|i| local_metric(m, &i)).collect()
}

/// Ricci at a grid point from cached neighbour Christoffels; identical
/// arithmetic to [`ricci`] on the same field.
pub fn ricci_from_cache(m: &MetricField, cache: &[LocalMetric], idx: usize) -> RicciResult {
    let chart = m.chart();
    let d = chart.dims();
    let dgamma: Vec<Christoffel> = (0..d)
        .map(|a| {
            let gp = &cache[chart.shift(&idx, a, 1)].gamma;
            let gm = &cache[chart.shift(&idx, a, -1)].gamma;
            gp.combine(gm, 1.0 / (2.0 * chart.step(a)))
        })
        .collect();
    finish_ricci(ricci_kernel(&cache[idx].gamma, &dgamma))
}

pub fn ricci_field(m: &MetricField) -> Result<Vec<RicciResult>> {
    let cache = local_metric_field(m)?;
    Ok((0..m.chart().len())
        .into_par_iter()
        .map(|i| ricci_from_cache(m, &cache, i))
        .collect())
}

/// Value, coordinate gradient and coordinate second partials of a scalar.
#[derive(Debug, Clone)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl ScalarJet {
    pub fn constant(value: f64, dims: usize) -> Self {
        Self { value, grad: vec![0.0; dims], hess: DMatrix::zeros(dims, dims) }
    }
}

pub fn scalar_jet<F: ScalarSource>(f: &F, p: &<F::S as Stencil>::Point) -> ScalarJet {
    let st = f.stencil();
    let d = st.dims();
    let f0 = f.value_at(p);
    let mut grad = vec![0.0; d];
    let mut hess = DMatrix::zeros(d, d);
    for a in 0..d {
        let h = st.step(a);
        let pa = st.shift(p, a, 1);
        let ma = st.shift(p, a, -1);
        let fp = f.value_at(&pa);
        let fm = f.value_at(&ma);
        grad[a] = (fp - fm) / (2.0 * h);
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in (a + 1)..d {
            let k = st.step(b);
            let fpp = f.value_at(&st.shift(&pa, b, 1));
            let fpm = f.value_at(&st.shift(&pa, b, -1));
            let fmp = f.value_at(&st.shift(&ma, b, 1));
            let fmm = f.value_at(&st.shift(&ma, b, -1));
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * k);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    ScalarJet { value: f0, grad, hess }
}

/// Covariant Hessian ∂_β∂_γ f − Γ^λ_βγ ∂_λ f.
pub fn hessian_from(jet: &ScalarJet, gamma: &Christoffel) -> DMatrix<f64> {
    let d = gamma.dims();
    let mut h = jet.hess.clone();
    for b in 0..d {
        for c in 0..d {
            h[(b, c)] -= (0..d).map(|l| gamma.get(l, b, c) * jet.grad[l]).sum::<f64>();
        }
    }
    h
}

pub fn trace_with(g_inv: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    g_inv.component_mul(t).sum()
}

pub fn inner_grad(g_inv: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += g_inv[(i, j)] * a[i] * b[j];
        }
    }
    s
}

fn check_same<F: ScalarSource, M: MetricSource<S = F::S>>(f: &F, m: &M) -> Result<()> {
    if f.stencil() != m.stencil() {
        return Err(Error::ChartMismatch);
    }
    Ok(())
}

pub fn hessian<F, M>(f: &F, m: &M, p: &<M::S as Stencil>::Point) -> Result<DMatrix<f64>>
where
    F: ScalarSource,
    M: MetricSource<S = F::S>,
{
    check_same(f, m)?;
    let lm = local_metric(m, p)?;
    Ok(hessian_from(&scalar_jet(f, p), &lm.gamma))
}

pub fn laplacian<F, M>(f: &F, m: &M, p: &<M::S as Stencil>::Point) -> Result<f64>
where
    F: ScalarSource,
    M: MetricSource<S = F::S>,
{
    check_same(f, m)?;
    let lm = local_metric(m, p)?;
    Ok(trace_with(&lm.g_inv, &hessian_from(&scalar_jet(f, p), &lm.gamma)))
}

pub fn grad_norm_sq<F, M>(f: &F, m: &M, p: &<M::S as Stencil>::Point) -> Result<f64>
where
    F: ScalarSource,
    M: MetricSource<S = F::S>,
{
    check_same(f, m)?;
    let lm = local_metric(m, p)?;
    let jet = scalar_jet(f, p);
    Ok(inner_grad(&lm.g_inv, &jet.grad, &jet.grad))
}

/// Δ_f u = Δu − g^{βγ} ∂_β f ∂_γ u.
pub fn drift_laplacian<F, U, M>(f: &F, u: &U, m: &M, p: &<M::S as Stencil>::Point) -> Result<f64>
where
    F: ScalarSource,
    U: ScalarSource<S = F::S>,
    M: MetricSource<S = F::S>,
{
    check_same(f, m)?;
    if u.stencil() != m.stencil() {
        return Err(Error::ChartMismatch);
    }
    let lm = local_metric(m, p)?;
    let fj = scalar_jet(f, p);
    let uj = scalar_jet(u, p);
    let lap = trace_with(&lm.g_inv, &hessian_from(&uj, &lm.gamma));
    Ok(lap - inner_grad(&lm.g_inv, &fj.grad, &uj.grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_lab::chart::PeriodicChart;
    use crate::tensor_lab::field::{CoordinateMetric, CoordinateScalar, ScalarField};
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let m = CoordinateMetric::new(3, |_| DMatrix::identity(3, 3));
        let p = vec![0.3, -0.2, 1.0];
        assert_eq!(christoffel(&m, &p).unwrap().max_abs(), 0.0);
        assert_eq!(ricci(&m, &p).unwrap().ric.abs().max(), 0.0);
    }

    #[test]
    fn hyperbolic_half_plane_christoffels() {
        // g = diag(1/y², 1/y²); hand values at y = 1.
        let m = CoordinateMetric::new(2, |p| diag(&[1.0 / (p[1] * p[1]), 1.0 / (p[1] * p[1])]));
        let g = christoffel(&m, &vec![0.4, 1.0]).unwrap();
        let tol = 1e-5;
        assert!((g.get(0, 0, 1) + 1.0).abs() < tol);
        assert!((g.get(0, 1, 0) + 1.0).abs() < tol);
        assert!((g.get(1, 0, 0) - 1.0).abs() < tol);
        assert!((g.get(1, 1, 1) + 1.0).abs() < tol);
        assert!(g.get(0, 0, 0).abs() < tol);
        assert!(g.get(1, 0, 1).abs() < tol);
    }

    #[test]
    fn round_sphere_ricci_equals_metric() {
        let m = CoordinateMetric::new(2, |p| diag(&[1.0, p[0].sin().powi(2)]));
        let p = vec![PI / 3.0, 0.7];
        let r = ricci(&m, &p).unwrap();
        let g = m.evaluate(&p);
        assert!((&r.ric - &g).abs().max() < 1e-5, "{}", r.ric);
        assert!(r.asymmetry < 1e-5);
    }

    #[test]
    fn grid_ricci_matches_pointwise() {
        let chart = PeriodicChart::cube(2, 1.0, 12).unwrap();
        let g = MetricField::from_fn(chart, |x| {
            let s = (2.0 * PI * x[0]).sin();
            let c = (2.0 * PI * x[1]).cos();
            DMatrix::from_row_slice(2, 2, &[1.0 + 0.2 * s, 0.05 * c, 0.05 * c, 1.0 - 0.1 * c])
        })
        .unwrap();
        let field = ricci_field(&g).unwrap();
        for idx in [0, 17, 100] {
            let point = ricci(&g, &idx).unwrap();
            assert_eq!(point.ric, field[idx].ric);
        }
    }

    #[test]
    fn constant_scalar_has_zero_derivatives() {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let g = MetricField::flat(chart.clone());
        let f = ScalarField::constant(chart, 3.5);
        assert_eq!(hessian(&f, &g, &5).unwrap().abs().max(), 0.0);
        assert_eq!(laplacian(&f, &g, &5).unwrap(), 0.0);
        assert_eq!(grad_norm_sq(&f, &g, &5).unwrap(), 0.0);
    }

    #[test]
    fn torus_sine_laplacian_and_gradient() {
        let l = 2.0;
        let k = 2.0 * PI / l;
        let chart = PeriodicChart::new(vec![l, 1.0], vec![64, 8]).unwrap();
        let g = MetricField::flat(chart.clone());
        let f = ScalarField::from_fn(chart.clone(), |x| (k * x[0]).sin()).unwrap();
        let h = chart.spacing(0);
        for idx in [0, 9, 37] {
            let x = chart.coords(idx)[0];
            let lap = laplacian(&f, &g, &idx).unwrap();
            let grad = grad_norm_sq(&f, &g, &idx).unwrap();
            // O(h²) truncation of the compact and central stencils
            let tol = 2.0 * (k * h).powi(2) * k * k;
            assert!((lap + k * k * (k * x).sin()).abs() < tol);
            assert!((grad - (k * (k * x).cos()).powi(2)).abs() < tol);
        }
    }

    #[test]
    fn drift_laplacian_identities() {
        let chart = PeriodicChart::cube(2, 1.0, 16).unwrap();
        let g = MetricField::from_fn(chart.clone(), |x| {
            diag(&[1.0 + 0.1 * (2.0 * PI * x[1]).sin(), 1.2])
        })
        .unwrap();
        let f = ScalarField::from_fn(chart.clone(), |x| 0.3 * (2.0 * PI * (x[0] + x[1])).sin()).unwrap();
        let u = ScalarField::from_fn(chart.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let c = ScalarField::constant(chart, 1.0);
        for idx in 0..20 {
            let lhs = drift_laplacian(&f, &f, &g, &idx).unwrap();
            let rhs = laplacian(&f, &g, &idx).unwrap() - grad_norm_sq(&f, &g, &idx).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
            assert_eq!(drift_laplacian(&c, &u, &g, &idx).unwrap(), laplacian(&u, &g, &idx).unwrap());
        }
    }

    #[test]
    fn chart_mismatch_is_reported() {
        let a = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let b = PeriodicChart::cube(2, 1.0, 10).unwrap();
        let g = MetricField::flat(a);
        let f = ScalarField::constant(b, 0.0);
        assert!(matches!(laplacian(&f, &g, &0), Err(Error::ChartMismatch)));
        let m = CoordinateMetric::new(2, |_| DMatrix::identity(2, 2));
        let s = CoordinateScalar::new(2, |p| p[0]).with_step(1e-2);
        assert!(matches!(hessian(&s, &m, &vec![0.0, 0.0]), Err(Error::ChartMismatch)));
    }
}
