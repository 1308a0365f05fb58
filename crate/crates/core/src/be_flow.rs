//! Bakry–Émery Ricci flow ∂_t g = −2 Ric_f^N, ∂_t f = Δ_f f on periodic charts.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bundle_curvature::data::PointwiseBundleData;
use crate::bundle_curvature::lie::StructureConstants;
use crate::error::{Error, Result};
use crate::tensor_lab::chart::Stencil;
use crate::tensor_lab::field::{MetricField, MetricSource, ScalarField, ScalarSource};
use crate::tensor_lab::geometry::{
    hessian_from, inner_grad, local_metric, local_metric_field, ricci, ricci_from_cache, scalar_jet, trace_with,
    LocalMetric, ScalarJet,
};
use crate::tensor_lab::linalg::min_eigenvalue;

/// The synthetic dimension N: either ∞ or a finite real different from n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NParam {
    Infinite,
    Finite(f64),
}

impl NParam {
    /// 1/(N − n), zero for N = ∞.
    pub fn coefficient(&self, n: usize) -> Result<f64> {
        match *self {
            NParam::Infinite => Ok(0.0),
            NParam::Finite(big_n) => {
                if !big_n.is_finite() || big_n == n as f64 {
                    return Err(Error::domain(format!("N must differ from n = {n}, got {big_n}")));
                }
                Ok(1.0 / (big_n - n as f64))
            }
        }
    }

    pub fn exceeds(&self, n: usize) -> bool {
        match *self {
            NParam::Infinite => true,
            NParam::Finite(big_n) => big_n > n as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BEState {
    pub g: MetricField,
    pub f: ScalarField,
    pub big_n: NParam,
    coeff: f64,
    pub t: f64,
}

impl BEState {
    pub fn new(g: MetricField, f: ScalarField, big_n: NParam) -> Result<Self> {
        if g.chart() != f.chart() {
            return Err(Error::ChartMismatch);
        }
        let coeff = big_n.coefficient(g.dims())?;
        Ok(Self { g, f, big_n, coeff, t: 0.0 })
    }

    pub fn coefficient(&self) -> f64 {
        self.coeff
    }
}

/// Ric + Hess f − df⊗df·coeff from point data.
pub fn ricci_fn_from(ric: &DMatrix<f64>, lm: &LocalMetric, jet: &ScalarJet, coeff: f64) -> DMatrix<f64> {
    let d = ric.nrows();
    let mut out = ric + hessian_from(jet, &lm.gamma);
    for b in 0..d {
        for c in 0..d {
            out[(b, c)] -= coeff * jet.grad[b] * jet.grad[c];
        }
    }
    out
}

/// Flow velocity (∂_t g, ∂_t f) at one point.
pub fn be_velocity(ric: &DMatrix<f64>, lm: &LocalMetric, jet: &ScalarJet, coeff: f64) -> (DMatrix<f64>, f64) {
    let dg = ricci_fn_from(ric, lm, jet, coeff) * -2.0;
    let lap = trace_with(&lm.g_inv, &hessian_from(jet, &lm.gamma));
    (dg, lap - inner_grad(&lm.g_inv, &jet.grad, &jet.grad))
}

/// Velocity at a point of any chart, for analytic metrics and densities.
pub fn be_rhs_at<M, F>(m: &M, f: &F, p: &<M::S as Stencil>::Point, big_n: NParam) -> Result<(DMatrix<f64>, f64)>
where
    M: MetricSource,
    F: ScalarSource<S = M::S>,
{
    if m.stencil() != f.stencil() {
        return Err(Error::ChartMismatch);
    }
    let coeff = big_n.coefficient(m.stencil().dims())?;
    let lm = local_metric(m, p)?;
    let ric = ricci(m, p)?.ric;
    Ok(be_velocity(&ric, &lm, &scalar_jet(f, p), coeff))
}

struct GridJets {
    metric: Vec<LocalMetric>,
    ric: Vec<DMatrix<f64>>,
    jets: Vec<ScalarJet>,
}

fn grid_jets(g: &MetricField, f: &ScalarField) -> Result<GridJets> {
    if g.chart() != f.chart() {
        return Err(Error::ChartMismatch);
    }
    let metric = local_metric_field(g)?;
    let n = g.chart().len();
    let ric = (0..n).into_par_iter().map(|i| ricci_from_cache(g, &metric, i).ric).collect();
    let jets = (0..n).into_par_iter().map(|i| scalar_jet(f, &i)).collect();
    Ok(GridJets { metric, ric, jets })
}

pub fn ricci_fn(g: &MetricField, f: &ScalarField, big_n: NParam) -> Result<Vec<DMatrix<f64>>> {
    let coeff = big_n.coefficient(g.dims())?;
    let gj = grid_jets(g, f)?;
    Ok((0..gj.jets.len()).map(|i| ricci_fn_from(&gj.ric[i], &gj.metric[i], &gj.jets[i], coeff)).collect())
}

/// (∂_t g, ∂_t f) at every grid point.
pub fn be_rhs(s: &BEState) -> Result<(Vec<DMatrix<f64>>, Vec<f64>)> {
    let gj = grid_jets(&s.g, &s.f)?;
    let vel: Vec<(DMatrix<f64>, f64)> = (0..gj.jets.len())
        .into_par_iter()
        .map(|i| be_velocity(&gj.ric[i], &gj.metric[i], &gj.jets[i], s.coeff))
        .collect();
    Ok(vel.into_iter().unzip())
}

/// Bundle data of the warped product with fiber metric e^{-2f/q}·I and
/// flat connection, built from the same point data the flow uses.
pub fn warped_bundle_data(ric: &DMatrix<f64>, lm: &LocalMetric, jet: &ScalarJet, q: usize) -> PointwiseBundleData {
    let d = ric.nrows();
    let qf = q as f64;
    let w = (-2.0 * jet.value / qf).exp();
    let eye = DMatrix::<f64>::identity(q, q);
    let dq: Vec<DMatrix<f64>> = (0..d).map(|a| &eye * (-2.0 / qf * w * jet.grad[a])).collect();
    let ddq = (0..d)
        .map(|b| {
            (0..d)
                .map(|c| {
                    let coord = w * (4.0 / (qf * qf) * jet.grad[b] * jet.grad[c] - 2.0 / qf * jet.hess[(b, c)]);
                    let mut m = &eye * coord;
                    for (t, dqt) in dq.iter().enumerate() {
                        m -= dqt * lm.gamma.get(t, b, c);
                    }
                    m
                })
                .collect()
        })
        .collect();
    PointwiseBundleData {
        g: lm.g.clone(),
        g_inv: lm.g_inv.clone(),
        gamma: lm.gamma.clone(),
        q: &eye * w,
        q_inv: &eye / w,
        dq,
        ddq,
        f: vec![DMatrix::zeros(d, d); q],
        div_f: DMatrix::zeros(q, d),
        c: StructureConstants::abelian(q),
        ric_base: ric.clone(),
        ric_fiber_alg: DMatrix::zeros(q, q),
    }
}

/// Warped-product data at every grid point of a state.
pub fn warped_bundle_field(s: &BEState, q: usize) -> Result<Vec<PointwiseBundleData>> {
    let gj = grid_jets(&s.g, &s.f)?;
    Ok((0..gj.jets.len()).map(|i| warped_bundle_data(&gj.ric[i], &gj.metric[i], &gj.jets[i], q)).collect())
}

/// Monitored fields of a state.
#[derive(Debug, Clone)]
pub struct BEMonitors {
    pub bar_s: ScalarField,
    pub ks: Vec<f64>,
    pub tilde_s: Vec<ScalarField>,
    pub grad_f_sq: ScalarField,
    pub min_tilde_s: Vec<f64>,
    pub max_grad_f_sq: f64,
}

pub fn be_monitors(s: &BEState, ks: &[f64]) -> Result<BEMonitors> {
    let gj = grid_jets(&s.g, &s.f)?;
    let chart = s.g.chart().clone();
    let n = gj.jets.len();
    let mut bar = Vec::with_capacity(n);
    let mut lap = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let (lm, jet) = (&gj.metric[i], &gj.jets[i]);
        bar.push(trace_with(&lm.g_inv, &ricci_fn_from(&gj.ric[i], lm, jet, s.coeff)));
        lap.push(trace_with(&lm.g_inv, &hessian_from(jet, &lm.gamma)));
        grad.push(inner_grad(&lm.g_inv, &jet.grad, &jet.grad));
    }
    let tilde_s: Vec<ScalarField> = ks
        .iter()
        .map(|k| {
            let v = (0..n).map(|i| bar[i] + lap[i] - (k + 1.0) * grad[i]).collect();
            ScalarField::new(chart.clone(), v)
        })
        .collect::<Result<_>>()?;
    let grad_f_sq = ScalarField::new(chart.clone(), grad)?;
    Ok(BEMonitors {
        bar_s: ScalarField::new(chart, bar)?,
        ks: ks.to_vec(),
        min_tilde_s: tilde_s.iter().map(ScalarField::min).collect(),
        max_grad_f_sq: grad_f_sq.max(),
        tilde_s,
        grad_f_sq,
    })
}

#[derive(Debug, Clone)]
pub struct BEOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Stability factor c in dt ≤ c·h²/max|g⁻¹|.
    pub c_cfl: f64,
    pub record_every: usize,
    pub ks: Vec<f64>,
}

impl Default for BEOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 0.05, c_cfl: 0.2, record_every: 1, ks: vec![0.0, 1.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BEStop {
    Horizon,
    ExtinctionGuard,
}

#[derive(Debug, Clone)]
pub struct BERecord {
    pub t: f64,
    pub min_tilde_s: Vec<f64>,
    pub max_grad_f_sq: f64,
    pub min_metric_eig: f64,
}

#[derive(Debug, Clone)]
pub struct BETrace {
    pub ks: Vec<f64>,
    pub records: Vec<BERecord>,
    pub last: BEState,
    pub stop: BEStop,
}

const MAX_HALVINGS: u32 = 20;
const EXTINCTION_FRACTION: f64 = 1e-6;

fn min_metric_eig(g: &MetricField) -> f64 {
    g.values().iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of g⁻¹ over the grid.
fn max_inverse_metric(g: &MetricField) -> f64 {
    1.0 / min_metric_eig(g)
}

fn advance(s: &BEState, dg: &[DMatrix<f64>], df: &[f64], dt: f64) -> Result<BEState> {
    let g = s.g.values().iter().zip(dg).map(|(a, b)| a + b * dt).collect();
    let f = s.f.values().iter().zip(df).map(|(a, b)| a + b * dt).collect();
    Ok(BEState {
        g: MetricField::new(s.g.chart().clone(), g)?,
        f: ScalarField::new(s.f.chart().clone(), f)?,
        big_n: s.big_n,
        coeff: s.coeff,
        t: s.t + dt,
    })
}

/// One classical RK4 step.
pub fn be_step(s: &BEState, dt: f64) -> Result<BEState> {
    let (g1, f1) = be_rhs(s)?;
    let (g2, f2) = be_rhs(&advance(s, &g1, &f1, dt / 2.0)?)?;
    let (g3, f3) = be_rhs(&advance(s, &g2, &f2, dt / 2.0)?)?;
    let (g4, f4) = be_rhs(&advance(s, &g3, &f3, dt)?)?;
    let dg: Vec<DMatrix<f64>> =
        (0..g1.len()).map(|i| (&g1[i] + &g2[i] * 2.0 + &g3[i] * 2.0 + &g4[i]) / 6.0).collect();
    let df: Vec<f64> = (0..f1.len()).map(|i| (f1[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i]) / 6.0).collect();
    advance(s, &dg, &df, dt)
}

fn record(s: &BEState, ks: &[f64]) -> Result<BERecord> {
    let m = be_monitors(s, ks)?;
    Ok(BERecord {
        t: s.t,
        min_tilde_s: m.min_tilde_s,
        max_grad_f_sq: m.max_grad_f_sq,
        min_metric_eig: min_metric_eig(&s.g),
    })
}

/// RK4 integration with the step capped by c_cfl·h²/max|g⁻¹|. A step whose
/// metric loses definiteness is retried with half the step, up to 20 times.
pub fn be_integrate(s0: BEState, opts: &BEOptions) -> Result<BETrace> {
    if !(opts.dt > 0.0) || !(opts.c_cfl > 0.0) {
        return Err(Error::domain("dt and c_cfl must be positive"));
    }
    let h = s0.g.chart().min_spacing();
    let every = opts.record_every.max(1);
    let eig0 = min_metric_eig(&s0.g);
    let mut records = vec![record(&s0, &opts.ks)?];
    let mut s = s0;
    let mut stop = BEStop::Horizon;
    let mut step = 0usize;
    while s.t < opts.t_end - 1e-12 * opts.t_end.abs().max(1.0) {
        let cap = opts.c_cfl * h * h / max_inverse_metric(&s.g);
        let mut dt = opts.dt.min(cap).min(opts.t_end - s.t);
        let mut halvings = 0;
        let next = loop {
            match be_step(&s, dt) {
                Ok(n) => break n,
                Err(Error::Domain(_)) if halvings < MAX_HALVINGS => {
                    dt /= 2.0;
                    halvings += 1;
                }
                Err(Error::Domain(_)) => return Err(Error::StepRejected { t: s.t, halvings }),
                Err(e) => return Err(e),
            }
        };
        s = next;
        step += 1;
        let done = s.t >= opts.t_end - 1e-12 * opts.t_end.abs().max(1.0);
        let collapsed = min_metric_eig(&s.g) < EXTINCTION_FRACTION * eig0;
        if step.is_multiple_of(every) || done || collapsed {
            records.push(record(&s, &opts.ks)?);
        }
        if collapsed {
            stop = BEStop::ExtinctionGuard;
            break;
        }
    }
    Ok(BETrace { ks: opts.ks.clone(), records, last: s, stop })
}

/// Upper bound on |∇f_t|² given |∇f_0|² ≤ k0.
pub fn gradient_bound(t: f64, k0: f64, n: usize, big_n: NParam) -> Result<f64> {
    big_n.coefficient(n)?;
    match big_n {
        NParam::Infinite => Ok(k0),
        NParam::Finite(v) if v > n as f64 => Ok(k0),
        NParam::Finite(v) => {
            let gap = n as f64 - v;
            let horizon = gap / (2.0 * k0);
            if t >= horizon {
                return Err(Error::BlowupTime { t, horizon });
            }
            Ok(gap * k0 / (gap - 2.0 * k0 * t))
        }
    }
}
