//! Grid evaluation of the torus-bundle flow on a periodic chart.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::blocks::{flow_from_blocks, ricci_blocks_torus};
use super::data::PointwiseBundleData;
use super::fields::{ConnectionField, QField};
use super::lie::StructureConstants;
use crate::error::{Error, Result};
use crate::tensor_lab::chart::{PeriodicChart, Stencil};
use crate::tensor_lab::field::MetricField;
use crate::tensor_lab::geometry::{local_metric_field, ricci_from_cache};
use crate::tensor_lab::linalg::{spd_inverse, symmetrize};

fn check_charts(g: &MetricField, q: &QField, alpha: &ConnectionField) -> Result<()> {
    if q.chart() != g.chart() || alpha.chart() != g.chart() {
        return Err(Error::ChartMismatch);
    }
    if q.fiber_dim() != alpha.fiber_dim() {
        return Err(Error::DimensionMismatch { expected: q.fiber_dim(), found: alpha.fiber_dim() });
    }
    Ok(())
}

fn central(chart: &PeriodicChart, vals: &[DMatrix<f64>], idx: usize, a: usize) -> DMatrix<f64> {
    (&vals[chart.shift(&idx, a, 1)] - &vals[chart.shift(&idx, a, -1)]) / (2.0 * chart.step(a))
}

/// Coordinate second partials ∂_a ∂_b of a matrix-valued grid field with the
/// compact stencils used for scalars.
fn second_partials(chart: &PeriodicChart, vals: &[DMatrix<f64>], idx: usize) -> Vec<Vec<DMatrix<f64>>> {
    let d = chart.dims();
    let at = |i: usize| &vals[i];
    let mut out = vec![vec![DMatrix::zeros(0, 0); d]; d];
    for a in 0..d {
        let h = chart.step(a);
        let pa = chart.shift(&idx, a, 1);
        let ma = chart.shift(&idx, a, -1);
        out[a][a] = (at(pa) - at(idx) * 2.0 + at(ma)) / (h * h);
        for b in (a + 1)..d {
            let k = chart.step(b);
            let v = (at(chart.shift(&pa, b, 1)) - at(chart.shift(&pa, b, -1)) - at(chart.shift(&ma, b, 1))
                + at(chart.shift(&ma, b, -1)))
                / (4.0 * h * k);
            out[b][a] = v.clone();
            out[a][b] = v;
        }
    }
    out
}

/// Pointwise bundle data at every grid point of a torus bundle.
pub fn bundle_data_field(g: &MetricField, q: &QField, alpha: &ConnectionField) -> Result<Vec<PointwiseBundleData>> {
    check_charts(g, q, alpha)?;
    let chart = g.chart();
    let d = chart.dims();
    let k = q.fiber_dim();
    let cache = local_metric_field(g)?;
    let curv = alpha.curvature();
    let q_inv: Vec<DMatrix<f64>> = q.values().par_iter().map(spd_inverse).collect::<Result<_>>()?;
    (0..chart.len())
        .into_par_iter()
        .map(|idx| {
            let lm = &cache[idx];
            let gamma = lm.gamma.clone();
            let dq: Vec<DMatrix<f64>> = (0..d).map(|a| central(chart, q.values(), idx, a)).collect();
            let mut ddq = second_partials(chart, q.values(), idx);
            for (b, row) in ddq.iter_mut().enumerate() {
                for (c, m) in row.iter_mut().enumerate() {
                    for (t, dqt) in dq.iter().enumerate() {
                        *m -= dqt * gamma.get(t, b, c);
                    }
                }
            }
            let f = curv[idx].clone();
            let df: Vec<Vec<DMatrix<f64>>> = (0..d)
                .map(|a| {
                    let p = &curv[chart.shift(&idx, a, 1)];
                    let m = &curv[chart.shift(&idx, a, -1)];
                    (0..k).map(|s| (&p[s] - &m[s]) / (2.0 * chart.step(a))).collect()
                })
                .collect();
            let mut div_f = DMatrix::zeros(k, d);
            for s in 0..k {
                for c in 0..d {
                    let mut v = 0.0;
                    for l in 0..d {
                        for n in 0..d {
                            let mut cov = df[n][s][(l, c)];
                            for t in 0..d {
                                cov -= gamma.get(t, n, l) * f[s][(t, c)] + gamma.get(t, n, c) * f[s][(l, t)];
                            }
                            v += lm.g_inv[(l, n)] * cov;
                        }
                    }
                    div_f[(s, c)] = v;
                }
            }
            Ok(PointwiseBundleData {
                g: lm.g.clone(),
                g_inv: lm.g_inv.clone(),
                gamma,
                q: q.at(idx).clone(),
                q_inv: q_inv[idx].clone(),
                dq,
                ddq,
                f,
                div_f,
                c: StructureConstants::abelian(k),
                ric_base: ricci_from_cache(g, &cache, idx).ric,
                ric_fiber_alg: DMatrix::zeros(k, k),
            })
        })
        .collect()
}

/// Velocities of (g, Q, α) at one point from the torus evolution equations
/// written directly in terms of Ric^M, ∇Q, ∇∇Q and F.
pub fn torus_velocity(d: &PointwiseBundleData) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let dims = d.base_dims();
    let q = d.fiber_dim();
    let gi = &d.g_inv;
    let qi = &d.q_inv;
    // ∇^λ Q = g^{λν} ∇_ν Q
    let dq_up: Vec<DMatrix<f64>> = (0..dims)
        .map(|l| {
            let mut m = DMatrix::zeros(q, q);
            for n in 0..dims {
                m += &d.dq[n] * gi[(l, n)];
            }
            m
        })
        .collect();
    let trq_up: Vec<f64> = dq_up.iter().map(|m| qi.component_mul(m).sum()).collect();

    let mut dg = &d.ric_base * -2.0;
    for b in 0..dims {
        let dqi_b = -(qi * &d.dq[b] * qi);
        for c in 0..dims {
            let mut v = 0.5 * dqi_b.component_mul(&d.dq[c]).sum() + qi.component_mul(&d.ddq[b][c]).sum();
            for l in 0..dims {
                for n in 0..dims {
                    for i in 0..q {
                        for u in 0..q {
                            v += gi[(l, n)] * d.q[(i, u)] * d.f[u][(b, l)] * d.f[i][(c, n)];
                        }
                    }
                }
            }
            dg[(b, c)] += v;
        }
    }

    let mut dalpha = d.div_f.clone();
    for i in 0..q {
        for c in 0..dims {
            let mut v = 0.0;
            for l in 0..dims {
                v += 0.5 * d.f[i][(l, c)] * trq_up[l];
                for ll in 0..q {
                    let qdq: f64 = (0..q).map(|s| qi[(i, s)] * dq_up[l][(ll, s)]).sum();
                    v += d.f[ll][(l, c)] * qdq;
                }
            }
            dalpha[(i, c)] += v;
        }
    }

    let mut dqm = DMatrix::zeros(q, q);
    for j in 0..q {
        for k in 0..q {
            let mut lap = 0.0;
            for b in 0..dims {
                for c in 0..dims {
                    lap += gi[(b, c)] * d.ddq[b][c][(j, k)];
                }
            }
            let mut v = lap;
            for t in 0..dims {
                for s in 0..q {
                    for u in 0..q {
                        v -= qi[(s, u)] * d.dq[t][(s, j)] * dq_up[t][(u, k)];
                    }
                }
                v += 0.5 * trq_up[t] * d.dq[t][(j, k)];
            }
            let mut ff = 0.0;
            for s in 0..q {
                for u in 0..q {
                    let w = d.q[(s, j)] * d.q[(u, k)];
                    for l in 0..dims {
                        for n in 0..dims {
                            for m in 0..dims {
                                for x in 0..dims {
                                    ff += w * gi[(l, n)] * gi[(m, x)] * d.f[s][(l, m)] * d.f[u][(n, x)];
                                }
                            }
                        }
                    }
                }
            }
            dqm[(j, k)] = v - 0.5 * ff;
        }
    }
    (dg, dqm, dalpha)
}

/// Time derivatives of (g, Q, α) at every grid point.
#[derive(Debug, Clone)]
pub struct TorusRhs {
    pub dg: Vec<DMatrix<f64>>,
    pub dq: Vec<DMatrix<f64>>,
    pub dalpha: Vec<DMatrix<f64>>,
}

impl TorusRhs {
    pub fn max_abs_diff(&self, other: &TorusRhs) -> f64 {
        let diff = |a: &[DMatrix<f64>], b: &[DMatrix<f64>]| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max)
        };
        diff(&self.dg, &other.dg).max(diff(&self.dq, &other.dq)).max(diff(&self.dalpha, &other.dalpha))
    }

    pub fn max_abs(&self) -> f64 {
        self.dg
            .iter()
            .chain(&self.dq)
            .chain(&self.dalpha)
            .map(|m| m.abs().max())
            .fold(0.0, f64::max)
    }
}

/// Right-hand sides of the torus-bundle flow from the evolution equations.
pub fn flow_rhs_torus(g: &MetricField, q: &QField, alpha: &ConnectionField) -> Result<TorusRhs> {
    let data = bundle_data_field(g, q, alpha)?;
    let vel: Vec<_> = data.par_iter().map(torus_velocity).collect();
    Ok(TorusRhs {
        dg: vel.iter().map(|v| symmetrize(&v.0)).collect(),
        dq: vel.iter().map(|v| symmetrize(&v.1)).collect(),
        dalpha: vel.into_iter().map(|v| v.2).collect(),
    })
}

/// The same right-hand sides obtained as −2 times the Ricci blocks.
pub fn flow_rhs_from_blocks(g: &MetricField, q: &QField, alpha: &ConnectionField) -> Result<TorusRhs> {
    let data = bundle_data_field(g, q, alpha)?;
    let vel: Vec<_> = data
        .par_iter()
        .map(|d| Ok(flow_from_blocks(&ricci_blocks_torus(d)?, &d.q_inv)))
        .collect::<Result<_>>()?;
    Ok(TorusRhs {
        dg: vel.iter().map(|v| symmetrize(&v.0)).collect(),
        dq: vel.iter().map(|v| symmetrize(&v.1)).collect(),
        dalpha: vel.into_iter().map(|v| v.2).collect(),
    })
}

/// A torus-bundle metric at time t.
#[derive(Debug, Clone)]
pub struct BundleState {
    pub g: MetricField,
    pub q: QField,
    pub alpha: ConnectionField,
    pub t: f64,
}

impl BundleState {
    pub fn new(g: MetricField, q: QField, alpha: ConnectionField) -> Result<Self> {
        check_charts(&g, &q, &alpha)?;
        Ok(Self { g, q, alpha, t: 0.0 })
    }

    fn advance(&self, k: &TorusRhs, dt: f64) -> Result<Self> {
        let axpy = |x: &[DMatrix<f64>], y: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
            x.iter().zip(y).map(|(a, b)| a + b * dt).collect()
        };
        Ok(Self {
            g: MetricField::new(self.g.chart().clone(), axpy(self.g.values(), &k.dg))?,
            q: QField::new(self.q.chart().clone(), self.q.fiber_dim(), axpy(self.q.values(), &k.dq))?,
            alpha: self.alpha.replace_values(axpy(self.alpha.values(), &k.dalpha))?,
            t: self.t + dt,
        })
    }
}

fn combine(k: [&TorusRhs; 4]) -> TorusRhs {
    let mix = |sel: fn(&TorusRhs) -> &Vec<DMatrix<f64>>| -> Vec<DMatrix<f64>> {
        (0..sel(k[0]).len())
            .map(|i| (&sel(k[0])[i] + &sel(k[1])[i] * 2.0 + &sel(k[2])[i] * 2.0 + &sel(k[3])[i]) / 6.0)
            .collect()
    };
    TorusRhs { dg: mix(|r| &r.dg), dq: mix(|r| &r.dq), dalpha: mix(|r| &r.dalpha) }
}

/// One classical RK4 step of the torus-bundle flow.
pub fn torus_step(s: &BundleState, dt: f64) -> Result<BundleState> {
    let rhs = |st: &BundleState| flow_rhs_torus(&st.g, &st.q, &st.alpha);
    let k1 = rhs(s)?;
    let k2 = rhs(&s.advance(&k1, dt / 2.0)?)?;
    let k3 = rhs(&s.advance(&k2, dt / 2.0)?)?;
    let k4 = rhs(&s.advance(&k3, dt)?)?;
    s.advance(&combine([&k1, &k2, &k3, &k4]), dt)
}

/// Fixed-step RK4 integration; returns the states at every `record_every`-th
/// step, including the initial and final ones.
pub fn integrate_torus(s0: BundleState, dt: f64, t_end: f64, record_every: usize) -> Result<Vec<BundleState>> {
    if !(dt > 0.0) || !(t_end >= s0.t) {
        return Err(Error::domain("need dt > 0 and t_end >= t0"));
    }
    let steps = ((t_end - s0.t) / dt).ceil() as usize;
    let every = record_every.max(1);
    let mut out = vec![s0.clone()];
    let mut s = s0;
    for i in 1..=steps {
        let h = dt.min(t_end - s.t);
        s = torus_step(&s, h)?;
        if i % every == 0 || i == steps {
            out.push(s.clone());
        }
    }
    Ok(out)
}
