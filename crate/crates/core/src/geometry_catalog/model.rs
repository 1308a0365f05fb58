//! Bundles given in closed form: base metric, fiber metric and connection as
//! functions of the base point, together with a chart on the structure
//! group. Produces both the pointwise inputs of the block formulas and the
//! total-space coordinate metric used as an independent oracle.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bundle_curvature::data::{PointwiseBundleData, RicciBlocks};
use crate::bundle_curvature::lie::{lie_group_ricci, StructureConstants};
use crate::error::{Error, Result};
use crate::tensor_lab::field::CoordinateMetric;
use crate::tensor_lab::geometry::{christoffel_from, ricci, ricci_kernel, Christoffel};
use crate::tensor_lab::linalg::{spd_inverse, symmetrize};

/// Step of the fourth-order stencils that produce model data. Kept apart
/// from the oracle step so the two error sources stay separable.
pub const DATA_STEP: f64 = 2e-3;

type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Coordinates on a neighbourhood of the identity of the structure group,
/// with the identity at the origin and θ_R = dh·h⁻¹ equal to the identity
/// matrix there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupChart {
    /// ℝ^q or a torus; θ_R is the identity everywhere.
    Abelian(usize),
    /// SU(2) in the basis E_m = (s/2)·(i, j, k), so [E_1, E_2] = s E_3.
    /// Points are unit quaternions (√(1 − s²|y|²/4), s·y/2).
    Su2 { scale: f64 },
    /// Type III group {[[x, y], [0, 1]]} × ℝ with x = 1 + y_0.
    TypeIII,
}

impl GroupChart {
    pub fn dim(&self) -> usize {
        match *self {
            GroupChart::Abelian(q) => q,
            GroupChart::Su2 { .. } | GroupChart::TypeIII => 3,
        }
    }

    pub fn structure_constants(&self) -> StructureConstants {
        match *self {
            GroupChart::Abelian(q) => StructureConstants::abelian(q),
            GroupChart::Su2 { scale } => StructureConstants::su2(scale),
            GroupChart::TypeIII => StructureConstants::type_iii(),
        }
    }

    /// θ_R(∂_{y_a}) in the Lie algebra basis, as the columns of a q×q matrix.
    pub fn right_form(&self, y: &[f64]) -> DMatrix<f64> {
        match *self {
            GroupChart::Abelian(q) => DMatrix::identity(q, q),
            GroupChart::Su2 { scale: s } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let w = (1.0 - s * s * r2 / 4.0).sqrt();
                let p = [w, s * y[0] / 2.0, s * y[1] / 2.0, s * y[2] / 2.0];
                DMatrix::from_fn(3, 3, |m, a| {
                    // ∂_a of the quaternion, then multiplied by the conjugate of p
                    let mut dp = [-s * s * y[a] / (4.0 * w), 0.0, 0.0, 0.0];
                    dp[a + 1] = s / 2.0;
                    let pc = [p[0], -p[1], -p[2], -p[3]];
                    quat_mul(&dp, &pc)[m + 1] / (s / 2.0)
                })
            }
            GroupChart::TypeIII => {
                let x = 1.0 + y[0];
                DMatrix::from_row_slice(3, 3, &[1.0 / x, 0.0, 0.0, -y[1] / x, 1.0, 0.0, 0.0, 0.0, 1.0])
            }
        }
    }
}

fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Fourth-order central first derivative along `axis`.
fn d1<T>(f: &dyn Fn(&[f64]) -> T, x: &[f64], axis: usize, h: f64) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let at = |k: f64| {
        let mut p = x.to_vec();
        p[axis] += k * h;
        f(&p)
    };
    (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) * (1.0 / (12.0 * h))
}

fn christoffel_d1(f: &dyn Fn(&[f64]) -> Christoffel, x: &[f64], axis: usize, h: f64) -> Christoffel {
    let at = |k: f64| {
        let mut p = x.to_vec();
        p[axis] += k * h;
        f(&p)
    };
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    let d = m2.dims();
    let mut out = Christoffel::zeros(d);
    for l in 0..d {
        for b in 0..d {
            for c in 0..d {
                let v = m2.get(l, b, c) - p2.get(l, b, c) + 8.0 * (p1.get(l, b, c) - m1.get(l, b, c));
                out.set(l, b, c, v / (12.0 * h));
            }
        }
    }
    out
}

/// A principal bundle with invariant metric, in closed form.
#[derive(Clone)]
pub struct BundleModel {
    pub name: String,
    base_dims: usize,
    group: GroupChart,
    base: MatFn,
    fiber: MatFn,
    connection: MatFn,
}

impl fmt::Debug for BundleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BundleModel")
            .field("name", &self.name)
            .field("base_dims", &self.base_dims)
            .field("group", &self.group)
            .finish_non_exhaustive()
    }
}

/// Formula blocks against the finite-difference Ricci of the total metric
/// at steps h and h/2.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub formula: RicciBlocks,
    pub oracle: RicciBlocks,
    pub oracle_half: RicciBlocks,
    pub error: f64,
    pub error_half: f64,
}

impl OracleComparison {
    /// error(h)/error(h/2); close to 4 for a second-order oracle.
    pub fn richardson_ratio(&self) -> f64 {
        self.error / self.error_half
    }
}

impl BundleModel {
    /// `base(x)` is d×d, `fiber(x)` is Q at the identity (q×q) and
    /// `connection(x)` holds α^k_β as a q×d matrix.
    pub fn new(
        name: impl Into<String>,
        base_dims: usize,
        group: GroupChart,
        base: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        fiber: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        connection: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            base_dims,
            group,
            base: Arc::new(base),
            fiber: Arc::new(fiber),
            connection: Arc::new(connection),
        }
    }

    pub fn base_dims(&self) -> usize {
        self.base_dims
    }

    pub fn group(&self) -> GroupChart {
        self.group
    }

    pub fn base_metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.base)(x)
    }

    pub fn fiber_metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.fiber)(x)
    }

    pub fn connection(&self, x: &[f64]) -> DMatrix<f64> {
        (self.connection)(x)
    }

    /// g + Q(α + θ_R, α + θ_R) in coordinates (x, y).
    pub fn total_metric(&self) -> CoordinateMetric {
        let d = self.base_dims;
        let q = self.group.dim();
        let model = self.clone();
        CoordinateMetric::new(d + q, move |p| {
            let (x, y) = p.split_at(d);
            let mut a = DMatrix::zeros(q, d + q);
            a.view_mut((0, 0), (q, d)).copy_from(&(model.connection)(x));
            a.view_mut((0, d), (q, q)).copy_from(&model.group.right_form(y));
            let mut out = a.transpose() * (model.fiber)(x) * &a;
            let g = (model.base)(x);
            let mut top = out.view_mut((0, 0), (d, d));
            top += g;
            out
        })
    }

    /// F^p_βγ = ∂_β α^p_γ − ∂_γ α^p_β + c_ab^p α^a_β α^b_γ.
    pub fn curvature(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let d = self.base_dims;
        let c = self.group.structure_constants();
        let q = c.dim();
        let conn = &*self.connection;
        let da: Vec<DMatrix<f64>> = (0..d).map(|b| d1(conn, x, b, DATA_STEP)).collect();
        let a = conn(x);
        (0..q)
            .map(|p| {
                DMatrix::from_fn(d, d, |b, g| {
                    let mut v = da[b][(p, g)] - da[g][(p, b)];
                    for i in 0..q {
                        for j in 0..q {
                            v += c.get(i, j, p) * a[(i, b)] * a[(j, g)];
                        }
                    }
                    v
                })
            })
            .collect()
    }

    fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        let g = (self.base)(x);
        let g_inv = spd_inverse(&g)?;
        let base = &*self.base;
        let dg: Vec<DMatrix<f64>> = (0..self.base_dims).map(|a| d1(base, x, a, DATA_STEP)).collect();
        Ok(christoffel_from(&g_inv, &dg))
    }

    /// Horizontal derivative D_γQ = ∂_γQ − α^m_γ (E_m Q) at base point x.
    fn horizontal_dq(&self, x: &[f64], c: &StructureConstants) -> Vec<DMatrix<f64>> {
        let qm = (self.fiber)(x);
        let a = (self.connection)(x);
        let fiber = &*self.fiber;
        (0..self.base_dims)
            .map(|g| {
                let mut m = d1(fiber, x, g, DATA_STEP);
                for k in 0..c.dim() {
                    m -= c.act(k, &qm) * a[(k, g)];
                }
                m
            })
            .collect()
    }

    /// All inputs of the block formulas at base point x.
    pub fn pointwise_data(&self, x: &[f64]) -> Result<PointwiseBundleData> {
        let d = self.base_dims;
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        let c = self.group.structure_constants();
        let q = c.dim();
        let g = (self.base)(x);
        let g_inv = spd_inverse(&g)?;
        let gamma = self.christoffel_at(x)?;
        let gamma_fn = |p: &[f64]| self.christoffel_at(p).expect("base metric stays definite near x");
        let dgamma: Vec<Christoffel> = (0..d).map(|a| christoffel_d1(&gamma_fn, x, a, DATA_STEP)).collect();
        let ric_base = symmetrize(&ricci_kernel(&gamma, &dgamma));

        let qm = (self.fiber)(x);
        let q_inv = spd_inverse(&qm)?;
        let alpha = (self.connection)(x);
        let dq = self.horizontal_dq(x, &c);
        let ddq: Vec<Vec<DMatrix<f64>>> = (0..d)
            .map(|b| {
                (0..d)
                    .map(|gi| {
                        let pg = |p: &[f64]| self.horizontal_dq(p, &c).swap_remove(gi);
                        let mut m = d1(&pg, x, b, DATA_STEP);
                        for k in 0..q {
                            m -= c.act(k, &dq[gi]) * alpha[(k, b)];
                        }
                        for (t, dqt) in dq.iter().enumerate() {
                            m -= dqt * gamma.get(t, b, gi);
                        }
                        m
                    })
                    .collect()
            })
            .collect();

        let f = self.curvature(x);
        let df: Vec<Vec<DMatrix<f64>>> = (0..d)
            .map(|l| {
                (0..q)
                    .map(|p| {
                        let fp = |y: &[f64]| self.curvature(y).swap_remove(p);
                        let mut m = d1(&fp, x, l, DATA_STEP);
                        for mi in 0..q {
                            for k in 0..q {
                                let cf = c.get(mi, k, p) * alpha[(mi, l)];
                                if cf != 0.0 {
                                    m += &f[k] * cf;
                                }
                            }
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        let mut div_f = DMatrix::zeros(q, d);
        for p in 0..q {
            for gi in 0..d {
                let mut v = 0.0;
                for l in 0..d {
                    for n in 0..d {
                        let mut cov = df[n][p][(l, gi)];
                        for s in 0..d {
                            cov -= gamma.get(s, n, l) * f[p][(s, gi)] + gamma.get(s, n, gi) * f[p][(l, s)];
                        }
                        v += g_inv[(l, n)] * cov;
                    }
                }
                div_f[(p, gi)] = v;
            }
        }
        let ric_fiber_alg = lie_group_ricci(&c, &qm)?.ric;
        Ok(PointwiseBundleData { g, g_inv, gamma, q: qm, q_inv, dq, ddq, f, div_f, c, ric_base, ric_fiber_alg })
    }

    /// Finite-difference Ricci of the total metric at (x, identity) with
    /// step h, expressed in the frame (V_β, E_j).
    pub fn oracle_blocks(&self, x: &[f64], h: f64) -> Result<RicciBlocks> {
        let d = self.base_dims;
        let q = self.group.dim();
        let metric = self.total_metric().with_step(h);
        let mut p = x.to_vec();
        p.extend(std::iter::repeat_n(0.0, q));
        let ric = ricci(&metric, &p)?.ric;
        let a = (self.connection)(x);
        // V_β = ∂_β − α^k_β ∂_{y_k} at the identity
        let mut frame = DMatrix::zeros(d + q, d + q);
        for b in 0..d {
            frame[(b, b)] = 1.0;
            for k in 0..q {
                frame[(d + k, b)] = -a[(k, b)];
            }
        }
        for k in 0..q {
            frame[(d + k, d + k)] = 1.0;
        }
        let r = frame.transpose() * ric * frame;
        Ok(RicciBlocks {
            fiber: r.view((d, d), (q, q)).into_owned(),
            mixed: r.view((d, 0), (q, d)).into_owned(),
            base: r.view((0, 0), (d, d)).into_owned(),
        })
    }

    pub fn compare_with_oracle(
        &self,
        x: &[f64],
        h: f64,
        blocks: impl Fn(&PointwiseBundleData) -> Result<RicciBlocks>,
    ) -> Result<OracleComparison> {
        let formula = blocks(&self.pointwise_data(x)?)?;
        let oracle = self.oracle_blocks(x, h)?;
        let oracle_half = self.oracle_blocks(x, h / 2.0)?;
        Ok(OracleComparison {
            error: formula.max_abs_diff(&oracle),
            error_half: formula.max_abs_diff(&oracle_half),
            formula,
            oracle,
            oracle_half,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle_curvature::blocks::ricci_blocks_general;

    #[test]
    fn right_forms_are_identity_at_origin() {
        for g in [GroupChart::Abelian(2), GroupChart::Su2 { scale: 2.0 }, GroupChart::TypeIII] {
            let q = g.dim();
            let r = g.right_form(&vec![0.0; q]);
            assert!((r - DMatrix::identity(q, q)).abs().max() < 1e-15);
        }
    }

    #[test]
    fn su2_right_form_satisfies_maurer_cartan() {
        // θ = dh·h⁻¹ satisfies ∂_a θ_b − ∂_b θ_a = [θ_a, θ_b]
        let s = 1.5;
        let g = GroupChart::Su2 { scale: s };
        let c = g.structure_constants();
        let y = [0.2, -0.1, 0.3];
        let rf = |p: &[f64]| g.right_form(p);
        let dr: Vec<DMatrix<f64>> = (0..3).map(|a| d1(&rf, &y, a, 1e-3)).collect();
        let r = g.right_form(&y);
        for a in 0..3 {
            for b in 0..3 {
                for m in 0..3 {
                    let lhs = dr[a][(m, b)] - dr[b][(m, a)];
                    let mut br = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            br += c.get(i, j, m) * r[(i, a)] * r[(j, b)];
                        }
                    }
                    assert!((lhs - br).abs() < 1e-9, "a={a} b={b} m={m}: {lhs} vs {br}");
                }
            }
        }
    }

    #[test]
    fn type_iii_right_form_satisfies_maurer_cartan() {
        let g = GroupChart::TypeIII;
        let c = g.structure_constants();
        let y = [0.3, 0.7, -0.2];
        let rf = |p: &[f64]| g.right_form(p);
        let dr: Vec<DMatrix<f64>> = (0..3).map(|a| d1(&rf, &y, a, 1e-3)).collect();
        let r = g.right_form(&y);
        for a in 0..3 {
            for b in 0..3 {
                for m in 0..3 {
                    let lhs = dr[a][(m, b)] - dr[b][(m, a)];
                    let mut br = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            br += c.get(i, j, m) * r[(i, a)] * r[(j, b)];
                        }
                    }
                    assert!((lhs - br).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bi_invariant_su2_total_metric_is_einstein() {
        let m = BundleModel::new(
            "su2",
            1,
            GroupChart::Su2 { scale: 2.0 },
            |_| DMatrix::identity(1, 1),
            |_| DMatrix::identity(3, 3),
            |_| DMatrix::zeros(3, 1),
        );
        let b = m.oracle_blocks(&[0.0], 1e-3).unwrap();
        assert!((b.fiber - DMatrix::identity(3, 3) * 2.0).abs().max() < 1e-5);
        let c = m.compare_with_oracle(&[0.0], 1e-3, ricci_blocks_general).unwrap();
        assert!(c.error < 1e-5);
    }
}
