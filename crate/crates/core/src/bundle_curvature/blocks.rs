//! Ricci blocks of a bundle metric g + Q(μ, μ), evaluated from pointwise data.
//!
//! The torus evaluator and the general evaluator share the terms that do not
//! involve structure constants and evaluate them in the same order, so with
//! c = 0 the two agree exactly.

use nalgebra::DMatrix;

use super::data::{PointwiseBundleData, RicciBlocks};
use crate::error::{Error, Result};
use crate::tensor_lab::linalg::asymmetry;

/// Q^{su} D_τ Q_su for every base direction τ.
fn log_det_gradient(d: &PointwiseBundleData) -> Vec<f64> {
    d.dq.iter().map(|dq| d.q_inv.component_mul(dq).sum()).collect()
}

/// Q_js F^s as a dims×dims matrix, one per j.
fn lowered_curvature(d: &PointwiseBundleData) -> Vec<DMatrix<f64>> {
    let q = d.fiber_dim();
    (0..q)
        .map(|j| {
            let mut out = DMatrix::zeros(d.base_dims(), d.base_dims());
            for s in 0..q {
                out += &d.f[s] * d.q[(j, s)];
            }
            out
        })
        .collect()
}

fn shared_blocks(d: &PointwiseBundleData) -> RicciBlocks {
    let dims = d.base_dims();
    let q = d.fiber_dim();
    let gi = &d.g_inv;
    let trq = log_det_gradient(d);
    let qf = lowered_curvature(d);

    let mut fiber = DMatrix::zeros(q, q);
    for j in 0..q {
        for k in 0..q {
            let mut t1 = 0.0;
            let mut t3 = 0.0;
            let mut t4 = 0.0;
            for a in 0..dims {
                for b in 0..dims {
                    t1 += gi[(a, b)] * trq[a] * d.dq[b][(j, k)];
                    t3 += gi[(a, b)] * d.ddq[a][b][(j, k)];
                    for s in 0..q {
                        for u in 0..q {
                            t4 += d.q_inv[(s, u)] * gi[(a, b)] * d.dq[b][(j, s)] * d.dq[a][(k, u)];
                        }
                    }
                }
            }
            let mut t2 = 0.0;
            for l in 0..dims {
                for n in 0..dims {
                    for t in 0..dims {
                        for x in 0..dims {
                            t2 += gi[(l, n)] * gi[(t, x)] * qf[j][(l, t)] * qf[k][(n, x)];
                        }
                    }
                }
            }
            fiber[(j, k)] = -0.25 * t1 + 0.25 * t2 - 0.5 * t3 + 0.5 * t4;
        }
    }

    let mut mixed = DMatrix::zeros(q, dims);
    for j in 0..q {
        for c in 0..dims {
            let mut t1 = 0.0;
            for l in 0..q {
                for t in 0..dims {
                    for n in 0..dims {
                        t1 += d.q[(j, l)] * gi[(t, n)] * d.f[l][(c, n)] * trq[t];
                    }
                }
            }
            let mut t2 = 0.0;
            for a in 0..dims {
                for n in 0..dims {
                    for s in 0..q {
                        t2 += gi[(a, n)] * d.dq[a][(j, s)] * d.f[s][(c, n)];
                    }
                }
            }
            let mut t3 = 0.0;
            for s in 0..q {
                t3 += d.q[(j, s)] * d.div_f[(s, c)];
            }
            mixed[(j, c)] = 0.25 * t1 + 0.5 * t2 - 0.5 * t3;
        }
    }

    let mut base = d.ric_base.clone();
    let dq_inv: Vec<DMatrix<f64>> = d.dq.iter().map(|dq| -(&d.q_inv * dq * &d.q_inv)).collect();
    for b in 0..dims {
        for c in 0..dims {
            let mut t1 = 0.0;
            for l in 0..dims {
                for n in 0..dims {
                    for s in 0..q {
                        for u in 0..q {
                            t1 += gi[(l, n)] * d.q[(s, u)] * d.f[s][(b, l)] * d.f[u][(c, n)];
                        }
                    }
                }
            }
            let t2 = dq_inv[b].component_mul(&d.dq[c]).sum();
            let t3 = d.q_inv.component_mul(&d.ddq[b][c]).sum();
            base[(b, c)] += -0.5 * t1 - 0.25 * t2 - 0.5 * t3;
        }
    }
    RicciBlocks { fiber, mixed, base }
}

/// Blocks for torus fibers. Requires vanishing structure constants and fiber
/// Ricci; the result is not symmetrized.
pub fn ricci_blocks_torus(d: &PointwiseBundleData) -> Result<RicciBlocks> {
    d.validate()?;
    if !d.c.is_abelian() {
        return Err(Error::domain("torus evaluator needs vanishing structure constants"));
    }
    if d.ric_fiber_alg.abs().max() != 0.0 {
        return Err(Error::domain("torus evaluator needs vanishing fiber Ricci"));
    }
    Ok(shared_blocks(d))
}

/// Blocks for an arbitrary structure group: the torus terms followed by the
/// fiber Ricci and every term carrying structure constants.
pub fn ricci_blocks_general(d: &PointwiseBundleData) -> Result<RicciBlocks> {
    d.validate()?;
    let mut out = shared_blocks(d);
    let dims = d.base_dims();
    let q = d.fiber_dim();
    let c = &d.c;
    let tau = c.trace_vector();
    // Q^{sb} c_ub^u
    let tau_up: Vec<f64> = (0..q).map(|s| (0..q).map(|b| d.q_inv[(s, b)] * tau[b]).sum()).collect();

    out.fiber += &d.ric_fiber_alg;
    for j in 0..q {
        for g in 0..dims {
            let mut t = 0.0;
            for s in 0..q {
                for m in 0..q {
                    let raised: f64 = (0..q).map(|a| d.q_inv[(s, a)] * c.get(a, j, m)).sum();
                    t += 0.5 * raised * d.dq[g][(s, m)];
                }
                t -= 0.5 * tau_up[s] * d.dq[g][(j, s)];
            }
            out.mixed[(j, g)] += t;
        }
    }
    for b in 0..dims {
        for g in 0..dims {
            let t: f64 = (0..q).map(|s| tau[s] * d.f[s][(b, g)]).sum();
            out.base[(b, g)] += 0.5 * t;
        }
    }
    Ok(out)
}

/// Flow velocities from the blocks: (−2·base, −2·fiber, −2 Q^{-1}·mixed).
pub fn flow_from_blocks(
    blocks: &RicciBlocks,
    q_inv: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (&blocks.base * -2.0, &blocks.fiber * -2.0, q_inv * &blocks.mixed * -2.0)
}

/// Largest skew part of the fiber and base blocks.
pub fn block_asymmetry(b: &RicciBlocks) -> f64 {
    asymmetry(&b.fiber).max(asymmetry(&b.base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle_curvature::lie::{lie_group_ricci, StructureConstants};
    use crate::tensor_lab::geometry::Christoffel;

    fn flat_data(dims: usize, q: DMatrix<f64>, c: StructureConstants) -> PointwiseBundleData {
        let k = q.nrows();
        let ric_fiber_alg = lie_group_ricci(&c, &q).unwrap().ric;
        PointwiseBundleData {
            g: DMatrix::identity(dims, dims),
            g_inv: DMatrix::identity(dims, dims),
            gamma: Christoffel::zeros(dims),
            q_inv: q.clone().try_inverse().unwrap(),
            q,
            dq: vec![DMatrix::zeros(k, k); dims],
            ddq: vec![vec![DMatrix::zeros(k, k); dims]; dims],
            f: vec![DMatrix::zeros(dims, dims); k],
            div_f: DMatrix::zeros(k, dims),
            c,
            ric_base: DMatrix::zeros(dims, dims),
            ric_fiber_alg,
        }
    }

    #[test]
    fn trivial_product_is_flat() {
        let d = flat_data(2, DMatrix::identity(2, 2), StructureConstants::abelian(2));
        let b = ricci_blocks_general(&d).unwrap();
        assert_eq!(b.max_abs(), 0.0);
        assert_eq!(ricci_blocks_torus(&d).unwrap(), b);
    }

    #[test]
    fn su2_product_has_only_fiber_curvature() {
        let d = flat_data(2, DMatrix::identity(3, 3), StructureConstants::su2(1.0));
        let b = ricci_blocks_general(&d).unwrap();
        assert!((&b.fiber - DMatrix::identity(3, 3) * 0.5).abs().max() < 1e-14);
        assert_eq!(b.mixed.abs().max(), 0.0);
        assert_eq!(b.base.abs().max(), 0.0);
        assert!(ricci_blocks_torus(&d).is_err());
    }

    #[test]
    fn heisenberg_hand_values() {
        // flat base, Q = c², F_xy = −1
        let c2 = 2.25;
        let mut d = flat_data(2, DMatrix::from_element(1, 1, c2), StructureConstants::abelian(1));
        d.f[0] = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = ricci_blocks_torus(&d).unwrap();
        assert!((b.fiber[(0, 0)] - c2 * c2 / 2.0).abs() < 1e-14);
        assert!((&b.base + DMatrix::identity(2, 2) * (c2 / 2.0)).abs().max() < 1e-14);
        assert_eq!(b.mixed.abs().max(), 0.0);
    }

    #[test]
    fn einstein_base_passes_through() {
        let mut d = flat_data(2, DMatrix::from_element(1, 1, 3.0), StructureConstants::abelian(1));
        d.ric_base = DMatrix::identity(2, 2) * 0.7;
        let b = ricci_blocks_torus(&d).unwrap();
        assert_eq!(b.base, DMatrix::identity(2, 2) * 0.7);
        assert_eq!(b.fiber.abs().max(), 0.0);
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let mut d = flat_data(2, DMatrix::identity(1, 1), StructureConstants::abelian(1));
        d.div_f = DMatrix::zeros(2, 2);
        assert!(matches!(ricci_blocks_general(&d), Err(Error::DimensionMismatch { .. })));
    }
}
