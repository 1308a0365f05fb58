//! Structure constants and the Levi-Civita geometry of a right-invariant
//! metric read in a left-invariant frame.
//!
//! In the frame {E_i} of left-invariant fields the components
//! Q_jk = Q(E_j, E_k) of a right-invariant metric are not constant; they
//! satisfy E_i Q_jk = c_ij^s Q_sk + c_ik^s Q_sj. Iterating that rule gives
//! every frame derivative of Q, so connection and curvature at a point are
//! functions of the structure constants and the value of Q there alone.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor_lab::linalg::spd_inverse;

/// Components c_ij^k of the bracket [E_i, E_j] = c_ij^k E_k.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    q: usize,
    data: Vec<f64>,
}

const JACOBI_TOL: f64 = 1e-12;

impl StructureConstants {
    /// Builds from a flat `[i][j][k]` array, checking antisymmetry and the
    /// Jacobi identity.
    pub fn new(q: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != q * q * q {
            return Err(Error::DimensionMismatch { expected: q * q * q, found: data.len() });
        }
        let c = Self { q, data };
        for i in 0..q {
            for j in 0..q {
                for k in 0..q {
                    if c.get(i, j, k) != -c.get(j, i, k) {
                        return Err(Error::domain("structure constants must be antisymmetric"));
                    }
                }
            }
        }
        let defect = c.jacobi_defect();
        if defect > JACOBI_TOL {
            return Err(Error::domain(format!("Jacobi identity violated by {defect:.3e}")));
        }
        Ok(c)
    }

    /// Builds from the list of nonzero brackets (i, j, k, value) with i < j;
    /// the (j, i) entries are filled in by antisymmetry.
    pub fn from_brackets(q: usize, brackets: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut data = vec![0.0; q * q * q];
        for &(i, j, k, v) in brackets {
            if i >= q || j >= q || k >= q {
                return Err(Error::DimensionMismatch { expected: q, found: i.max(j).max(k) + 1 });
            }
            data[(i * q + j) * q + k] += v;
            data[(j * q + i) * q + k] -= v;
        }
        Self::new(q, data)
    }

    pub fn abelian(q: usize) -> Self {
        Self { q, data: vec![0.0; q * q * q] }
    }

    /// su(2) with [E_1, E_2] = s E_3 and cyclic permutations.
    pub fn su2(s: f64) -> Self {
        Self::from_brackets(3, &[(0, 1, 2, s), (1, 2, 0, s), (2, 0, 1, s)])
            .expect("su(2) brackets satisfy Jacobi")
    }

    /// Type III algebra in basis (X, Y, Z): [X, Y] = Y, Z central.
    pub fn type_iii() -> Self {
        Self::from_brackets(3, &[(0, 1, 1, 1.0)]).expect("type III brackets satisfy Jacobi")
    }

    pub fn dim(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.q + j) * self.q + k]
    }

    pub fn is_abelian(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn jacobi_defect(&self) -> f64 {
        let q = self.q;
        let mut worst = 0.0_f64;
        for i in 0..q {
            for j in 0..q {
                for k in 0..q {
                    for l in 0..q {
                        let mut s = 0.0;
                        for m in 0..q {
                            s += self.get(i, j, m) * self.get(m, k, l)
                                + self.get(j, k, m) * self.get(m, i, l)
                                + self.get(k, i, m) * self.get(m, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Trace vector τ_s = c_us^u.
    pub fn trace_vector(&self) -> Vec<f64> {
        (0..self.q).map(|s| (0..self.q).map(|u| self.get(u, s, u)).sum()).collect()
    }

    /// Frame derivative of a symmetric q×q array along E_m:
    /// (E_m A)_jk = c_mj^s A_sk + c_mk^s A_sj.
    pub fn act(&self, m: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
        let q = self.q;
        DMatrix::from_fn(q, q, |j, k| {
            (0..q).map(|s| self.get(m, j, s) * a[(s, k)] + self.get(m, k, s) * a[(s, j)]).sum()
        })
    }
}

/// Ricci tensor and connection of a right-invariant metric in the
/// left-invariant frame.
#[derive(Debug, Clone)]
pub struct LieRicci {
    pub ric: DMatrix<f64>,
    q: usize,
    connection: Vec<f64>,
}

impl LieRicci {
    /// Γ_ij^m with ∇_{E_i} E_j = Γ_ij^m E_m.
    pub fn connection(&self, i: usize, j: usize, m: usize) -> f64 {
        self.connection[(i * self.q + j) * self.q + m]
    }
}

pub fn lie_group_ricci(c: &StructureConstants, qm: &DMatrix<f64>) -> Result<LieRicci> {
    let q = c.dim();
    if qm.nrows() != q || qm.ncols() != q {
        return Err(Error::DimensionMismatch { expected: q, found: qm.nrows() });
    }
    let q_inv = spd_inverse(qm)?;
    // frame derivatives E_i Q and E_l E_i Q = act_i(act_l Q)
    let dq: Vec<DMatrix<f64>> = (0..q).map(|i| c.act(i, qm)).collect();
    let ddq: Vec<Vec<DMatrix<f64>>> =
        (0..q).map(|l| (0..q).map(|i| c.act(i, &dq[l])).collect()).collect();
    // ⟨[E_a, E_b], E_d⟩ for a given metric array
    let bracket = |a: usize, b: usize, d: usize, metric: &DMatrix<f64>| -> f64 {
        (0..q).map(|s| c.get(a, b, s) * metric[(s, d)]).sum()
    };
    // Koszul: K_ijk = ⟨∇_{E_i} E_j, E_k⟩
    let koszul = |i: usize, j: usize, k: usize, d1: &[DMatrix<f64>], metric: &DMatrix<f64>| -> f64 {
        0.5 * (d1[i][(j, k)] + d1[j][(i, k)] - d1[k][(i, j)] + bracket(i, j, k, metric)
            - bracket(j, k, i, metric)
            + bracket(k, i, j, metric))
    };
    let idx = |i: usize, j: usize, m: usize| (i * q + j) * q + m;
    let mut kz = vec![0.0; q * q * q];
    for i in 0..q {
        for j in 0..q {
            for k in 0..q {
                kz[idx(i, j, k)] = koszul(i, j, k, &dq, qm);
            }
        }
    }
    let mut gamma = vec![0.0; q * q * q];
    for i in 0..q {
        for j in 0..q {
            for m in 0..q {
                gamma[idx(i, j, m)] = (0..q).map(|k| q_inv[(m, k)] * kz[idx(i, j, k)]).sum();
            }
        }
    }
    // E_l Γ_ij^m
    let mut dgamma = vec![0.0; q * q * q * q];
    for l in 0..q {
        let dq_inv = -(&q_inv * &dq[l] * &q_inv);
        for i in 0..q {
            for j in 0..q {
                for m in 0..q {
                    let mut v = 0.0;
                    for k in 0..q {
                        let dk = koszul(i, j, k, &ddq[l], &dq[l]);
                        v += dq_inv[(m, k)] * kz[idx(i, j, k)] + q_inv[(m, k)] * dk;
                    }
                    dgamma[l * q * q * q + idx(i, j, m)] = v;
                }
            }
        }
    }
    let dg = |l: usize, i: usize, j: usize, m: usize| dgamma[l * q * q * q + idx(i, j, m)];
    let gm = |i: usize, j: usize, m: usize| gamma[idx(i, j, m)];
    let mut ric = DMatrix::zeros(q, q);
    for j in 0..q {
        for k in 0..q {
            let mut v = 0.0;
            for i in 0..q {
                v += dg(i, j, k, i) - dg(j, i, k, i);
                for m in 0..q {
                    v += gm(j, k, m) * gm(i, m, i) - gm(i, k, m) * gm(j, m, i) - c.get(i, j, m) * gm(m, k, i);
                }
            }
            ric[(j, k)] = v;
        }
    }
    Ok(LieRicci { ric, q, connection: gamma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn abelian_is_flat() {
        let c = StructureConstants::abelian(3);
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let r = lie_group_ricci(&c, &q).unwrap();
        assert_eq!(r.ric.abs().max(), 0.0);
    }

    #[test]
    fn bi_invariant_su2() {
        // constant curvature ¼ on a 3-manifold: Ric = 2·¼ = ½
        let r = lie_group_ricci(&StructureConstants::su2(1.0), &DMatrix::identity(3, 3)).unwrap();
        assert!((&r.ric - DMatrix::identity(3, 3) * 0.5).abs().max() < 1e-14);
        // bi-invariant: ∇_X Y = ½[X, Y]
        assert!((r.connection(0, 1, 2) - 0.5).abs() < 1e-15);
        assert!((r.connection(1, 0, 2) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn berger_ricci_is_diagonal_and_symmetric() {
        let r = lie_group_ricci(&StructureConstants::su2(2.0), &diag(&[1.0, 4.0, 4.0])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(r.ric[(i, j)].abs() < 1e-13);
                }
            }
        }
        assert!((r.ric[(1, 1)] - r.ric[(2, 2)]).abs() < 1e-13);
    }

    #[test]
    fn jacobi_and_antisymmetry_are_enforced() {
        assert!(StructureConstants::su2(1.0).jacobi_defect() < 1e-15);
        assert!(StructureConstants::new(2, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        // [E0,E1]=E2, [E0,E2]=E0, [E1,E2]=0 violates Jacobi
        let bad = StructureConstants::from_brackets(3, &[(0, 1, 2, 1.0), (0, 2, 0, 1.0)]);
        assert!(bad.is_err());
    }

    #[test]
    fn trace_vector_of_type_iii() {
        let c = StructureConstants::type_iii();
        // c_uX^u = c_YX^Y = −1
        assert_eq!(c.trace_vector(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(StructureConstants::su2(1.0).trace_vector(), vec![0.0; 3]);
    }
}
