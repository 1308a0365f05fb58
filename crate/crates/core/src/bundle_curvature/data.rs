use nalgebra::DMatrix;

use super::lie::StructureConstants;
use crate::error::{Error, Result};
use crate::tensor_lab::geometry::Christoffel;

/// Every pointwise input of the bundle Ricci formulas at one base point.
///
/// Index layout: `dq[ν]` is D_ν Q (q×q), `ddq[β][γ]` is the raw second
/// derivative D_β D_γ Q − Γ^τ_βγ D_τ Q (not symmetrized in β, γ), `f[k]` is
/// F^k as a dims×dims matrix and `div_f` holds g^{λν} ∇_ν F^k_λγ as a q×dims
/// matrix.
#[derive(Debug, Clone)]
pub struct PointwiseBundleData {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub gamma: Christoffel,
    pub q: DMatrix<f64>,
    pub q_inv: DMatrix<f64>,
    pub dq: Vec<DMatrix<f64>>,
    pub ddq: Vec<Vec<DMatrix<f64>>>,
    pub f: Vec<DMatrix<f64>>,
    pub div_f: DMatrix<f64>,
    pub c: StructureConstants,
    pub ric_base: DMatrix<f64>,
    pub ric_fiber_alg: DMatrix<f64>,
}

impl PointwiseBundleData {
    pub fn base_dims(&self) -> usize {
        self.g.nrows()
    }

    pub fn fiber_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.base_dims();
        let q = self.fiber_dim();
        let square = |m: &DMatrix<f64>, n: usize| -> Result<()> {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
            }
            Ok(())
        };
        square(&self.g, d)?;
        square(&self.g_inv, d)?;
        square(&self.ric_base, d)?;
        square(&self.q, q)?;
        square(&self.q_inv, q)?;
        square(&self.ric_fiber_alg, q)?;
        if self.gamma.dims() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.gamma.dims() });
        }
        if self.c.dim() != q {
            return Err(Error::DimensionMismatch { expected: q, found: self.c.dim() });
        }
        if self.dq.len() != d || self.ddq.len() != d || self.ddq.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: self.dq.len() });
        }
        for m in self.dq.iter().chain(self.ddq.iter().flatten()) {
            square(m, q)?;
        }
        if self.f.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: self.f.len() });
        }
        for m in &self.f {
            square(m, d)?;
        }
        if self.div_f.nrows() != q || self.div_f.ncols() != d {
            return Err(Error::DimensionMismatch { expected: q * d, found: self.div_f.len() });
        }
        Ok(())
    }
}

/// The three blocks of the total-space Ricci tensor in the frame
/// (horizontal lifts V_β, fundamental fields E_j).
#[derive(Debug, Clone, PartialEq)]
pub struct RicciBlocks {
    /// q×q, R̃ic(E_j, E_k)
    pub fiber: DMatrix<f64>,
    /// q×dims, R̃ic(E_j, V_γ)
    pub mixed: DMatrix<f64>,
    /// dims×dims, R̃ic(V_β, V_γ)
    pub base: DMatrix<f64>,
}

impl RicciBlocks {
    pub fn max_abs_diff(&self, other: &RicciBlocks) -> f64 {
        let d = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).abs().max();
        d(&self.fiber, &other.fiber).max(d(&self.mixed, &other.mixed)).max(d(&self.base, &other.base))
    }

    pub fn max_abs(&self) -> f64 {
        self.fiber.abs().max().max(self.mixed.abs().max()).max(self.base.abs().max())
    }
}
