use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition-number cap beyond which a metric is treated as singular.
pub const COND_CAP: f64 = 1e12;

/// Inverts a symmetric positive-definite matrix, rejecting it when its
/// spectral condition number exceeds [`COND_CAP`].
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if n == 1 {
        let v = m[(0, 0)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::SingularMetric { cond: f64::INFINITY });
        }
        return Ok(DMatrix::from_element(1, 1, 1.0 / v));
    }
    let cond = condition_number(m);
    if !(cond <= COND_CAP) {
        return Err(Error::SingularMetric { cond });
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularMetric { cond: f64::INFINITY })
}

/// Spectral condition number of a symmetric matrix; infinite when it is not
/// positive definite.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Leading-principal-minor test for positive definiteness.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (1..=n).all(|k| {
        let d = m.view((0, 0), (k, k)).determinant();
        d > 0.0 && d.is_finite()
    })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut out = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            out = out.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    out
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the endomorphism g^{-1} T for symmetric `t`, sorted ascending.
/// Computed on the congruent symmetric matrix L^{-1} T L^{-T}.
pub fn operator_eigenvalues(g: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or(Error::SingularMetric { cond: f64::INFINITY })?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or(Error::SingularMetric { cond: f64::INFINITY })?;
    let s = &l_inv * symmetrize(t) * l_inv.transpose();
    let mut eig: Vec<f64> = symmetrize(&s).symmetric_eigenvalues().iter().cloned().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]));
        let inv = spd_inverse(&m).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ill_conditioned_is_singular() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-13]));
        assert!(matches!(spd_inverse(&m), Err(Error::SingularMetric { .. })));
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spd_inverse(&neg), Err(Error::SingularMetric { .. })));
        assert!(!is_positive_definite(&neg));
    }

    #[test]
    fn operator_eigenvalues_scale_with_metric() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0]));
        let eig = operator_eigenvalues(&g, &t).unwrap();
        assert!((eig[0] - 0.5).abs() < 1e-14);
        assert!((eig[1] - 2.0).abs() < 1e-14);
    }
}
