//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{NldError, Result};

/// Pivot ratio below which an LU factorization counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// LU factorization with partial pivoting plus the ratio min|U_ii| / max|U_ii|.
pub struct Lu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub pivot_ratio: f64,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>) -> Result<Lu> {
        if a.nrows() != a.ncols() {
            return Err(NldError::Linalg(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(NldError::NonFinite("matrix entry".into()));
        }
        let lu = a.clone().lu();
        let u = lu.u();
        let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let pivot_ratio = if max > 0.0 { min / max } else { 0.0 };
        Ok(Lu { lu, pivot_ratio })
    }

    pub fn is_singular(&self) -> bool {
        !(self.pivot_ratio >= SINGULAR_PIVOT_RATIO)
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or_else(|| NldError::Linalg("LU solve failed on a singular matrix".into()))
    }
}

/// Solves a x = b by LU with partial pivoting; errors when singular to
/// working precision.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = Lu::new(a)?;
    if lu.is_singular() {
        return Err(NldError::Linalg(format!(
            "matrix singular to working precision (pivot ratio {:e})",
            lu.pivot_ratio
        )));
    }
    lu.solve(b)
}

pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues (ascending) of the symmetric pencil (A, B) with B positive
/// definite, via Cholesky B = L L^T and the eigenvalues of L^{-1} A L^{-T}.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| NldError::Linalg("right-hand matrix of the pencil is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| NldError::Linalg("Cholesky factor not invertible".into()))?;
    let c = &linv * symmetric_part(a) * linv.transpose();
    let c = symmetric_part(&c);
    let eig = c.symmetric_eigenvalues();
    let mut v: Vec<f64> = eig.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NldError::Linalg("eigenvalue solver returned non-finite values".into()));
    }
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(v)
}

pub fn min_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(generalized_eigenvalues(a, b)?[0])
}

pub fn quad_form(a: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    u.dot(&(a * u))
}

pub fn bilinear(a: &DMatrix<f64>, v: &DVector<f64>, u: &DVector<f64>) -> f64 {
    v.dot(&(a * u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_flags_singularity() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 1.0]);
        let x = lu_solve(&a, &DVector::from_vec(vec![2.0, 3.0])).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(lu_solve(&s, &DVector::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn pencil_eigenvalues() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let ev = generalized_eigenvalues(&a, &b).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(generalized_eigenvalues(&a, &bad).is_err());
    }
}
