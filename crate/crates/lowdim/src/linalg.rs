//! Dense linear algebra at desk scale: direct factorizations and the
//! generalized symmetric eigensolve for the stiffness/mass pencil.

use crate::error::{Error, Result};
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::prelude::Solve;
use faer::{Mat, Par};
use nalgebra::DVector;

pub fn to_faer(v: &DVector<f64>) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn from_faer(m: &Mat<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| m[(i, 0)])
}

/// Direct dense solve A x = b with partial-pivot LU (A may be indefinite).
pub fn solve_dense(a: Mat<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.partial_piv_lu();
    let x = lu.solve(to_faer(b));
    let x = from_faer(&x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve("singular system (non-finite solution)".into()));
    }
    Ok(x)
}

/// Cholesky factorization of a symmetric positive definite matrix; reusable
/// for repeated solves.
pub struct CholeskyFactor {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl CholeskyFactor {
    pub fn new(a: Mat<f64>) -> Result<Self> {
        let llt = a
            .llt(faer::Side::Lower)
            .map_err(|_| Error::Solve("Cholesky failed: matrix not positive definite".into()))?;
        Ok(CholeskyFactor { llt })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        from_faer(&self.llt.solve(to_faer(b)))
    }
}

/// Eigenpairs of the symmetric pencil K v = lambda M v with M symmetric
/// positive definite; eigenvalues ascending, eigenvectors M-orthonormal.
pub struct GeneralizedEigen {
    pub lambdas: Vec<f64>,
    /// Column j is the eigenvector of lambdas[j].
    pub vectors: Mat<f64>,
}

pub fn generalized_symmetric_eigen(k: &Mat<f64>, m: &Mat<f64>) -> Result<GeneralizedEigen> {
    let n = k.nrows();
    if n == 0 {
        return Err(Error::Eigen("empty pencil".into()));
    }
    let llt = m
        .llt(faer::Side::Lower)
        .map_err(|_| Error::Eigen("mass matrix not positive definite".into()))?;
    let l = llt.L().to_owned();

    // A = L^-1 K L^-T, symmetric.
    let mut a = k.to_owned();
    solve_lower_triangular_in_place(l.as_ref(), a.as_mut(), Par::Seq);
    let mut at = a.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), at.as_mut(), Par::Seq);
    // Symmetrize against roundoff.
    let a = Mat::from_fn(n, n, |i, j| 0.5 * (at[(i, j)] + at[(j, i)]));

    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("eigensolve did not converge: {e:?}")))?;

    // Back-transform: v = L^-T w.
    let mut vectors = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), Par::Seq);

    let s = evd.S();
    let lambdas: Vec<f64> = (0..n).map(|i| s[i]).collect();
    Ok(GeneralizedEigen { lambdas, vectors })
}

impl GeneralizedEigen {
    pub fn vector(&self, j: usize) -> DVector<f64> {
        DVector::from_fn(self.vectors.nrows(), |i, _| self.vectors[(i, j)])
    }
}
