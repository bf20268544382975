//! Dense linear-algebra kernels shared by the solvers.

mod dense;
mod eigen;
mod simplex;
mod svd;

pub use dense::DenseMatrix;
pub(crate) use dense::dot;
pub use eigen::{symmetric_eigen, symmetric_eigen_filtered, SymmetricEigen};
pub use simplex::{project_capped_simplex, SimplexWeights};
pub use svd::{svd, Svd};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Singular values in non-increasing order.
///
/// Symmetric inputs go through the eigensolver (`sigma = |lambda|`), which is
/// several times cheaper than Jacobi SVD at the sizes the propagation step uses.
pub fn singular_values<T: Scalar>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let mut sigma = if m.is_symmetric(T::zero()) {
        symmetric_eigen(m)?
            .values
            .into_iter()
            .map(T::abs)
            .collect::<Vec<_>>()
    } else {
        svd(m)?.sigma
    };
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigma)
}

pub fn nuclear_norm<T: Scalar>(m: &DenseMatrix<T>) -> Result<T> {
    Ok(singular_values(m)?.into_iter().sum())
}

/// Singular value thresholding: `U diag(max(sigma - tau, 0)) V^T`, the proximal
/// operator of `tau * ||X||_*`.
pub fn svt<T: Scalar>(m: &DenseMatrix<T>, tau: T) -> Result<DenseMatrix<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::invalid(format!("svt threshold must be >= 0, got {tau}")));
    }
    m.ensure_finite("svt")?;
    if m.is_symmetric(T::zero()) {
        svt_symmetric(m, tau)
    } else {
        let s = svd(m)?;
        Ok(s.recompose_with(|sigma| (sigma - tau).max(T::zero())))
    }
}

/// SVT of a symmetric matrix via its eigendecomposition; the shrinkage acts on
/// `|lambda|` and keeps the sign. Output is exactly symmetric.
pub fn svt_symmetric<T: Scalar>(m: &DenseMatrix<T>, tau: T) -> Result<DenseMatrix<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::invalid(format!("svt threshold must be >= 0, got {tau}")));
    }
    if m.frobenius_norm() <= tau {
        // Every |lambda| is bounded by the Frobenius norm.
        return Ok(DenseMatrix::zeros(m.rows(), m.cols()));
    }
    let eig = symmetric_eigen_filtered(m, |l| l.abs() > tau)?;
    Ok(eig.recompose_with(|l| l.signum() * (l.abs() - tau).max(T::zero())))
}

/// Splits `K` into non-negative parts with `K = K+ - K-`.
pub fn pos_neg_split<T: Scalar>(k: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    (k.map(|v| v.max(T::zero())), k.map(|v| (-v).max(T::zero())))
}
