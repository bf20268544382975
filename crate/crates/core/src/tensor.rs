//! t-product algebra for `n x n x 2` tensors.
//!
//! With depth two, the DFT along the third mode is a sum/difference of the
//! frontal slices, so everything stays real. The tensor nuclear norm uses the
//! averaged convention `(||F1||_* + ||F2||_*) / 2`, under which per-slice
//! shrinkage by `tau` in the transformed domain is the exact proximal map.

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, svt, DenseMatrix};
use crate::scalar::Scalar;

/// Two stacked `n x n` frontal slices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTensor<T> {
    first: DenseMatrix<T>,
    second: DenseMatrix<T>,
}

impl<T: Scalar> PairTensor<T> {
    pub fn new(first: DenseMatrix<T>, second: DenseMatrix<T>) -> Result<Self> {
        if !first.is_square() {
            return Err(Error::dims(
                "PairTensor::new",
                "square slices",
                format!("{}x{}", first.rows(), first.cols()),
            ));
        }
        second.ensure_shape("PairTensor::new", first.shape())?;
        first.ensure_finite("PairTensor::new")?;
        second.ensure_finite("PairTensor::new")?;
        Ok(Self { first, second })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            first: DenseMatrix::zeros(n, n),
            second: DenseMatrix::zeros(n, n),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.first.rows()
    }

    #[inline]
    pub fn first(&self) -> &DenseMatrix<T> {
        &self.first
    }

    #[inline]
    pub fn second(&self) -> &DenseMatrix<T> {
        &self.second
    }

    pub fn first_mut(&mut self) -> &mut DenseMatrix<T> {
        &mut self.first
    }

    pub fn second_mut(&mut self) -> &mut DenseMatrix<T> {
        &mut self.second
    }

    pub fn into_slices(self) -> (DenseMatrix<T>, DenseMatrix<T>) {
        (self.first, self.second)
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.first.frobenius_norm_sq() + self.second.frobenius_norm_sq()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.first
            .max_abs_diff(&other.first)
            .max(self.second.max_abs_diff(&other.second))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            first: self.first.sub(&other.first),
            second: self.second.sub(&other.second),
        }
    }
}

/// Length-2 DFT along the third mode: `(A + B, A - B)`.
pub fn mode3_transform<T: Scalar>(t: &PairTensor<T>) -> PairTensor<T> {
    PairTensor {
        first: t.first.add(&t.second),
        second: t.first.sub(&t.second),
    }
}

/// Inverse of [`mode3_transform`]: `((F + G)/2, (F - G)/2)`.
pub fn mode3_inverse<T: Scalar>(t: &PairTensor<T>) -> PairTensor<T> {
    let half = T::lit(0.5);
    PairTensor {
        first: t.first.zip_map(&t.second, |f, g| (f + g) * half),
        second: t.first.zip_map(&t.second, |f, g| (f - g) * half),
    }
}

/// Tensor nuclear norm.
pub fn tnn<T: Scalar>(t: &PairTensor<T>) -> Result<T> {
    let f = mode3_transform(t);
    Ok((nuclear_norm(&f.first)? + nuclear_norm(&f.second)?) * T::lit(0.5))
}

/// Tensor singular value thresholding: the minimiser of
/// `tau * tnn(X) + 0.5 * ||X - Y||_F^2`.
pub fn tsvt<T: Scalar>(y: &PairTensor<T>, tau: T) -> Result<PairTensor<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::invalid(format!("t-SVT threshold must be >= 0, got {tau}")));
    }
    let f = mode3_transform(y);
    let shrunk = PairTensor {
        first: svt(&f.first, tau)?,
        second: svt(&f.second, tau)?,
    };
    Ok(mode3_inverse(&shrunk))
}
