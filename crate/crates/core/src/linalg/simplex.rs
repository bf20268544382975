use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights<T>(Vec<T>);

impl<T: Scalar> SimplexWeights<T> {
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("simplex weights need at least one entry"));
        }
        let w = T::one() / T::from_usize(m).unwrap();
        Ok(Self(vec![w; m]))
    }

    /// Validates an explicit weight vector (sum within `1e-10` of one).
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("simplex weights need at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SimplexWeights::new"));
        }
        if values.iter().any(|&v| v < T::zero() || v > T::one()) {
            return Err(Error::invalid("simplex weights must lie in [0, 1]"));
        }
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) {
            return Err(Error::invalid(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn one_hot(m: usize, at: usize) -> Result<Self> {
        let mut v = vec![T::zero(); m];
        *v.get_mut(at)
            .ok_or_else(|| Error::invalid(format!("one-hot index {at} out of range {m}")))? =
            T::one();
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    pub fn norm_sq(&self) -> T {
        self.0.iter().map(|&a| a * a).sum()
    }
}

/// Euclidean projection onto `{a : sum(a) = 1, 0 <= a_i <= 1}`.
///
/// With unit total the upper cap can never bind, so this is the sort-based
/// simplex projection: `a_i = clamp(y_i - theta, 0, 1)`.
pub fn project_capped_simplex<T: Scalar>(y: &[T]) -> Result<SimplexWeights<T>> {
    if y.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("project_capped_simplex"));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut prefix = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - T::one()) / T::from_usize(j + 1).unwrap();
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    let mut alpha: Vec<T> = y
        .iter()
        .map(|&v| (v - theta).max(T::zero()).min(T::one()))
        .collect();
    // Rounding can leave the sum a few ulps off; fold the remainder into the largest entry.
    let sum: T = alpha.iter().copied().sum();
    if sum > T::zero() && sum != T::one() {
        let (imax, _) = alpha
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        alpha[imax] = (alpha[imax] + (T::one() - sum)).max(T::zero()).min(T::one());
    }
    Ok(SimplexWeights(alpha))
}
