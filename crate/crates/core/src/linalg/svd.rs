//! One-sided (Hestenes) Jacobi SVD.

use crate::error::{Error, Result};
use crate::linalg::dense::{dot, DenseMatrix};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
///
/// For an `r x c` input, `u` is `r x min(r,c)` and `v` is `c x min(r,c)`,
/// both with orthonormal columns. `sigma` is sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> Svd<T> {
    /// `U diag(f(sigma)) V^T`, skipping terms whose mapped value is zero.
    pub fn recompose_with(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let (rows, cols) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(rows, cols);
        for (j, &s) in self.sigma.iter().enumerate() {
            let w = f(s);
            if w == T::zero() {
                continue;
            }
            for i in 0..rows {
                let ui = self.u[(i, j)] * w;
                if ui == T::zero() {
                    continue;
                }
                let row = out.row_mut(i);
                for (k, o) in row.iter_mut().enumerate() {
                    *o += ui * self.v[(k, j)];
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> DenseMatrix<T> {
        self.recompose_with(|s| s)
    }
}

/// Full-precision SVD of any finite matrix.
pub fn svd<T: Scalar>(m: &DenseMatrix<T>) -> Result<Svd<T>> {
    m.ensure_finite("svd")?;
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

fn jacobi_tall<T: Scalar>(m: &DenseMatrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    // Column-major working copies so rotations touch contiguous memory.
    let mut a: Vec<Vec<T>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..cols)
        .map(|j| {
            let mut e = vec![T::zero(); cols];
            e[j] = T::one();
            e
        })
        .collect();

    let eps = T::epsilon();
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols - 1 {
            for q in (p + 1)..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Degenerate("Jacobi SVD did not converge".into()));
    }

    let sigma: Vec<T> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap());

    let scale = sigma.iter().copied().fold(T::zero(), T::max);
    let floor = scale * eps * T::from_usize(rows.max(cols)).unwrap();
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(cols);
    let mut v_cols: Vec<Vec<T>> = Vec::with_capacity(cols);
    let mut sorted_sigma = Vec::with_capacity(cols);
    let mut deficient = Vec::new();
    for &j in &order {
        let s = sigma[j];
        if s > floor && s > T::zero() {
            u_cols.push(a[j].iter().map(|&x| x / s).collect());
        } else {
            deficient.push(u_cols.len());
            u_cols.push(vec![T::zero(); rows]);
        }
        v_cols.push(v[j].clone());
        sorted_sigma.push(s);
    }
    complete_basis(&mut u_cols, &deficient);

    let u = DenseMatrix::from_fn(rows, cols, |i, j| u_cols[j][i]);
    let v = DenseMatrix::from_fn(cols, cols, |i, j| v_cols[j][i]);
    Ok(Svd {
        u,
        sigma: sorted_sigma,
        v,
    })
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others.
fn complete_basis<T: Scalar>(cols: &mut [Vec<T>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let dim = cols[0].len();
    let mut candidate = 0usize;
    for &slot in missing {
        while candidate < dim {
            let mut e = vec![T::zero(); dim];
            e[candidate] = T::one();
            candidate += 1;
            // Two Gram-Schmidt passes for numerical orthogonality.
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let proj = dot(&e, col);
                    for (x, &y) in e.iter_mut().zip(col) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > T::lit(1e-6) {
                cols[slot] = e.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}
