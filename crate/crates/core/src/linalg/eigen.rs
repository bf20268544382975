//! Symmetric eigendecomposition: Householder tridiagonalisation followed by
//! implicit QL with Wilkinson-style shifts (the classic tred2/tql2 pair).

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::scalar::Scalar;

/// `M = Q diag(values) Q^T` with eigenvalues in ascending order.
///
/// `vectors` stores one eigenvector per **row**, matching `values`. A partial
/// decomposition from [`symmetric_eigen_filtered`] holds fewer rows than
/// columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// `sum_j f(lambda_j) q_j q_j^T`, built from the upper triangle and mirrored,
    /// so the output is exactly symmetric. Terms with `f(lambda) == 0` are skipped.
    pub fn recompose_with(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let n = self.vectors.cols();
        let mut out = DenseMatrix::zeros(n, n);
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == T::zero() {
                continue;
            }
            let q = self.vectors.row(j);
            for a in 0..n {
                let qa = q[a] * w;
                if qa == T::zero() {
                    continue;
                }
                let row = out.row_mut(a);
                for b in a..n {
                    row[b] += qa * q[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                out[(a, b)] = out[(b, a)];
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Scalar>(m: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    if !m.is_square() {
        return Err(Error::dims(
            "symmetric_eigen",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    m.ensure_finite("symmetric_eigen")?;
    let n = m.rows();
    let mut v = DenseMatrix::from_fn(n, n, |i, j| if j <= i { m[(i, j)] } else { m[(j, i)] });
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // tql2 rotates pairs of columns; keep eigenvectors as rows instead.
    let mut w = v.transpose();
    ql_implicit(&mut d, &mut e, &mut w)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| w[(order[r], c)]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenpairs of a symmetric matrix restricted to eigenvalues accepted by
/// `keep`.
///
/// All eigenvalues are computed first (tridiagonal QL without vectors); the
/// eigenvectors of the selected ones come from inverse iteration on the
/// tridiagonal form, re-orthogonalised within runs of close selected
/// eigenvalues, then mapped back
/// through the Householder reflectors. When more than half the spectrum is
/// selected the full decomposition is cheaper and is used instead.
pub fn symmetric_eigen_filtered<T: Scalar>(
    m: &DenseMatrix<T>,
    keep: impl Fn(T) -> bool,
) -> Result<SymmetricEigen<T>> {
    if !m.is_square() {
        return Err(Error::dims(
            "symmetric_eigen",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    m.ensure_finite("symmetric_eigen")?;
    let n = m.rows();
    if n <= 2 {
        return Ok(filter_full(symmetric_eigen(m)?, &keep));
    }
    let reduced = householder_tridiagonal(m);
    let mut values = reduced.d.clone();
    let mut sub = vec![T::zero(); n];
    sub[1..].copy_from_slice(&reduced.e);
    ql_implicit(&mut values, &mut sub, &mut DenseMatrix::zeros(n, 0))?;
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let tnorm = reduced.one_norm();
    let ortol = T::lit(1e-3) * tnorm;
    let selected: Vec<bool> = values.iter().map(|&l| keep(l)).collect();
    let count = selected.iter().filter(|&&s| s).count();
    if count == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, n),
        });
    }
    if 2 * count > n {
        return Ok(filter_full(symmetric_eigen(m)?, &keep));
    }

    let pertol = T::lit(10.0) * T::epsilon() * tnorm;
    let mut kept_values = Vec::with_capacity(count);
    let mut vectors = DenseMatrix::zeros(count, n);
    let mut cluster_start = 0;
    let mut prev: Option<(usize, T)> = None;
    let mut row = 0;
    for (i, &lambda) in values.iter().enumerate() {
        if !selected[i] {
            continue;
        }
        let mut shift = lambda;
        match prev {
            Some((pi, pl)) if lambda - values[pi] <= ortol => {
                if shift - pl < pertol {
                    shift = pl + pertol;
                }
            }
            _ => cluster_start = row,
        }
        let y = inverse_iteration(&reduced, shift, tnorm, row as u64, |x| {
            for r in cluster_start..row {
                let q = vectors.row(r);
                let c = super::dot(q, x);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * *qi;
                }
            }
        });
        vectors.row_mut(row).copy_from_slice(&y);
        kept_values.push(lambda);
        prev = Some((i, shift));
        row += 1;
    }
    reduced.apply_q_rows(&mut vectors);
    Ok(SymmetricEigen {
        values: kept_values,
        vectors,
    })
}

fn filter_full<T: Scalar>(full: SymmetricEigen<T>, keep: &impl Fn(T) -> bool) -> SymmetricEigen<T> {
    let n = full.vectors.cols();
    let rows: Vec<usize> = (0..full.values.len()).filter(|&i| keep(full.values[i])).collect();
    SymmetricEigen {
        values: rows.iter().map(|&i| full.values[i]).collect(),
        vectors: DenseMatrix::from_fn(rows.len(), n, |r, c| full.vectors[(rows[r], c)]),
    }
}

/// `Q^T M Q = tridiag(e, d, e)` with `Q = H_0 H_1 ... H_{n-3}`, each
/// `H_k = I - beta_k v_k v_k^T` acting on coordinates `k+1..n`.
struct Tridiagonal<T> {
    d: Vec<T>,
    e: Vec<T>,
    reflectors: Vec<(T, Vec<T>)>,
}

impl<T: Scalar> Tridiagonal<T> {
    fn one_norm(&self) -> T {
        let n = self.d.len();
        let mut best = T::zero();
        for i in 0..n {
            let mut s = self.d[i].abs();
            if i > 0 {
                s += self.e[i - 1].abs();
            }
            if i + 1 < n {
                s += self.e[i].abs();
            }
            best = best.max(s);
        }
        best.max(T::min_positive_value())
    }

    /// Maps each row `y` of `rows` to `Q y`.
    fn apply_q_rows(&self, rows: &mut DenseMatrix<T>) {
        for r in 0..rows.rows() {
            let y = rows.row_mut(r);
            for (k, (beta, v)) in self.reflectors.iter().enumerate().rev() {
                if *beta == T::zero() {
                    continue;
                }
                let tail = &mut y[k + 1..];
                let c = *beta * super::dot(v, tail);
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= c * *vi;
                }
            }
        }
    }
}

fn householder_tridiagonal<T: Scalar>(m: &DenseMatrix<T>) -> Tridiagonal<T> {
    let n = m.rows();
    let zero = T::zero();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let mut a = DenseMatrix::from_fn(n, n, |i, j| if j <= i { m[(i, j)] } else { m[(j, i)] });
    let mut d = vec![zero; n];
    let mut e = vec![zero; n - 1];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        d[k] = a[(k, k)];
        let mut v: Vec<T> = a.row(k)[k + 1..].to_vec();
        let tail_sq: T = v[1..].iter().map(|&x| x * x).sum();
        if tail_sq == zero {
            e[k] = v[0];
            reflectors.push((zero, v));
            continue;
        }
        let norm = (v[0] * v[0] + tail_sq).sqrt();
        let alpha = if v[0] > zero { -norm } else { norm };
        e[k] = alpha;
        v[0] -= alpha;
        let beta = two / (v[0] * v[0] + tail_sq);
        let m_len = n - k - 1;
        // p = beta B v, w = p - (beta/2)(p.v) v, B -= v w^T + w v^T.
        for i in 0..m_len {
            let row = &a.row(k + 1 + i)[k + 1..];
            p[i] = beta * super::dot(row, &v);
        }
        let kappa = half * beta * super::dot(&p[..m_len], &v);
        for i in 0..m_len {
            p[i] -= kappa * v[i];
        }
        for i in 0..m_len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a.row_mut(k + 1 + i)[k + 1..];
            for j in 0..m_len {
                row[j] -= vi * p[j] + wi * v[j];
            }
        }
        reflectors.push((beta, v));
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        e[n - 2] = a[(n - 1, n - 2)];
    }
    d[n - 1] = a[(n - 1, n - 1)];
    Tridiagonal { d, e, reflectors }
}

/// Eigenvector of the tridiagonal matrix for the eigenvalue estimate `shift`.
/// `project` removes components along already computed cluster partners.
fn inverse_iteration<T: Scalar>(
    t: &Tridiagonal<T>,
    shift: T,
    tnorm: T,
    stream: u64,
    project: impl Fn(&mut [T]),
) -> Vec<T> {
    let n = t.d.len();
    let zero = T::zero();
    let tiny = T::epsilon() * tnorm;
    // LU of T - shift I with partial pivoting; U has two superdiagonals.
    let mut u1: Vec<T> = t.d.iter().map(|&x| x - shift).collect();
    let mut u2 = t.e.clone();
    u2.push(zero);
    let mut u3 = vec![zero; n];
    let mut l = vec![zero; n];
    let mut swapped = vec![false; n];
    for k in 0..n - 1 {
        let c = t.e[k];
        if u1[k].abs() >= c.abs() {
            if u1[k] == zero {
                u1[k] = tiny;
            }
            let mult = c / u1[k];
            l[k] = mult;
            u1[k + 1] -= mult * u2[k];
            u2[k + 1] -= mult * u3[k];
        } else {
            let mult = u1[k] / c;
            l[k] = mult;
            swapped[k] = true;
            let (a_next, b_next) = (u1[k + 1], u2[k + 1]);
            let old_u2 = u2[k];
            u1[k] = c;
            u2[k] = a_next;
            u3[k] = b_next;
            u1[k + 1] = old_u2 - mult * a_next;
            u2[k + 1] = -mult * b_next;
        }
    }
    if u1[n - 1] == zero {
        u1[n - 1] = tiny;
    }
    for u in u1.iter_mut() {
        if u.abs() < tiny {
            *u = if *u < zero { -tiny } else { tiny };
        }
    }

    let solve = |x: &mut [T]| {
        for k in 0..n - 1 {
            if swapped[k] {
                x.swap(k, k + 1);
            }
            let xk = x[k];
            x[k + 1] -= l[k] * xk;
        }
        let big = T::lit(1e150);
        for k in (0..n).rev() {
            let mut s = x[k];
            if k + 1 < n {
                s -= u2[k] * x[k + 1];
            }
            if k + 2 < n {
                s -= u3[k] * x[k + 2];
            }
            x[k] = s / u1[k];
            if x[k].abs() > big {
                let inv = T::one() / x[k].abs();
                for xi in x[k..].iter_mut() {
                    *xi *= inv;
                }
            }
        }
    };
    let normalize = |x: &mut [T]| {
        let norm = super::dot(x, x).sqrt();
        if norm > zero {
            for xi in x.iter_mut() {
                *xi /= norm;
            }
        }
    };

    // Deterministic start vector, distinct per eigenpair.
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut x: Vec<T> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            T::lit((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect();
    project(&mut x);
    normalize(&mut x);
    for _ in 0..4 {
        solve(&mut x);
        project(&mut x);
        normalize(&mut x);
    }
    x
}

fn tridiagonalize<T: Scalar>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let vkj = v[(k, j)];
                    v[(k, j)] = vkj - (f * e[k] + g * d[k]);
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder transformations.
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let vkj = v[(k, j)];
                    v[(k, j)] = vkj - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

/// Diagonalises the tridiagonal `(d, e)`; `w` holds eigenvectors as rows.
fn ql_implicit<T: Scalar>(d: &mut [T], e: &mut [T], w: &mut DenseMatrix<T>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let eps = T::epsilon();
    let mut f = zero;
    let mut tst1 = zero;
    let max_iter = 60 * n.max(1);
    let mut total_iter = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                total_iter += 1;
                if total_iter > max_iter {
                    return Err(Error::Degenerate(
                        "symmetric eigensolver did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(w, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[inline]
fn rotate_rows<T: Scalar>(w: &mut DenseMatrix<T>, i: usize, c: T, s: T) {
    let n = w.cols();
    let data = w.as_mut_slice();
    let (head, tail) = data.split_at_mut((i + 1) * n);
    let ri = &mut head[i * n..];
    let ri1 = &mut tail[..n];
    for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}
