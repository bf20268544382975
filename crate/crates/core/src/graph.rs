//! Affinity graphs and pairwise constraints.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

const SYMMETRY_TOL: f64 = 1e-12;

/// Feature matrix with one sample per row (`n x feature_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> DataMatrix<T> {
    pub fn from_samples(samples: DenseMatrix<T>) -> Result<Self> {
        samples.ensure_finite("DataMatrix")?;
        if samples.rows() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples, got {}",
                samples.rows()
            )));
        }
        Ok(Self(samples))
    }

    /// Builds from a `feature_dim x n` matrix whose columns are samples.
    pub fn from_columns(columns: &DenseMatrix<T>) -> Result<Self> {
        Self::from_samples(columns.transpose())
    }

    pub fn num_samples(&self) -> usize {
        self.0.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.0.cols()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        self.0.row(i)
    }

    pub fn samples(&self) -> &DenseMatrix<T> {
        &self.0
    }

    /// Rescales every feature to `[0, 1]`; constant features become 0.
    pub fn min_max_scaled(&self) -> Self {
        let (n, d) = self.0.shape();
        let mut out = self.0.clone();
        for j in 0..d {
            let col = self.0.column(j);
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            let span = hi - lo;
            for i in 0..n {
                out[(i, j)] = if span > T::zero() {
                    (self.0[(i, j)] - lo) / span
                } else {
                    T::zero()
                };
            }
        }
        Self(out)
    }
}

/// Symmetric affinity matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        check_square_symmetric(&m, "SimilarityMatrix")?;
        if m.as_slice().iter().any(|&v| v < T::zero() || v > T::one()) {
            return Err(Error::invalid("similarity entries must lie in [0, 1]"));
        }
        Ok(Self(m))
    }

    /// Clamps into `[0, 1]` and symmetrises. Used where rounding can leave
    /// entries marginally out of range.
    pub fn clamped(mut m: DenseMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(
                "SimilarityMatrix::clamped",
                "square",
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        m.ensure_finite("SimilarityMatrix::clamped")?;
        m.symmetrize();
        Ok(Self(m.clamp(T::zero(), T::one())))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix<T> {
        self.0
    }
}

impl<T> Deref for SimilarityMatrix<T> {
    type Target = DenseMatrix<T>;

    fn deref(&self) -> &DenseMatrix<T> {
        &self.0
    }
}

/// Symmetric matrix in `[-1, 1]`; +1 must-link, -1 cannot-link.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> ConstraintMatrix<T> {
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        check_square_symmetric(&m, "ConstraintMatrix")?;
        if m.as_slice().iter().any(|&v| v < -T::one() || v > T::one()) {
            return Err(Error::invalid("constraint entries must lie in [-1, 1]"));
        }
        Ok(Self(m))
    }

    pub fn clamped(mut m: DenseMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(
                "ConstraintMatrix::clamped",
                "square",
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        m.ensure_finite("ConstraintMatrix::clamped")?;
        m.symmetrize();
        Ok(Self(m.clamp(-T::one(), T::one())))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DenseMatrix::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix<T> {
        self.0
    }
}

impl<T> Deref for ConstraintMatrix<T> {
    type Target = DenseMatrix<T>;

    fn deref(&self) -> &DenseMatrix<T> {
        &self.0
    }
}

fn check_square_symmetric<T: Scalar>(m: &DenseMatrix<T>, context: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dims(
            context,
            "square",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    m.ensure_finite(context)?;
    if !m.is_symmetric(T::lit(SYMMETRY_TOL)) {
        return Err(Error::invalid(format!("{context} must be symmetric")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    MustLink,
    CannotLink,
}

impl LinkKind {
    pub fn sign(self) -> i8 {
        match self {
            LinkKind::MustLink => 1,
            LinkKind::CannotLink => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub i: usize,
    pub j: usize,
    pub kind: LinkKind,
}

impl Constraint {
    pub fn must_link(i: usize, j: usize) -> Self {
        Self {
            i,
            j,
            kind: LinkKind::MustLink,
        }
    }

    pub fn cannot_link(i: usize, j: usize) -> Self {
        Self {
            i,
            j,
            kind: LinkKind::CannotLink,
        }
    }

    fn key(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// Validated list of pairwise constraints.
///
/// No self pairs, and no pair carries both kinds. Index bounds are checked
/// against `n` wherever a matrix is built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    items: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(items: Vec<Constraint>) -> Result<Self> {
        let mut seen: HashMap<(usize, usize), LinkKind> = HashMap::new();
        for c in &items {
            if c.i == c.j {
                return Err(Error::invalid(format!("self constraint on sample {}", c.i)));
            }
            match seen.insert(c.key(), c.kind) {
                Some(prev) if prev != c.kind => {
                    return Err(Error::ConflictingConstraint(c.i, c.j));
                }
                _ => {}
            }
        }
        Ok(Self { items })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[Constraint] {
        &self.items
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.items.iter().find(|c| c.i >= n || c.j >= n) {
            Some(c) => Err(Error::invalid(format!(
                "constraint ({}, {}) out of range for {n} samples",
                c.i, c.j
            ))),
            None => Ok(()),
        }
    }

    /// One `i,j,{1|-1}` line per constraint, LF-terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.items {
            let _ = writeln!(out, "{},{},{}", c.i, c.j, c.kind.sign());
        }
        out
    }

    /// Parses the `i,j,{1|-1}` format. Blank lines are skipped; `origin`
    /// labels parse errors.
    pub fn parse(text: &str, origin: &std::path::Path) -> Result<Self> {
        let mut items = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, got {}", fields.len())));
            }
            let i = fields[0]
                .parse::<usize>()
                .map_err(|e| err(format!("bad index {:?}: {e}", fields[0])))?;
            let j = fields[1]
                .parse::<usize>()
                .map_err(|e| err(format!("bad index {:?}: {e}", fields[1])))?;
            let kind = match fields[2] {
                "1" => LinkKind::MustLink,
                "-1" => LinkKind::CannotLink,
                other => return Err(err(format!("constraint kind must be 1 or -1, got {other:?}"))),
            };
            items.push(Constraint { i, j, kind });
        }
        Self::new(items)
    }
}

/// Mutual p-nearest-neighbour Gaussian affinity.
///
/// `S_ij = exp(-||x_i - x_j||^2 / sigma^2)` when `i` and `j` are each among the
/// other's `p` nearest neighbours (self excluded, distance ties broken by the
/// smaller index), else 0. `sigma` is the mean over all samples of the mean
/// distance to their `p` nearest neighbours.
pub fn build_pnn_similarity<T: Scalar>(
    x: &DataMatrix<T>,
    p: usize,
) -> Result<SimilarityMatrix<T>> {
    let n = x.num_samples();
    if p < 1 || p >= n {
        return Err(Error::invalid(format!(
            "neighbour count p must satisfy 1 <= p < n = {n}, got {p}"
        )));
    }
    let d2 = squared_distances(x);
    let neighbours = nearest_neighbours(&d2, p);

    let mut sigma = T::zero();
    for (i, nbrs) in neighbours.iter().enumerate() {
        let mean: T = nbrs.iter().map(|&j| d2[(i, j)].sqrt()).sum::<T>()
            / T::from_usize(p).unwrap();
        sigma += mean;
    }
    sigma /= T::from_usize(n).unwrap();
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::Degenerate(
            "average neighbour distance is zero (coincident samples)".into(),
        ));
    }
    let sigma_sq = sigma * sigma;

    let mut is_nbr = vec![false; n * n];
    for (i, nbrs) in neighbours.iter().enumerate() {
        for &j in nbrs {
            is_nbr[i * n + j] = true;
        }
    }
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && is_nbr[i * n + j] && is_nbr[j * n + i] {
                w[(i, j)] = (-d2[(i, j)] / sigma_sq).exp();
            }
        }
    }
    w = w.add(&w.transpose()).scale(T::lit(0.5));
    SimilarityMatrix::clamped(w)
}

/// Default neighbour count `floor(log2 n)`, at least 1 and below `n`.
pub fn default_neighbours(n: usize) -> usize {
    let p = (usize::BITS - 1 - n.max(1).leading_zeros()) as usize;
    p.max(1).min(n.saturating_sub(1).max(1))
}

fn squared_distances<T: Scalar>(x: &DataMatrix<T>) -> DenseMatrix<T> {
    let n = x.num_samples();
    let mut d2 = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.sample(i);
        for j in (i + 1)..n {
            let v: T = xi
                .iter()
                .zip(x.sample(j))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

fn nearest_neighbours<T: Scalar>(d2: &DenseMatrix<T>, p: usize) -> Vec<Vec<usize>> {
    let n = d2.rows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                d2[(i, a)]
                    .partial_cmp(&d2[(i, b)])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            others.truncate(p);
            others
        })
        .collect()
}

/// Picks `ceil(fraction * n)` samples uniformly without replacement and emits
/// a must-link for every same-label pair and a cannot-link otherwise.
pub fn sample_constraints(labels: &[usize], fraction: f64, seed: u64) -> Result<ConstraintSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "label fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = labels.len();
    // Guard against 0.1 * 150 = 15.000000000000002 rounding up to 16.
    let count = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();

    let mut items = Vec::with_capacity(count * count.saturating_sub(1) / 2);
    for (a, &i) in picked.iter().enumerate() {
        for &j in &picked[a + 1..] {
            items.push(if labels[i] == labels[j] {
                Constraint::must_link(i, j)
            } else {
                Constraint::cannot_link(i, j)
            });
        }
    }
    ConstraintSet::new(items)
}

/// Encodes constraints as a symmetric matrix with zero diagonal.
pub fn constraint_matrix<T: Scalar>(c: &ConstraintSet, n: usize) -> Result<ConstraintMatrix<T>> {
    c.check_bounds(n)?;
    let mut z = DenseMatrix::zeros(n, n);
    for k in c.iter() {
        let v = T::from_i8(k.kind.sign()).unwrap();
        z[(k.i, k.j)] = v;
        z[(k.j, k.i)] = v;
    }
    Ok(ConstraintMatrix(z))
}

/// Raises similarities where the constraint evidence is positive and damps
/// them where it is negative:
/// `1 - (1 - z)(1 - a)` for `z >= 0`, `(1 + z) a` for `z < 0`.
pub fn adjust_similarity<T: Scalar>(
    a: &SimilarityMatrix<T>,
    z: &ConstraintMatrix<T>,
) -> Result<SimilarityMatrix<T>> {
    if a.n() != z.n() {
        return Err(Error::dims("adjust_similarity", a.n(), z.n()));
    }
    let out = a.zip_map(z, adjust_entry);
    SimilarityMatrix::new(out)
}

#[inline]
pub(crate) fn adjust_entry<T: Scalar>(a: T, z: T) -> T {
    let one = T::one();
    if z >= T::zero() {
        one - (one - z) * (one - a)
    } else {
        (one + z) * a
    }
}
