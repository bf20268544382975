//! Shared fixtures for the test suites: seeded synthetic benchmarks and
//! reference implementations that do not go through the library's own
//! numeric kernels.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tsnmf::{DataMatrix, DenseMatrix, PairTensor, SimilarityMatrix};

/// Data seed of the three-blob benchmark.
pub const BLOBS_SEED: u64 = 20_240_601;
/// Data seed of the noisy-block benchmark.
pub const BLOCKS_SEED: u64 = 7_777;

/// `k` isotropic unit-variance Gaussian clusters of `per_cluster` points in
/// `dim` dimensions, with centres drawn uniformly from `[-box_half, box_half]^dim`
/// (the usual `make_blobs` recipe). Sample order is shuffled.
pub fn gaussian_blobs(
    per_cluster: usize,
    dim: usize,
    k: usize,
    box_half: f64,
    seed: u64,
) -> (DataMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.gen_range(-box_half..box_half)).collect())
        .collect();
    let n = per_cluster * k;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per_cluster {
            rows.push(centre.iter().map(|m| m + noise.sample(&mut rng)).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    let x = DataMatrix::from_samples(DenseMatrix::from_rows(&rows).unwrap()).unwrap();
    (x, labels)
}

/// The benchmark used by the end-to-end criteria: n = 150, d = 10, k = 3.
pub fn three_blobs() -> (DataMatrix<f64>, Vec<usize>) {
    gaussian_blobs(50, 10, 3, 10.0, BLOBS_SEED)
}

/// Symmetric similarity with planted blocks. Within-block entries are
/// present with probability `p_in` and drawn from U(0.5, 1); across-block
/// entries are present with probability `p_out` and drawn from U(0, 0.5).
pub fn noisy_blocks(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> (SimilarityMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
        .collect();
    let n = labels.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if labels[i] == labels[j] {
                if rng.gen_bool(p_in) {
                    rng.gen_range(0.5..1.0)
                } else {
                    0.0
                }
            } else if rng.gen_bool(p_out) {
                rng.gen_range(0.0..0.5)
            } else {
                0.0
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    (SimilarityMatrix::new(m).unwrap(), labels)
}

/// The block benchmark used by the ablation criteria: three blocks of 30.
pub fn standard_blocks() -> (SimilarityMatrix<f64>, Vec<usize>) {
    noisy_blocks(&[30, 30, 30], 0.25, 0.2, BLOCKS_SEED)
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn random_symmetric(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DenseMatrix<f64> {
    let mut m = random_matrix(n, n, lo, hi, rng);
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values from nalgebra, descending.
pub fn singular_values_oracle(m: &DenseMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn nuclear_norm_oracle(m: &DenseMatrix<f64>) -> f64 {
    singular_values_oracle(m).iter().sum()
}

/// Matrix SVT through nalgebra's SVD.
pub fn svt_oracle(m: &DenseMatrix<f64>, tau: f64) -> DenseMatrix<f64> {
    let svd = to_na(m).svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let shrunk = DMatrix::from_diagonal(&svd.singular_values.map(|s| (s - tau).max(0.0)));
    from_na(&(u * shrunk * vt))
}

/// t-SVT written out slice by slice: form both Fourier slices explicitly,
/// shrink each, and invert the length-2 transform.
pub fn tsvt_oracle(y: &PairTensor<f64>, tau: f64) -> PairTensor<f64> {
    let (a, b) = (y.first(), y.second());
    let n = a.rows();
    let f1 = DenseMatrix::from_fn(n, n, |i, j| a[(i, j)] + b[(i, j)]);
    let f2 = DenseMatrix::from_fn(n, n, |i, j| a[(i, j)] - b[(i, j)]);
    let (g1, g2) = (svt_oracle(&f1, tau), svt_oracle(&f2, tau));
    PairTensor::new(
        DenseMatrix::from_fn(n, n, |i, j| 0.5 * (g1[(i, j)] + g2[(i, j)])),
        DenseMatrix::from_fn(n, n, |i, j| 0.5 * (g1[(i, j)] - g2[(i, j)])),
    )
    .unwrap()
}

/// `(1/2)(||A + B||_* + ||A - B||_*)` via nalgebra.
pub fn tnn_oracle(y: &PairTensor<f64>) -> f64 {
    let (a, b) = (y.first(), y.second());
    0.5 * (nuclear_norm_oracle(&a.add(b)) + nuclear_norm_oracle(&a.sub(b)))
}

/// Mutual p-NN support by brute force: `(i, j)` is an edge iff each is among
/// the other's `p` nearest (self excluded, ties to the smaller index).
pub fn mutual_knn_oracle(x: &DataMatrix<f64>, p: usize) -> Vec<Vec<bool>> {
    let n = x.num_samples();
    let dist = |i: usize, j: usize| -> f64 {
        x.sample(i)
            .iter()
            .zip(x.sample(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist(i, a).partial_cmp(&dist(i, b)).unwrap().then(a.cmp(&b)));
            others.truncate(p);
            others
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i != j && neighbours[i].contains(&j) && neighbours[j].contains(&i))
                .collect()
        })
        .collect()
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Best matched count over every injective map from predicted labels to true
/// labels, enumerated exhaustively.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let k = kp.max(kt);
    let mut perms = Vec::new();
    permutations(&mut (0..k).collect(), 0, &mut perms);
    let best = perms
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap();
    best as f64 / pred.len() as f64
}

/// NMI from entropies: `(H(P) + H(T) - H(P, T)) / sqrt(H(P) H(T))`, with the
/// identical-partition and zero-entropy conventions.
pub fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let entropy = |counts: &HashMap<(usize, usize), usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let mut hp = HashMap::new();
    let mut ht = HashMap::new();
    let mut joint = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *hp.entry((p, 0)).or_insert(0) += 1;
        *ht.entry((t, 0)).or_insert(0) += 1;
        *joint.entry((p, t)).or_insert(0) += 1;
    }
    let (h_p, h_t, h_pt) = (entropy(&hp), entropy(&ht), entropy(&joint));
    if h_p == 0.0 || h_t == 0.0 {
        // Identical partitions have as many joint cells as either marginal.
        let same = joint.len() == hp.len() && joint.len() == ht.len();
        return if same { 1.0 } else { 0.0 };
    }
    ((h_p + h_t - h_pt) / (h_p * h_t).sqrt()).clamp(0.0, 1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}
