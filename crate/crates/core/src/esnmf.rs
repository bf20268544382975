//! Enhanced symmetric NMF: an ensemble of `m` symmetric factorisations of
//! the same similarity matrix, fused into a consensus embedding with learned
//! simplex weights. Plain SNMF lives here too as the baseline.
//!
//! The ensemble minimises
//!
//! ```text
//! sum_i a_i (||S - V_i V_i^T||^2 + ||V_i - V*||^2) + beta ||a||^2
//! ```
//!
//! over `V_i >= 0`, `V* >= 0` and `a` on the simplex, by block-coordinate
//! sweeps: a fourth-root multiplicative step for every `V_i`, the closed-form
//! weighted average for `V*`, and a simplex projection for `a`.

use std::ops::Deref;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityMatrix;
use crate::linalg::{dot, project_capped_simplex, symmetric_eigen, DenseMatrix, SimplexWeights};
use crate::scalar::Scalar;

/// Relative per-sweep objective increase tolerated before it is reported.
pub const MONOTONICITY_TOL: f64 = 1e-8;

/// Non-negative `n x k` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        m.ensure_finite("EmbeddingMatrix")?;
        if m.as_slice().iter().any(|&v| v < T::zero()) {
            return Err(Error::invalid("embedding entries must be non-negative"));
        }
        Ok(Self(m))
    }

    /// Uniform(0.01, 1.01) entries, so no factor starts at an exact zero.
    pub fn random(n: usize, k: usize, rng: &mut impl Rng) -> Self {
        Self(DenseMatrix::from_fn(n, k, |_, _| {
            T::lit(rng.gen_range(0.01..1.01))
        }))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn k(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix<T> {
        self.0
    }

    /// Divides every row by its largest entry; all-zero rows stay zero.
    pub fn row_max_normalized(&self) -> Self {
        let mut out = self.0.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(T::zero(), T::max);
            if max > T::zero() {
                for v in row.iter_mut() {
                    *v /= max;
                }
            }
        }
        Self(out)
    }

    /// Numerical rank of `V V^T`, read off the `k x k` Gram matrix.
    pub fn numerical_rank(&self) -> usize {
        let gram = self.0.transpose().matmul(&self.0);
        let Ok(eig) = symmetric_eigen(&gram) else {
            return 0;
        };
        let top = eig.values.iter().copied().fold(T::zero(), T::max);
        if top <= T::zero() {
            return 0;
        }
        let tol = top * T::lit(1e-10);
        eig.values.iter().filter(|&&v| v > tol).count()
    }
}

impl<T> Deref for EmbeddingMatrix<T> {
    type Target = DenseMatrix<T>;

    fn deref(&self) -> &DenseMatrix<T> {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingEnsemble<T> {
    pub members: Vec<EmbeddingMatrix<T>>,
    pub weights: SimplexWeights<T>,
    pub consensus: EmbeddingMatrix<T>,
}

impl<T: Scalar> EmbeddingEnsemble<T> {
    pub fn new(
        members: Vec<EmbeddingMatrix<T>>,
        weights: SimplexWeights<T>,
        consensus: EmbeddingMatrix<T>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        if weights.len() != members.len() {
            return Err(Error::dims("EmbeddingEnsemble", members.len(), weights.len()));
        }
        let shape = consensus.shape();
        for m in &members {
            m.ensure_shape("EmbeddingEnsemble member", shape)?;
        }
        Ok(Self {
            members,
            weights,
            consensus,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnmfConfig {
    /// Ensemble size `m`.
    pub members: usize,
    pub k: usize,
    pub beta: f64,
    pub max_inner: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for EsnmfConfig {
    fn default() -> Self {
        Self {
            members: 10,
            k: 2,
            beta: 5.0,
            max_inner: 500,
            rel_tol: 1e-5,
            seed: 0,
        }
    }
}

impl EsnmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(Error::invalid("ensemble size m must be >= 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("cluster count k must be >= 1"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EsnmfOutcome<T> {
    /// Final ensemble; `consensus` is row-max normalised.
    pub ensemble: EmbeddingEnsemble<T>,
    /// Objective at initialisation and after every sweep (before normalisation).
    pub objective_history: Vec<T>,
    /// Ensemble weights at initialisation and after every sweep.
    pub weight_history: Vec<SimplexWeights<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// Sweeps whose objective rose by more than [`MONOTONICITY_TOL`] (relative).
    pub monotonicity_violations: usize,
    /// Numerical rank of `V* V*^T` before normalisation.
    pub consensus_rank: usize,
    pub member_ranks: Vec<usize>,
}

/// `||S - V V^T||_F^2`, accumulated entrywise.
pub fn factorization_residual<T: Scalar>(s: &DenseMatrix<T>, v: &DenseMatrix<T>) -> T {
    let n = s.rows();
    let mut acc = T::zero();
    for i in 0..n {
        let vi = v.row(i);
        let srow = s.row(i);
        for j in 0..n {
            let r = srow[j] - dot(vi, v.row(j));
            acc += r * r;
        }
    }
    acc
}

/// Per-member losses `d_i = ||S - V_i V_i^T||^2 + ||V_i - V*||^2`.
pub fn member_losses<T: Scalar>(
    s: &SimilarityMatrix<T>,
    members: &[EmbeddingMatrix<T>],
    vstar: &EmbeddingMatrix<T>,
) -> Result<Vec<T>> {
    members
        .iter()
        .map(|v| {
            check_factor(s, v, "member_losses")?;
            v.ensure_shape("member_losses", vstar.shape())?;
            Ok(factorization_residual(s, v) + v.sub(vstar).frobenius_norm_sq())
        })
        .collect()
}

pub fn esnmf_objective<T: Scalar>(
    s: &SimilarityMatrix<T>,
    ensemble: &EmbeddingEnsemble<T>,
    beta: T,
) -> Result<T> {
    let d = member_losses(s, &ensemble.members, &ensemble.consensus)?;
    Ok(weighted_objective(&d, &ensemble.weights, beta))
}

fn weighted_objective<T: Scalar>(d: &[T], alpha: &SimplexWeights<T>, beta: T) -> T {
    let data: T = alpha.as_slice().iter().zip(d).map(|(&a, &di)| a * di).sum();
    data + beta * alpha.norm_sq()
}

fn check_factor<T: Scalar>(
    s: &SimilarityMatrix<T>,
    v: &DenseMatrix<T>,
    context: &'static str,
) -> Result<()> {
    if v.rows() != s.n() {
        return Err(Error::dims(context, s.n(), v.rows()));
    }
    Ok(())
}

/// Multiplicative member update
/// `V <- V * ((2 S V + V*) / (2 V V^T V + V + eps))^(1/4)`.
pub fn update_vi<T: Scalar>(
    s: &SimilarityMatrix<T>,
    vi: &EmbeddingMatrix<T>,
    vstar: &EmbeddingMatrix<T>,
) -> Result<EmbeddingMatrix<T>> {
    check_factor(s, vi, "update_vi")?;
    vi.ensure_shape("update_vi", vstar.shape())?;
    let two = T::lit(2.0);
    let sv = s.matmul(vi);
    let vtv = vi.transpose().matmul(vi);
    let vvtv = vi.matmul(&vtv);
    let eps = T::guard();
    let mut out = vi.0.clone();
    let data = out.as_mut_slice();
    for (idx, x) in data.iter_mut().enumerate() {
        let num = two * sv.as_slice()[idx] + vstar.as_slice()[idx];
        let den = two * vvtv.as_slice()[idx] + vi.as_slice()[idx] + eps;
        *x = *x * (num / den).sqrt().sqrt();
    }
    Ok(EmbeddingMatrix(out))
}

/// Closed-form consensus `V* = sum_i a_i V_i`.
pub fn update_vstar<T: Scalar>(
    members: &[EmbeddingMatrix<T>],
    alpha: &SimplexWeights<T>,
) -> Result<EmbeddingMatrix<T>> {
    if members.is_empty() || members.len() != alpha.len() {
        return Err(Error::dims("update_vstar", members.len(), alpha.len()));
    }
    let (n, k) = members[0].shape();
    let mut out = DenseMatrix::zeros(n, k);
    for (v, &a) in members.iter().zip(alpha.as_slice()) {
        v.ensure_shape("update_vstar", (n, k))?;
        out.axpy(a, v);
    }
    Ok(EmbeddingMatrix(out))
}

/// Weight update: projection of `-d / (2 beta)` onto the capped simplex.
pub fn update_alpha<T: Scalar>(
    s: &SimilarityMatrix<T>,
    members: &[EmbeddingMatrix<T>],
    vstar: &EmbeddingMatrix<T>,
    beta: T,
) -> Result<SimplexWeights<T>> {
    if !(beta > T::zero()) {
        return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
    }
    let d = member_losses(s, members, vstar)?;
    weights_from_losses(&d, beta)
}

pub(crate) fn weights_from_losses<T: Scalar>(d: &[T], beta: T) -> Result<SimplexWeights<T>> {
    let scale = T::lit(2.0) * beta;
    let target: Vec<T> = d.iter().map(|&di| -di / scale).collect();
    project_capped_simplex(&target)
}

/// Runs the ensemble sweeps until the relative objective change drops below
/// `rel_tol` or `max_inner` sweeps have run.
pub fn esnmf_solve<T: Scalar>(s: &SimilarityMatrix<T>, cfg: &EsnmfConfig) -> Result<EsnmfOutcome<T>> {
    cfg.validate()?;
    let n = s.n();
    let beta = T::lit(cfg.beta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut members: Vec<EmbeddingMatrix<T>> = (0..cfg.members)
        .map(|_| EmbeddingMatrix::random(n, cfg.k, &mut rng))
        .collect();
    let mut vstar = EmbeddingMatrix::random(n, cfg.k, &mut rng);
    let mut alpha = SimplexWeights::uniform(cfg.members)?;

    let d0 = member_losses(s, &members, &vstar)?;
    let mut history = vec![weighted_objective(&d0, &alpha, beta)];
    let mut weight_history = vec![alpha.clone()];
    let mut violations = 0;
    let mut converged = false;
    let mut iterations = 0;
    let tol = T::lit(MONOTONICITY_TOL);
    let rel_tol = T::lit(cfg.rel_tol);
    while iterations < cfg.max_inner {
        iterations += 1;
        for v in members.iter_mut() {
            *v = update_vi(s, v, &vstar)?;
        }
        vstar = update_vstar(&members, &alpha)?;
        let d = member_losses(s, &members, &vstar)?;
        alpha = weights_from_losses(&d, beta)?;

        let obj = weighted_objective(&d, &alpha, beta);
        let prev = *history.last().unwrap();
        if obj - prev > tol * prev.abs().max(T::one()) {
            violations += 1;
            warn!("esnmf objective rose at sweep {iterations}: {prev:e} -> {obj:e}");
        }
        history.push(obj);
        weight_history.push(alpha.clone());
        if (prev - obj).abs() <= rel_tol * prev.abs().max(T::min_positive_value()) {
            converged = true;
            break;
        }
    }

    let consensus_rank = vstar.numerical_rank();
    let member_ranks = members.iter().map(EmbeddingMatrix::numerical_rank).collect();
    let consensus = vstar.row_max_normalized();
    Ok(EsnmfOutcome {
        ensemble: EmbeddingEnsemble::new(members, alpha, consensus)?,
        objective_history: history,
        weight_history,
        iterations,
        converged,
        monotonicity_violations: violations,
        consensus_rank,
        member_ranks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnmfConfig {
    pub k: usize,
    pub max_inner: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for SnmfConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_inner: 500,
            rel_tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnmfOutcome<T> {
    pub embedding: EmbeddingMatrix<T>,
    pub objective_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// One damped multiplicative step for `||S - V V^T||^2`:
/// `V <- V * (1/2 + S V / (2 V V^T V + eps))`.
pub fn snmf_step<T: Scalar>(s: &SimilarityMatrix<T>, v: &EmbeddingMatrix<T>) -> EmbeddingMatrix<T> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let eps = T::guard();
    let sv = s.matmul(v);
    let vvtv = v.matmul(&v.transpose().matmul(v));
    let mut out = v.0.clone();
    for (idx, x) in out.as_mut_slice().iter_mut().enumerate() {
        *x = *x * (half + sv.as_slice()[idx] / (two * vvtv.as_slice()[idx] + eps));
    }
    EmbeddingMatrix(out)
}

/// Plain symmetric NMF baseline.
pub fn snmf_solve<T: Scalar>(s: &SimilarityMatrix<T>, cfg: &SnmfConfig) -> Result<SnmfOutcome<T>> {
    if cfg.k == 0 {
        return Err(Error::invalid("cluster count k must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v = EmbeddingMatrix::random(s.n(), cfg.k, &mut rng);
    let rel_tol = T::lit(cfg.rel_tol);
    let mut history = vec![factorization_residual(s, &v)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_inner {
        iterations += 1;
        v = snmf_step(s, &v);
        let obj = factorization_residual(s, &v);
        let prev = *history.last().unwrap();
        history.push(obj);
        if (prev - obj).abs() <= rel_tol * prev.abs().max(T::min_positive_value()) {
            converged = true;
            break;
        }
    }
    Ok(SnmfOutcome {
        embedding: v,
        objective_history: history,
        iterations,
        converged,
    })
}
