//! The alternating outer loop: adjust the similarity with the constraint
//! matrix, factorise it with the ensemble solver, rebuild `A0 = V* V*^T`,
//! propagate constraints, and feed the refined similarity back in.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::admm::{admm_solve, AdmmConfig, Residuals};
use crate::error::{Error, Result};
use crate::esnmf::{esnmf_solve, EmbeddingMatrix, EsnmfConfig};
use crate::graph::{
    adjust_similarity, build_pnn_similarity, constraint_matrix, default_neighbours, ConstraintSet,
    DataMatrix, SimilarityMatrix,
};
use crate::linalg::DenseMatrix;
use crate::metrics::MetricsReport;
use crate::scalar::Scalar;

/// Row-wise argmax labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Column index of the largest entry per row; ties go to the smallest index.
pub fn assign_clusters<T: Scalar>(v: &DenseMatrix<T>) -> ClusterAssignment {
    let labels = (0..v.rows())
        .map(|i| {
            let row = v.row(i);
            let mut best = 0;
            for (j, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    ClusterAssignment {
        labels,
        k: v.cols(),
    }
}

/// Flat run configuration; also the on-disk config file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsnmfConfig {
    pub k: usize,
    /// Ensemble size.
    pub m: usize,
    pub lambda: f64,
    pub beta: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub rel_tol: f64,
    pub admm_max_iter: usize,
    pub admm_tol: f64,
    /// Neighbour count for the affinity graph; `floor(log2 n)` when absent.
    pub p: Option<usize>,
    pub label_fraction: f64,
    pub seed: u64,
    /// Apply the constraint-driven similarity adjustment before each
    /// factorisation. Turning it off is an ablation.
    pub adjust_similarity: bool,
    /// Per-feature min-max scaling of the input data.
    pub min_max_scale: bool,
}

impl Default for TsnmfConfig {
    fn default() -> Self {
        Self {
            k: 2,
            m: 10,
            lambda: 0.03,
            beta: 5.0,
            max_outer: 3,
            max_inner: 500,
            rel_tol: 1e-5,
            admm_max_iter: 500,
            admm_tol: 1e-6,
            p: None,
            label_fraction: 0.1,
            seed: 0,
            adjust_similarity: true,
            min_max_scale: false,
        }
    }
}

impl TsnmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer must be >= 1"));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::invalid("label_fraction must lie in (0, 1]"));
        }
        self.esnmf_config(0).validate()?;
        self.admm_config().validate()
    }

    /// Ensemble settings for outer iteration `iteration` (zero-based); each
    /// iteration draws a distinct, reproducible initialisation.
    pub fn esnmf_config(&self, iteration: usize) -> EsnmfConfig {
        EsnmfConfig {
            members: self.m,
            k: self.k,
            beta: self.beta,
            max_inner: self.max_inner,
            rel_tol: self.rel_tol,
            seed: derive_seed(self.seed, iteration as u64),
        }
    }

    pub fn admm_config(&self) -> AdmmConfig {
        AdmmConfig {
            lambda: self.lambda,
            max_iter: self.admm_max_iter,
            tol: self.admm_tol,
            ..AdmmConfig::default()
        }
    }

    pub fn neighbours(&self, n: usize) -> usize {
        self.p.unwrap_or_else(|| default_neighbours(n))
    }
}

/// SplitMix64 finaliser over `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub mean: f64,
    pub max: f64,
    pub frobenius: f64,
    /// Fraction of strictly positive entries.
    pub density: f64,
}

impl SimilarityStats {
    pub fn of<T: Scalar>(s: &DenseMatrix<T>) -> Self {
        let nnz = s.as_slice().iter().filter(|&&v| v > T::zero()).count();
        Self {
            mean: s.mean().to_f64_lossy(),
            max: s.max_value().to_f64_lossy(),
            frobenius: s.frobenius_norm().to_f64_lossy(),
            density: nnz as f64 / s.as_slice().len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Statistics of the similarity handed to the ensemble solver.
    pub similarity: SimilarityStats,
    pub esnmf_objective: f64,
    pub esnmf_iterations: usize,
    pub esnmf_converged: bool,
    pub esnmf_monotonicity_violations: usize,
    pub consensus_rank: usize,
    pub weights: Vec<f64>,
    pub admm_iterations: usize,
    pub admm_converged: bool,
    pub residual_history: Vec<Residuals>,
    /// Scores of the embedding produced in this iteration, when ground truth is known.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub iterations: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Accuracy gained between the first and second outer iterations.
pub fn outer_iteration_gain(trace: &RunTrace) -> Result<f64> {
    if trace.len() < 2 {
        return Err(Error::invalid("need at least two outer iterations"));
    }
    let acc = |i: usize| {
        trace.iterations[i]
            .metrics
            .map(|m| m.acc)
            .ok_or_else(|| Error::invalid("trace carries no ground-truth metrics"))
    };
    Ok(acc(1)? - acc(0)?)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    /// Ground-truth labels for per-iteration scoring.
    pub truth: Option<&'a [usize]>,
    /// Keep a copy of every similarity matrix handed to the ensemble solver.
    pub keep_similarity: bool,
}

#[derive(Debug, Clone)]
pub struct TsnmfResult<T> {
    pub consensus: EmbeddingMatrix<T>,
    pub assignment: ClusterAssignment,
    pub trace: RunTrace,
    /// Initial affinity graph.
    pub initial_similarity: SimilarityMatrix<T>,
    /// Present when [`RunOptions::keep_similarity`] was set.
    pub similarity_snapshots: Vec<SimilarityMatrix<T>>,
}

/// Full run from raw features.
pub fn tsnmf_run<T: Scalar>(
    x: &DataMatrix<T>,
    constraints: &ConstraintSet,
    cfg: &TsnmfConfig,
    opts: &RunOptions<'_>,
) -> Result<TsnmfResult<T>> {
    cfg.validate()?;
    let scaled;
    let x = if cfg.min_max_scale {
        scaled = x.min_max_scaled();
        &scaled
    } else {
        x
    };
    let s0 = build_pnn_similarity(x, cfg.neighbours(x.num_samples()))?;
    tsnmf_run_on_similarity(&s0, constraints, cfg, opts)
}

/// Outer loop starting from a precomputed affinity graph.
pub fn tsnmf_run_on_similarity<T: Scalar>(
    s0: &SimilarityMatrix<T>,
    constraints: &ConstraintSet,
    cfg: &TsnmfConfig,
    opts: &RunOptions<'_>,
) -> Result<TsnmfResult<T>> {
    cfg.validate()?;
    let n = s0.n();
    if n < cfg.k {
        return Err(Error::invalid(format!("n = {n} is smaller than k = {}", cfg.k)));
    }
    if let Some(truth) = opts.truth {
        if truth.len() != n {
            return Err(Error::dims("ground truth", n, truth.len()));
        }
    }
    let admm_cfg = cfg.admm_config();
    let mut z = constraint_matrix::<T>(constraints, n)?;
    let mut s = s0.clone();
    let mut trace = RunTrace::default();
    let mut snapshots = Vec::new();
    let mut consensus = None;

    for t in 0..cfg.max_outer {
        let s_in = if cfg.adjust_similarity {
            adjust_similarity(&s, &z)?
        } else {
            s.clone()
        };
        let esnmf = esnmf_solve(&s_in, &cfg.esnmf_config(t))?;
        let vstar = esnmf.ensemble.consensus.clone();
        let a0 = SimilarityMatrix::clamped(vstar.gram_outer())?;
        let admm = admm_solve(&a0, constraints, &admm_cfg)?;
        if !admm.converged {
            debug!("outer iteration {t}: propagation stopped after {} sweeps without converging", admm.iterations);
        }

        let metrics = match opts.truth {
            Some(truth) => Some(MetricsReport::score(assign_clusters(&vstar).labels(), truth)?),
            None => None,
        };
        trace.iterations.push(IterationRecord {
            iteration: t + 1,
            similarity: SimilarityStats::of(&s_in),
            esnmf_objective: esnmf.objective_history.last().unwrap().to_f64_lossy(),
            esnmf_iterations: esnmf.iterations,
            esnmf_converged: esnmf.converged,
            esnmf_monotonicity_violations: esnmf.monotonicity_violations,
            consensus_rank: esnmf.consensus_rank,
            weights: esnmf
                .ensemble
                .weights
                .as_slice()
                .iter()
                .map(|w| w.to_f64_lossy())
                .collect(),
            admm_iterations: admm.iterations,
            admm_converged: admm.converged,
            residual_history: admm.residual_history,
            metrics,
        });
        if opts.keep_similarity {
            snapshots.push(s_in);
        }
        consensus = Some(vstar);
        s = admm.a;
        z = admm.z;
    }

    let consensus = consensus.expect("max_outer >= 1");
    Ok(TsnmfResult {
        assignment: assign_clusters(&consensus),
        consensus,
        trace,
        initial_similarity: s0.clone(),
        similarity_snapshots: snapshots,
    })
}
