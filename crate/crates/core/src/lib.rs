//! Semi-supervised graph clustering by symmetric non-negative matrix
//! factorisation, with pairwise constraints propagated through a low-rank
//! tensor prior.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod admm;
pub mod error;
pub mod esnmf;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod tensor;

pub use admm::{admm_solve, AdmmConfig, AdmmOutcome, AdmmState, Residuals};
pub use error::{Error, Result};
pub use esnmf::{
    esnmf_objective, esnmf_solve, snmf_solve, EmbeddingEnsemble, EmbeddingMatrix, EsnmfConfig,
    EsnmfOutcome, SnmfConfig, SnmfOutcome,
};
pub use experiment::{emit_trace_plots, run_experiment, ExperimentReport, Method};
pub use graph::{
    adjust_similarity, build_pnn_similarity, constraint_matrix, sample_constraints, Constraint,
    ConstraintMatrix, ConstraintSet, DataMatrix, LinkKind, SimilarityMatrix,
};
pub use io::{load_dataset, Dataset};
pub use linalg::{DenseMatrix, SimplexWeights};
pub use metrics::{accuracy, nmi, MetricsReport};
pub use pipeline::{
    assign_clusters, outer_iteration_gain, tsnmf_run, ClusterAssignment, RunTrace, TsnmfConfig,
};
pub use scalar::Scalar;
pub use tensor::{tnn, tsvt, PairTensor};

pub type Matrix = DenseMatrix<f64>;
pub type Matrix32 = DenseMatrix<f32>;
pub type Similarity = SimilarityMatrix<f64>;
pub type Constraints = ConstraintMatrix<f64>;
pub type Data = DataMatrix<f64>;
pub type Embedding = EmbeddingMatrix<f64>;
pub type Tensor = PairTensor<f64>;
