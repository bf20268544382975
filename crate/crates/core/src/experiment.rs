//! Multi-seed experiment runs and their reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esnmf::{esnmf_solve, snmf_solve, SnmfConfig};
use crate::graph::{build_pnn_similarity, sample_constraints, ConstraintSet};
use crate::io::{format_float, write_matrix_csv, write_text, Dataset};
use crate::linalg::DenseMatrix;
use crate::metrics::MetricsReport;
use crate::pipeline::{
    assign_clusters, derive_seed, tsnmf_run_on_similarity, RunOptions, RunTrace, TsnmfConfig,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsnmf,
    Esnmf,
    Snmf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tsnmf => "tsnmf",
            Method::Esnmf => "esnmf",
            Method::Snmf => "snmf",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsnmf" => Ok(Method::Tsnmf),
            "esnmf" => Ok(Method::Esnmf),
            "snmf" => Ok(Method::Snmf),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Where the pairwise constraints of each seed come from.
#[derive(Debug, Clone, Default)]
pub enum ConstraintSource {
    /// Sample `label_fraction` of the samples from the ground truth, per seed.
    #[default]
    Sampled,
    /// The same fixed set for every seed.
    Fixed(ConstraintSet),
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub constraints: ConstraintSource,
    /// Keep the similarity handed to the factorisation at each outer iteration.
    pub keep_similarity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub num_constraints: usize,
    pub metrics: Option<MetricsReport>,
    pub assignment: Vec<usize>,
    /// Outer-loop records; empty for the single-stage methods.
    pub trace: RunTrace,
    #[serde(skip)]
    pub similarity_snapshots: Vec<DenseMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub method: Method,
    pub num_samples: usize,
    pub config: TsnmfConfig,
    pub seeds: Vec<SeedResult>,
    pub acc: Option<Summary>,
    pub nmi: Option<Summary>,
    /// Excluded from the serialized report so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat `seed,acc,nmi,num_constraints,outer_iterations` rows.
    pub fn seeds_csv(&self) -> String {
        let mut out = String::from("seed,acc,nmi,num_constraints,outer_iterations\n");
        for r in &self.seeds {
            let (acc, nmi) = match r.metrics {
                Some(m) => (format_float(m.acc), format_float(m.nmi)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{acc},{nmi},{},{}\n",
                r.seed,
                r.num_constraints,
                r.trace.len()
            ));
        }
        out
    }
}

/// Runs `method` once per seed and aggregates ACC/NMI.
///
/// `tsnmf` samples constraints from the labels (or uses a fixed set);
/// `esnmf` and `snmf` factorise the unadjusted neighbour graph.
pub fn run_experiment<T: Scalar>(
    dataset: &Dataset<T>,
    cfg: &TsnmfConfig,
    seeds: &[u64],
    method: Method,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    cfg.validate()?;
    let n = dataset.num_samples();
    let needs_labels = method == Method::Tsnmf && matches!(opts.constraints, ConstraintSource::Sampled);
    if needs_labels && dataset.labels.is_none() {
        return Err(Error::invalid(
            "sampling constraints requires a labeled dataset; supply labels or a constraints file",
        ));
    }
    if let ConstraintSource::Fixed(c) = &opts.constraints {
        c.check_bounds(n)?;
    }
    let start = Instant::now();
    let scaled;
    let x = if cfg.min_max_scale {
        scaled = dataset.x.min_max_scaled();
        &scaled
    } else {
        &dataset.x
    };
    let s0 = build_pnn_similarity(x, cfg.neighbours(n))?;
    let truth = dataset.labels.as_deref();

    let mut results = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_cfg = TsnmfConfig { seed, ..cfg.clone() };
        let result = match method {
            Method::Tsnmf => {
                let constraints = match &opts.constraints {
                    ConstraintSource::Sampled => {
                        sample_constraints(truth.expect("checked above"), cfg.label_fraction, seed)?
                    }
                    ConstraintSource::Fixed(c) => c.clone(),
                };
                let run = tsnmf_run_on_similarity(
                    &s0,
                    &constraints,
                    &run_cfg,
                    &RunOptions {
                        truth,
                        keep_similarity: opts.keep_similarity,
                    },
                )?;
                SeedResult {
                    seed,
                    num_constraints: constraints.len(),
                    metrics: None,
                    assignment: run.assignment.labels().to_vec(),
                    trace: run.trace,
                    similarity_snapshots: run
                        .similarity_snapshots
                        .iter()
                        .map(|s| s.matrix().cast())
                        .collect(),
                }
            }
            Method::Esnmf => {
                let out = esnmf_solve(&s0, &run_cfg.esnmf_config(0))?;
                single_stage(seed, assign_clusters(&out.ensemble.consensus).labels().to_vec())
            }
            Method::Snmf => {
                let snmf_cfg = SnmfConfig {
                    k: cfg.k,
                    max_inner: cfg.max_inner,
                    rel_tol: cfg.rel_tol,
                    seed: derive_seed(seed, 0),
                };
                let out = snmf_solve(&s0, &snmf_cfg)?;
                single_stage(seed, assign_clusters(&out.embedding).labels().to_vec())
            }
        };
        results.push(result);
    }
    if let Some(truth) = truth {
        for r in &mut results {
            r.metrics = Some(MetricsReport::score(&r.assignment, truth)?);
        }
    }

    let collect = |f: fn(&MetricsReport) -> f64| -> Vec<f64> {
        results.iter().filter_map(|r| r.metrics.as_ref().map(f)).collect()
    };
    let acc = Summary::of(&collect(|m| m.acc));
    let nmi = Summary::of(&collect(|m| m.nmi));
    Ok(ExperimentReport {
        dataset: dataset.name.clone(),
        method,
        num_samples: n,
        config: cfg.clone(),
        seeds: results,
        acc,
        nmi,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn single_stage(seed: u64, assignment: Vec<usize>) -> SeedResult {
    SeedResult {
        seed,
        num_constraints: 0,
        metrics: None,
        assignment,
        trace: RunTrace::default(),
        similarity_snapshots: Vec::new(),
    }
}

pub const TRACE_HEADER: &str = "seed,iteration,acc,nmi,esnmf_objective,esnmf_iterations,admm_iterations,admm_converged,similarity_mean,similarity_max,similarity_density";

/// Per-iteration trace rows across all seeds.
pub fn trace_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &report.seeds {
        for it in &r.trace.iterations {
            let (acc, nmi) = match it.metrics {
                Some(m) => (format_float(m.acc), format_float(m.nmi)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{acc},{nmi},{},{},{},{},{},{},{}\n",
                r.seed,
                it.iteration,
                format_float(it.esnmf_objective),
                it.esnmf_iterations,
                it.admm_iterations,
                it.admm_converged,
                format_float(it.similarity.mean),
                format_float(it.similarity.max),
                format_float(it.similarity.density),
            ));
        }
    }
    out
}

/// Writes `trace.csv` and one `similarity_seed{s}_iter{t}.csv` per kept
/// snapshot into `dir`. Returns the written paths.
pub fn emit_trace_plots(report: &ExperimentReport, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let trace_path = dir.join("trace.csv");
    write_text(&trace_path, &trace_csv(report))?;
    written.push(trace_path);
    for r in &report.seeds {
        for (t, s) in r.similarity_snapshots.iter().enumerate() {
            let path = dir.join(format!("similarity_seed{}_iter{}.csv", r.seed, t + 1));
            write_matrix_csv(&path, s)?;
            written.push(path);
        }
    }
    Ok(written)
}
