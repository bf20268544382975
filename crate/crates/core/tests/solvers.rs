use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsnmf::esnmf::factorization_residual;
use tsnmf::graph::Constraint;
use tsnmf::pipeline::{tsnmf_run, tsnmf_run_on_similarity, RunOptions};
use tsnmf::{
    accuracy, admm_solve, assign_clusters, esnmf_solve, sample_constraints, snmf_solve,
    AdmmConfig, AdmmState, ConstraintSet, DenseMatrix, EsnmfConfig, SimilarityMatrix, SnmfConfig,
    TsnmfConfig,
};
use tsnmf_testkit as kit;

fn block_diagonal(sizes: &[usize]) -> (SimilarityMatrix<f64>, Vec<usize>) {
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
        .collect();
    let n = labels.len();
    let m = DenseMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 });
    (SimilarityMatrix::new(m).unwrap(), labels)
}

#[test]
fn ensemble_separates_exact_blocks() {
    let (s, labels) = block_diagonal(&[3, 3]);
    for seed in 0..5 {
        let cfg = EsnmfConfig { members: 3, k: 2, seed, ..Default::default() };
        let out = esnmf_solve(&s, &cfg).unwrap();
        let pred = assign_clusters(&out.ensemble.consensus);
        assert_eq!(accuracy(pred.labels(), &labels).unwrap(), 1.0, "seed {seed}");
        assert!(out.ensemble.members.iter().all(|v| v.min_value() >= 0.0));
        assert!(out.ensemble.consensus.max_value() <= 1.0);
    }
}

#[test]
fn baseline_separates_exact_blocks() {
    let (s, labels) = block_diagonal(&[3, 3]);
    for seed in 0..5 {
        let out = snmf_solve(&s, &SnmfConfig { k: 2, seed, ..Default::default() }).unwrap();
        assert_eq!(accuracy(assign_clusters(&out.embedding).labels(), &labels).unwrap(), 1.0);
        assert!(out.embedding.min_value() >= 0.0);
    }
}

#[test]
fn single_member_ensemble_agrees_with_baseline_on_blocks() {
    let (s, labels) = block_diagonal(&[4, 3, 5]);
    let cfg = EsnmfConfig { members: 1, k: 3, seed: 2, ..Default::default() };
    let e = esnmf_solve(&s, &cfg).unwrap();
    let b = snmf_solve(&s, &SnmfConfig { k: 3, seed: 2, ..Default::default() }).unwrap();
    let pe = assign_clusters(&e.ensemble.consensus);
    let pb = assign_clusters(&b.embedding);
    assert_eq!(accuracy(pe.labels(), pb.labels()).unwrap(), 1.0);
    assert_eq!(accuracy(pe.labels(), &labels).unwrap(), 1.0);
}

#[test]
fn baseline_reaches_zero_on_identity() {
    let n = 6;
    let s: SimilarityMatrix<f64> = SimilarityMatrix::new(DenseMatrix::identity(n)).unwrap();
    let cfg = SnmfConfig { k: n, max_inner: 5000, rel_tol: 1e-14, seed: 1 };
    let out = snmf_solve(&s, &cfg).unwrap();
    let last = *out.objective_history.last().unwrap();
    assert!(last < 1e-6, "objective {last}");
    assert!((factorization_residual(&s, &out.embedding) - last).abs() < 1e-12);
}

#[test]
fn ensemble_objective_is_monotone_on_random_inputs() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..3 {
        let s = SimilarityMatrix::new(kit::random_symmetric(30, 0.0, 1.0, &mut r)).unwrap();
        let cfg = EsnmfConfig { members: 5, k: 3, beta: 5.0, seed: trial, ..Default::default() };
        let out = esnmf_solve(&s, &cfg).unwrap();
        for w in out.objective_history.windows(2) {
            assert!(w[1] - w[0] <= 1e-8, "trial {trial}: {} -> {}", w[0], w[1]);
        }
        assert_eq!(out.weight_history.len(), out.objective_history.len());
        for a in &out.weight_history {
            assert!((a.sum() - 1.0).abs() < 1e-10);
            assert!(a.as_slice().iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
        assert_eq!(out.monotonicity_violations, 0);
    }
}

fn six_by_six_blocks() -> (SimilarityMatrix<f64>, ConstraintSet) {
    let (a0, _) = block_diagonal(&[3, 3]);
    let c = ConstraintSet::new(vec![Constraint::must_link(0, 1), Constraint::cannot_link(2, 3)]).unwrap();
    (a0, c)
}

#[test]
fn propagation_follows_block_sign_pattern() {
    // Blocks {0,1,2} and {3,4,5}; must-link (0,1), cannot-link (2,3).
    let (a0, c) = six_by_six_blocks();
    let out = admm_solve(&a0, &c, &AdmmConfig::default()).unwrap();
    assert!(out.converged);
    let z = out.z.matrix();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(z[(i, j)] > 0.0, "Z[{i},{j}] = {}", z[(i, j)]);
    }
    assert!((z[(2, 3)] + 1.0).abs() < 1e-6);
    for (i, j) in [(0, 3), (1, 3), (2, 4), (2, 5)] {
        assert!(z[(i, j)] < 0.0, "Z[{i},{j}] = {}", z[(i, j)]);
    }
    for i in 0..3 {
        for j in 3..6 {
            assert!(z[(i, j)] <= 1e-3, "Z[{i},{j}] = {}", z[(i, j)]);
        }
    }
    // No must-link reaches the second block, so it gets no positive evidence.
    for (i, j) in [(3, 4), (3, 5), (4, 5)] {
        assert!(z[(i, j)].abs() <= 1e-3, "Z[{i},{j}] = {}", z[(i, j)]);
    }
    assert!(out.a.min_value() >= 0.0 && out.a.max_value() <= 1.0);
    assert!(z.min_value() >= -1.0 && z.max_value() <= 1.0);
}

#[test]
fn heavy_residual_weight_keeps_a_near_a0() {
    let mut r = ChaCha8Rng::seed_from_u64(22);
    let a0 = SimilarityMatrix::new(kit::random_symmetric(12, 0.0, 1.0, &mut r)).unwrap();
    let cfg = AdmmConfig { lambda: 1e4, ..Default::default() };
    let out = admm_solve(&a0, &ConstraintSet::empty(), &cfg).unwrap();
    assert!(out.a.max_abs_diff(&a0) < 0.01, "{}", out.a.max_abs_diff(&a0));
}

#[test]
fn admm_invariants_hold_at_every_sweep() {
    let mut r = ChaCha8Rng::seed_from_u64(23);
    let n = 20;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let a0 = SimilarityMatrix::new(kit::random_symmetric(n, 0.0, 1.0, &mut r)).unwrap();
    let c = sample_constraints(&labels, 0.3, 4).unwrap();
    let cfg = AdmmConfig::default();
    let mut st = AdmmState::new(&a0, &c, &cfg).unwrap();
    let mut mu = st.mu;
    for _ in 0..200 {
        st.step(cfg.lambda).unwrap();
        assert!(st.a.min_value() >= 0.0);
        assert!(st.mu >= mu && st.mu <= cfg.mu_max);
        mu = st.mu;
        for k in c.iter() {
            let v = f64::from(k.kind.sign());
            assert_eq!(st.d[(k.i, k.j)], v);
            assert_eq!(st.d[(k.j, k.i)], v);
        }
    }
}

#[test]
fn full_supervision_recovers_blobs_exactly() {
    let (x, labels) = kit::three_blobs();
    let c = sample_constraints(&labels, 1.0, 0).unwrap();
    let cfg = TsnmfConfig { k: 3, max_outer: 1, ..Default::default() };
    let out = tsnmf_run(&x, &c, &cfg, &RunOptions::default()).unwrap();
    assert_eq!(accuracy(out.assignment.labels(), &labels).unwrap(), 1.0);
}

#[test]
fn outer_loop_is_deterministic_and_feeds_valid_similarities() {
    let (s, labels) = kit::noisy_blocks(&[12, 12, 12], 0.4, 0.1, 5);
    let c = sample_constraints(&labels, 0.2, 9).unwrap();
    let cfg = TsnmfConfig { k: 3, m: 4, max_outer: 2, seed: 3, ..Default::default() };
    let opts = RunOptions { truth: Some(&labels), keep_similarity: true };
    let a = tsnmf_run_on_similarity(&s, &c, &cfg, &opts).unwrap();
    let b = tsnmf_run_on_similarity(&s, &c, &cfg, &opts).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(a.consensus, b.consensus);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.trace.len(), 2);
    assert_eq!(a.similarity_snapshots.len(), 2);
    for snap in &a.similarity_snapshots {
        assert!(snap.is_symmetric(0.0));
        assert!(snap.min_value() >= 0.0 && snap.max_value() <= 1.0);
    }
    let it = &a.trace.iterations[0];
    assert!(it.metrics.is_some());
    assert_eq!(it.residual_history.len(), it.admm_iterations);
}

#[test]
fn single_precision_pipeline_runs() {
    let (s, labels) = block_diagonal(&[5, 5]);
    let s32: SimilarityMatrix<f32> = SimilarityMatrix::new(s.matrix().cast()).unwrap();
    let c = sample_constraints(&labels, 0.4, 1).unwrap();
    let cfg = TsnmfConfig { k: 2, m: 3, max_outer: 2, ..Default::default() };
    let out = tsnmf_run_on_similarity(&s32, &c, &cfg, &RunOptions::default()).unwrap();
    assert_eq!(accuracy(out.assignment.labels(), &labels).unwrap(), 1.0);
    assert!(out.consensus.min_value() >= 0.0);
}
