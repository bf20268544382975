use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tsnmf::experiment::{ConstraintSource, ExperimentOptions};
use tsnmf::io::{self, load_dataset, read_config, read_constraints, write_matrix_csv, write_text};
use tsnmf::{build_pnn_similarity, run_experiment, Dataset, Method, MetricsReport, TsnmfConfig};

#[derive(Parser)]
#[command(name = "tsnmf", version, about = "Semi-supervised symmetric NMF clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a dataset over one or more seeds and write a report.
    Run(RunArgs),
    /// Write the p-nearest-neighbour similarity graph as dense CSV.
    Graph(GraphArgs),
    /// Score a saved assignment against ground-truth labels.
    Eval(EvalArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tsnmf,
    Esnmf,
    Snmf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tsnmf => Method::Tsnmf,
            MethodArg::Esnmf => Method::Esnmf,
            MethodArg::Snmf => Method::Snmf,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Data CSV, one sample per row.
    #[arg(long)]
    data: PathBuf,
    /// Labels file, one token per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Fixed constraints file (`i,j,1` or `i,j,-1` per line) used for every seed.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// JSON config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsnmf")]
    method: MethodArg,
    /// Cluster count; defaults to the number of distinct labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Ensemble size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    label_fraction: Option<f64>,
    /// Comma-separated seeds; `a-b` expands to an inclusive range.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Neighbour count for the similarity graph.
    #[arg(long)]
    p: Option<usize>,
    /// Per-feature min-max scaling.
    #[arg(long)]
    min_max: bool,
    /// Skip the constraint adjustment of the similarity.
    #[arg(long)]
    no_adjust: bool,
    /// Also dump every intermediate similarity matrix.
    #[arg(long)]
    dump_similarity: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    min_max: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth labels, one per line.
    #[arg(long)]
    truth: PathBuf,
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().with_context(|| format!("bad seed range {part:?}"))?;
                let b: u64 = b.trim().parse().with_context(|| format!("bad seed range {part:?}"))?;
                if a > b {
                    bail!("empty seed range {part:?}");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn build_config(args: &RunArgs, dataset: &Dataset<f64>) -> anyhow::Result<TsnmfConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => {
            let mut cfg = TsnmfConfig::default();
            cfg.k = 0;
            cfg
        }
    };
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if cfg.k == 0 {
        cfg.k = dataset
            .num_classes()
            .context("--k is required when no labels are given")?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(lambda, beta, m, max_outer, label_fraction);
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if args.min_max {
        cfg.min_max_scale = true;
    }
    if args.no_adjust {
        cfg.adjust_similarity = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let dataset = load_dataset::<f64>(&args.data, args.labels.as_deref())?;
    let cfg = build_config(&args, &dataset)?;
    let seeds = parse_seeds(&args.seeds)?;
    let constraints = match &args.constraints {
        Some(p) => ConstraintSource::Fixed(read_constraints(p)?),
        None => ConstraintSource::Sampled,
    };
    let opts = ExperimentOptions {
        constraints,
        keep_similarity: args.dump_similarity,
    };
    let report = run_experiment(&dataset, &cfg, &seeds, args.method.into(), &opts)?;

    let out = &args.out;
    write_text(&out.join("report.json"), &report.to_json()?)?;
    write_text(&out.join("seeds.csv"), &report.seeds_csv())?;
    tsnmf::emit_trace_plots(&report, out)?;
    for r in &report.seeds {
        io::write_labels(&out.join(format!("assignment_seed{}.txt", r.seed)), &r.assignment)?;
    }
    let timing = json!({ "wall_clock_seconds": report.wall_clock_seconds });
    write_text(&out.join("timing.json"), &format!("{timing}\n"))?;

    let summary = json!({
        "dataset": report.dataset,
        "method": report.method,
        "seeds": seeds.len(),
        "acc": report.acc,
        "nmi": report.nmi,
        "wall_clock_seconds": report.wall_clock_seconds,
        "out": out,
    });
    println!("{summary}");
    Ok(())
}

fn graph(args: GraphArgs) -> anyhow::Result<()> {
    let dataset = load_dataset::<f64>(&args.data, None)?;
    let x = if args.min_max {
        dataset.x.min_max_scaled()
    } else {
        dataset.x
    };
    let p = args
        .p
        .unwrap_or_else(|| tsnmf::graph::default_neighbours(x.num_samples()));
    let s = build_pnn_similarity(&x, p)?;
    write_matrix_csv(&args.out, s.matrix())?;
    println!("{}", json!({ "n": s.n(), "p": p, "out": args.out }));
    Ok(())
}

fn read_labels(path: &Path) -> anyhow::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    Ok(io::parse_labels(&text, path)?)
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    let report = MetricsReport::score(&pred, &truth)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use tsnmf::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::NonFinite(_)) => "non_finite",
        Some(E::DimensionMismatch { .. }) => "dimension_mismatch",
        Some(E::InvalidArgument(_)) => "invalid_argument",
        Some(E::Degenerate(_)) => "degenerate",
        Some(E::ConflictingConstraint(..)) => "conflicting_constraint",
        Some(E::Parse { .. }) => "parse",
        Some(E::Io { .. }) => "io",
        Some(E::Json(_)) => "json",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "invalid_argument",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Graph(a) => graph(a),
        Command::Eval(a) => eval(a),
        Command::Version => {
            println!("tsnmf {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = json!({
                "error": {
                    "kind": error_kind(&err),
                    "message": format!("{err:#}"),
                }
            });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
