//! Command-line front end for temporal graph signal decomposition.
//!
//! Subcommands cover the full pipeline: synthetic data generation, fitting,
//! imputation of random holes, interpolation of missing time slices,
//! clustering in the node embedding, period detection, rank estimation, and
//! a sparsity/accuracy sweep. Given the same config and seeds, every
//! subcommand writes byte-identical output files on reruns; wall-clock
//! timings go to stderr only.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use tgsd_core::config::{parse_config, ConfigError, RunConfig};
use tgsd_core::dict::{
    build_fourier, build_gft, build_graph_haar, build_ramanujan, build_ramanujan_dedup,
    build_spline, DictError, GraphDictionaryKind, TimeDictionaryKind,
};
use tgsd_core::graph::{load_graph, Graph, GraphError};
use tgsd_core::io::{self, IoError};
use tgsd_core::solver::{fit, MaskedSignal, SolverError};
use tgsd_core::synth::{gen_graph, gen_signal};
use tgsd_core::tasks::{self, EvalReport, MaskKind, TaskError};
use tgsd_core::{GraphDictionary, TimeDictionary};

#[derive(Parser)]
#[command(name = "tgsd", version, about = "Sparse graph/time dictionary decomposition of node-by-time signals")]
struct Cli {
    /// JSON config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if absent).
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for grids, folds, and mask seeds
    /// (default: TGSD_JOBS or all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Config overrides; unset flags keep the file/default values.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    #[arg(long, global = true)]
    lambda2: Option<f64>,
    #[arg(long, global = true)]
    lambda3: Option<f64>,
    #[arg(long, global = true)]
    rho1: Option<f64>,
    #[arg(long, global = true)]
    rho2: Option<f64>,
    /// Encoding rank.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Graph dictionary: gft or graph_haar.
    #[arg(long, global = true)]
    psi_kind: Option<String>,
    /// Fraction of lowest-frequency GFT atoms kept.
    #[arg(long, global = true)]
    psi_fraction: Option<f64>,
    /// Time dictionary: fourier, ramanujan, or spline.
    #[arg(long, global = true)]
    phi_kind: Option<String>,
    /// Largest modeled period (ramanujan).
    #[arg(long, global = true)]
    g_max: Option<usize>,
    /// Spline basis count.
    #[arg(long, global = true)]
    n_basis: Option<usize>,
    /// Spline degree.
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long, global = true)]
    missing_fraction: Option<f64>,
    /// Cluster count for the cluster subcommand.
    #[arg(long, global = true)]
    clusters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic community graph and periodic signals.
    Synth,
    /// Fit the decomposition and export coefficients and the trace.
    Decompose(DataArgs),
    /// Hide random entries (or use given holes) and fill them from the fit.
    Impute(DataArgs),
    /// Hide whole time columns and fill them from the fit.
    Interpolate(DataArgs),
    /// Cluster nodes by k-means on the embedding.
    Cluster(ClusterArgs),
    /// Score candidate periods from the periodic coefficient matrix.
    Periods(DataArgs),
    /// Pick the encoding rank by element-wise k-fold cross-validation.
    RankEst(DataArgs),
    /// Sweep the sparsity grid and report accuracy-vs-size Pareto points.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON array of solver configs to run instead of the built-in
    /// lambda1 x lambda2 sweep; omitted fields take their defaults.
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Edge-list CSV (u,v[,w] per line).
    #[arg(long)]
    graph: PathBuf,
    /// Signal CSV, one row per node; empty cells or NaN are missing.
    #[arg(long)]
    signal: PathBuf,
    /// Binary 0/1 mask CSV overriding the signal's missing pattern.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ground-truth labels (one integer per line) for accuracy scoring.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DictError> for CliError {
    fn from(e: DictError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            SolverError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Solver(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("TGSD_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = jobs.filter(|&n| n > 0) {
        // Ignore the error when a pool already exists (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = load_config(cli.config.as_deref(), &cli.overrides)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();

    match &cli.command {
        Command::Synth => cmd_synth(&config, out),
        Command::Decompose(args) => cmd_decompose(&config, args, out),
        Command::Impute(args) => cmd_fill(&config, args, out, MaskKind::Random),
        Command::Interpolate(args) => cmd_fill(&config, args, out, MaskKind::Column),
        Command::Cluster(args) => cmd_cluster(&config, args, out),
        Command::Periods(args) => cmd_periods(&config, args, out),
        Command::RankEst(args) => cmd_rank_est(&config, args, out),
        Command::Bench(args) => cmd_bench(&config, args, out),
    }
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    apply_overrides(&mut config, overrides)?;
    config.validate()?;
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, o: &Overrides) -> Result<(), CliError> {
    let s = &mut config.solver;
    if let Some(v) = o.lambda1 {
        s.lambda1 = v;
    }
    if let Some(v) = o.lambda2 {
        s.lambda2 = v;
    }
    if let Some(v) = o.lambda3 {
        s.lambda3 = v;
    }
    if let Some(v) = o.rho1 {
        s.rho1 = v;
    }
    if let Some(v) = o.rho2 {
        s.rho2 = v;
    }
    if let Some(v) = o.k {
        s.k = v;
    }
    if let Some(v) = o.epsilon {
        s.epsilon = v;
    }
    if let Some(v) = o.max_iter {
        s.max_iter = v;
    }
    if let Some(v) = o.seed {
        s.seed = v;
        config.synth.seed = v;
    }
    if let Some(kind) = &o.psi_kind {
        config.psi.kind = match kind.as_str() {
            "gft" => GraphDictionaryKind::Gft,
            "graph_haar" | "haar" => GraphDictionaryKind::GraphHaar,
            other => return Err(CliError::Config(format!("unknown graph dictionary {other:?}"))),
        };
    }
    if let Some(v) = o.psi_fraction {
        config.psi.fraction = v;
    }
    if let Some(kind) = &o.phi_kind {
        config.phi.kind = match kind.as_str() {
            "fourier" | "dft" => TimeDictionaryKind::Fourier,
            "ramanujan" => TimeDictionaryKind::Ramanujan,
            "spline" => TimeDictionaryKind::Spline,
            other => return Err(CliError::Config(format!("unknown time dictionary {other:?}"))),
        };
    }
    if let Some(v) = o.g_max {
        config.phi.g_max = v;
    }
    if let Some(v) = o.n_basis {
        config.phi.n_basis = v;
    }
    if let Some(v) = o.degree {
        config.phi.degree = v;
    }
    if let Some(v) = o.missing_fraction {
        config.task.missing_fraction = v;
    }
    if let Some(v) = o.clusters {
        config.task.clusters = v;
    }
    Ok(())
}

fn build_psi(config: &RunConfig, graph: &Graph) -> Arc<GraphDictionary> {
    Arc::new(match config.psi.kind {
        GraphDictionaryKind::Gft => build_gft(graph, config.psi.fraction),
        GraphDictionaryKind::GraphHaar => build_graph_haar(graph),
    })
}

fn build_phi(config: &RunConfig, t: usize) -> Result<Arc<TimeDictionary>, CliError> {
    let phi = match config.phi.kind {
        TimeDictionaryKind::Fourier => build_fourier(t),
        TimeDictionaryKind::Ramanujan => {
            if config.phi.dedup {
                build_ramanujan_dedup(t, config.phi.g_max)?
            } else {
                build_ramanujan(t, config.phi.g_max)?
            }
        }
        TimeDictionaryKind::Spline => build_spline(t, config.phi.n_basis, config.phi.degree)?,
    };
    Ok(Arc::new(phi))
}

fn load_inputs(
    config: &RunConfig,
    args: &DataArgs,
) -> Result<(Graph, MaskedSignal, Arc<GraphDictionary>, Arc<TimeDictionary>), CliError> {
    let file = fs::File::open(&args.graph)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.graph.display())))?;
    let graph = load_graph(std::io::BufReader::new(file))?;
    let signal = io::read_signal(
        &args.signal,
        args.mask.as_deref(),
        Some(graph.node_count()),
    )?;
    let psi = build_psi(config, &graph);
    let phi = build_phi(config, signal.shape().1)?;
    Ok((graph, signal, psi, phi))
}

fn write_edge_csv(graph: &Graph, path: &Path) -> Result<(), CliError> {
    let mut text = String::from("u,v,w\n");
    for &(u, v, w) in graph.edges() {
        text.push_str(&format!("{u},{v},{w}\n"));
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_synth(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (graph, labels) = gen_graph(&config.synth);
    let x = gen_signal(&graph, &labels, &config.synth);
    write_edge_csv(&graph, &out.join("graph.csv"))?;
    io::write_matrix_csv(&x, &out.join("signal.csv"))?;
    io::write_labels(&labels, &out.join("labels.csv"))?;
    println!(
        "synth: {} nodes, {} edges, t={} -> {}",
        graph.node_count(),
        graph.edges().len(),
        config.synth.t,
        out.display()
    );
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct DecomposeReport {
    rmse_observed: f64,
    nnz_y: usize,
    nnz_w: usize,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
    config: RunConfig,
}

fn cmd_decompose(config: &RunConfig, args: &DataArgs, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, args)?;
    let model = fit(&signal, psi, phi, &config.solver)?;
    let recon = model.reconstruct();
    let report = DecomposeReport {
        rmse_observed: tasks::rmse(&recon, signal.x(), signal.omega())?,
        nnz_y: tasks::nnz(&model.y, config.task.zero_threshold),
        nnz_w: tasks::nnz(&model.w, config.task.zero_threshold),
        iterations: model.iterations,
        converged: model.converged,
        objective_trace: model.objective_trace.clone(),
        config: config.clone(),
    };
    io::write_matrix_csv(&model.y, &out.join("model_y.csv"))?;
    io::write_matrix_csv(&model.w, &out.join("model_w.csv"))?;
    io::write_report(&report, &out.join("report.json"))?;
    println!(
        "decompose: rmse={} nnz={}+{} iterations={} -> {}",
        report.rmse_observed,
        report.nnz_y,
        report.nnz_w,
        report.iterations,
        out.display()
    );
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct FillReport {
    mask: MaskKind,
    missing_fraction: f64,
    mean_heldout_rmse: Option<f64>,
    per_seed: Vec<SeedReport>,
    config: RunConfig,
}

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    report: EvalReport,
}

/// Imputation (random holes) and interpolation (whole columns) share one
/// flow; they differ only in the generated mask shape.
fn cmd_fill(config: &RunConfig, args: &DataArgs, out: &Path, kind: MaskKind) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, args)?;

    if !signal.is_fully_observed() {
        // The input already has holes: fill them directly, no held-out truth.
        let (filled, report, _) = tasks::impute(&signal, psi, phi, &config.solver, None)?;
        io::write_matrix_csv(&filled, &out.join("filled.csv"))?;
        let report = FillReport {
            mask: kind,
            missing_fraction: 1.0 - signal.observed_count() as f64 / filled.len() as f64,
            mean_heldout_rmse: None,
            per_seed: vec![SeedReport { seed: config.solver.seed, report }],
            config: config.clone(),
        };
        io::write_report(&report, &out.join("report.json"))?;
        println!("fill: holes filled in place -> {}", out.display());
        eprintln!("elapsed: {} ms", start.elapsed().as_millis());
        return Ok(());
    }

    // Complete input: hide entries under each seed and score the fill
    // against the data.
    let fraction = config.task.missing_fraction;
    let (n, t) = signal.shape();
    let results: Result<Vec<(u64, nalgebra::DMatrix<f64>, EvalReport)>, TaskError> = config
        .task
        .mask_seeds
        .par_iter()
        .map(|&seed| {
            let mask = tasks::make_mask(kind, n, t, fraction, seed)?;
            let masked = MaskedSignal::new(signal.x().clone(), mask)?;
            let (filled, report, _) =
                tasks::impute(&masked, psi.clone(), phi.clone(), &config.solver, Some(signal.x()))?;
            Ok((seed, filled, report))
        })
        .collect();
    let results = results?;

    let heldout: Vec<f64> = results
        .iter()
        .filter_map(|(_, _, r)| r.rmse_heldout)
        .collect();
    let mean = (!heldout.is_empty()).then(|| heldout.iter().sum::<f64>() / heldout.len() as f64);
    io::write_matrix_csv(&results[0].1, &out.join("filled.csv"))?;
    let report = FillReport {
        mask: kind,
        missing_fraction: fraction,
        mean_heldout_rmse: mean,
        per_seed: results
            .into_iter()
            .map(|(seed, _, report)| SeedReport { seed, report })
            .collect(),
        config: config.clone(),
    };
    io::write_report(&report, &out.join("report.json"))?;
    println!(
        "fill: mean held-out rmse {} over {} seeds -> {}",
        report
            .mean_heldout_rmse
            .map_or("n/a".to_string(), |v| v.to_string()),
        report.per_seed.len(),
        out.display()
    );
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport {
    clusters: usize,
    accuracy: Option<f64>,
    iterations: usize,
    converged: bool,
    config: RunConfig,
}

fn cmd_cluster(config: &RunConfig, args: &ClusterArgs, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, &args.data)?;
    let model = fit(&signal, psi, phi, &config.solver)?;
    let embedding = tasks::node_embedding(&model);
    let labels = tasks::kmeans(
        &embedding,
        config.task.clusters,
        config.solver.seed,
        config.task.kmeans_restarts,
    )?;
    let accuracy = match &args.truth {
        Some(path) => {
            let truth = io::read_labels(path)?;
            Some(tasks::clustering_accuracy(&labels, &truth)?)
        }
        None => None,
    };
    io::write_labels(&labels, &out.join("cluster_labels.csv"))?;
    io::write_matrix_csv(&embedding, &out.join("embedding.csv"))?;
    let report = ClusterReport {
        clusters: config.task.clusters,
        accuracy,
        iterations: model.iterations,
        converged: model.converged,
        config: config.clone(),
    };
    io::write_report(&report, &out.join("report.json"))?;
    println!(
        "cluster: K={} accuracy={} -> {}",
        config.task.clusters,
        accuracy.map_or("n/a".to_string(), |a| a.to_string()),
        out.display()
    );
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct PeriodsReport {
    top_periods: Vec<usize>,
    strengths: std::collections::BTreeMap<usize, f64>,
    exponent: f64,
    config: RunConfig,
}

fn cmd_periods(config: &RunConfig, args: &DataArgs, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, args)?;
    let model = fit(&signal, psi, phi, &config.solver)?;
    let scored = tasks::period_strengths_with_exponent(&model, config.task.period_exponent)?;
    let report = PeriodsReport {
        top_periods: scored
            .top_periods
            .iter()
            .copied()
            .take(config.task.top_periods)
            .collect(),
        strengths: scored.strengths,
        exponent: config.task.period_exponent,
        config: config.clone(),
    };
    io::write_report(&report, &out.join("periods.json"))?;
    println!("periods: top {:?} -> {}", report.top_periods, out.display());
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

fn cmd_rank_est(config: &RunConfig, args: &DataArgs, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, args)?;
    let estimate = tasks::estimate_rank(
        &signal,
        &psi,
        &phi,
        &config.solver,
        &config.task.rank_grid,
        config.task.folds,
        config.solver.seed,
    )?;
    io::write_report(&estimate, &out.join("rank.json"))?;
    println!("rank-est: chose k={} -> {}", estimate.chosen_k, out.display());
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct BenchPoint {
    lambda1: f64,
    lambda2: f64,
    nnz: usize,
    rmse: f64,
    pareto: bool,
}

fn cmd_bench(config: &RunConfig, args: &BenchArgs, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let (_, signal, psi, phi) = load_inputs(config, &args.data)?;
    let grid: Vec<tgsd_core::SolverConfig> = match &args.grid {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let configs: Vec<tgsd_core::SolverConfig> = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for (i, solver) in configs.iter().enumerate() {
                solver
                    .validate()
                    .map_err(|e| CliError::Config(format!("{}[{i}]: {e}", path.display())))?;
            }
            configs
        }
        None => config
            .task
            .bench_lambdas
            .iter()
            .flat_map(|&l1| {
                config.task.bench_lambdas.iter().map(move |&l2| {
                    tgsd_core::SolverConfig {
                        lambda1: l1,
                        lambda2: l2,
                        ..config.solver.clone()
                    }
                })
            })
            .collect(),
    };
    let results: Result<Vec<BenchPoint>, TaskError> = grid
        .par_iter()
        .map(|solver| {
            let model = fit(&signal, psi.clone(), phi.clone(), solver)?;
            let recon = model.reconstruct();
            Ok(BenchPoint {
                lambda1: solver.lambda1,
                lambda2: solver.lambda2,
                nnz: tasks::nnz(&model.y, config.task.zero_threshold)
                    + tasks::nnz(&model.w, config.task.zero_threshold),
                rmse: tasks::rmse(&recon, signal.x(), signal.omega())?,
                pareto: false,
            })
        })
        .collect();
    let mut points = results?;
    for i in 0..points.len() {
        points[i].pareto = !points.iter().enumerate().any(|(j, other)| {
            j != i
                && other.nnz <= points[i].nnz
                && other.rmse <= points[i].rmse
                && (other.nnz < points[i].nnz || other.rmse < points[i].rmse)
        });
    }

    let mut csv = String::from("lambda1,lambda2,nnz,rmse,pareto\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.lambda1, p.lambda2, p.nnz, p.rmse, p.pareto
        ));
    }
    let csv_path = out.join("bench.csv");
    fs::write(&csv_path, csv).map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
    io::write_report(&points, &out.join("bench.json"))?;
    println!(
        "bench: {} grid points, {} Pareto-optimal -> {}",
        points.len(),
        points.iter().filter(|p| p.pareto).count(),
        out.display()
    );
    eprintln!("elapsed: {} ms", start.elapsed().as_millis());
    Ok(())
}
