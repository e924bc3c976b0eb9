//! `hfy` — batch experiments for Hopfield-Fenchel-Young memories.
//!
//! One subcommand per experiment; every config field can be overridden on
//! the command line. Results print as CSV on stdout or, with `--output`,
//! land in the given directory as `results.csv` plus any trace/basin
//! artifacts. Exit codes: 0 success, 2 configuration error, 3 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hfy_harness::config::{
    parse_post, parse_separation, DatasetKind, ExperimentConfig, ExperimentKind,
};
use hfy_harness::error::HarnessError;
use hfy_harness::experiments;

#[derive(Parser)]
#[command(name = "hfy", version, about = "Hopfield-Fenchel-Young memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieval success over growing memory sizes.
    Capacity(RunArgs),
    /// Retrieval success over noise levels.
    Noise(RunArgs),
    /// Metastable-state census: support-size histogram at convergence.
    Metastable(RunArgs),
    /// Basin-of-attraction grids for 2-D/3-D memories.
    Basins(RunArgs),
    /// Free recall episodes (constrained and penalized algorithms).
    FreeRecall(RunArgs),
    /// Sequential recall episodes (SparseMAP over sequential 2-subsets).
    SeqRecall(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for results.csv and experiment artifacts (stdout if unset).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Base seed: replaces the seed list with base, base+1, ...
    #[arg(long)]
    seed: Option<u64>,

    /// Memory sizes N (repeatable).
    #[arg(long = "n")]
    memory_sizes: Vec<usize>,

    /// Pattern dimension D for synthetic datasets.
    #[arg(long)]
    dim: Option<usize>,

    /// Inverse temperatures (repeatable).
    #[arg(long = "beta")]
    betas: Vec<f64>,

    /// Separations, e.g. softmax, sparsemax, entmax:1.5, normmax:5,
    /// identity, spow:3, exp, ksubsets:4, seq-ksubsets:2:1e5 (repeatable).
    #[arg(long = "sep")]
    separations: Vec<String>,

    /// Post-transformations: identity, l2norm:R, layernorm:ETA[:EPS],
    /// tanh:BETA, sign (repeatable).
    #[arg(long = "post")]
    posts: Vec<String>,

    /// Gaussian corruption levels (repeatable).
    #[arg(long = "sigma")]
    sigmas: Vec<f64>,

    /// Fraction of trailing coordinates zeroed before querying.
    #[arg(long)]
    mask_fraction: Option<f64>,

    /// Queries per sweep cell.
    #[arg(long)]
    queries: Option<usize>,

    /// Dataset kind: synthetic-sphere, synthetic-gaussian, idx-images, flat-f64.
    #[arg(long)]
    dataset: Option<String>,

    /// Pattern file for file-backed datasets.
    #[arg(long)]
    data_path: Option<PathBuf>,

    /// Separate query file (metastable census).
    #[arg(long)]
    query_path: Option<PathBuf>,

    /// Norm of synthetic sphere patterns.
    #[arg(long)]
    radius: Option<f64>,

    /// Resample synthetic patterns until all separations reach this bound.
    #[arg(long)]
    min_separation: Option<f64>,

    /// Iteration cap for convergence.
    #[arg(long)]
    max_iter: Option<usize>,

    /// Convergence tolerance on the query update.
    #[arg(long)]
    tol: Option<f64>,

    /// Cosine similarity counted as successful retrieval.
    #[arg(long)]
    match_threshold: Option<f64>,

    /// Distance tolerance for basin labels.
    #[arg(long)]
    label_tol: Option<f64>,

    /// Inner Hopfield iterations per recall step.
    #[arg(long)]
    inner_iters: Option<usize>,

    /// Penalty weight on the attention moving average.
    #[arg(long)]
    lambda: Option<f64>,

    /// Decay rate of the moving average.
    #[arg(long)]
    tau: Option<f64>,

    /// Successor boost coefficient (sequential recall).
    #[arg(long)]
    omega: Option<f64>,

    /// Transition score of the sequential structure.
    #[arg(long)]
    transition: Option<f64>,

    /// Entropic index of the recall inner loop.
    #[arg(long)]
    alpha: Option<f64>,

    /// Also apply beta inside the sequential inner loop.
    #[arg(long)]
    inner_beta: bool,

    /// Cue perturbation level for recall episodes.
    #[arg(long)]
    cue_sigma: Option<f64>,

    #[arg(long)]
    grid_min: Option<f64>,

    #[arg(long)]
    grid_max: Option<f64>,

    #[arg(long)]
    grid_steps: Option<usize>,
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(seed) = args.seed {
        let count = cfg.seeds.len().max(1) as u64;
        cfg.seeds = (seed..seed + count).collect();
    }
    if !args.memory_sizes.is_empty() {
        cfg.memory_sizes = args.memory_sizes.clone();
    }
    if let Some(d) = args.dim {
        cfg.dim = d;
    }
    if !args.betas.is_empty() {
        cfg.betas = args.betas.clone();
    }
    if !args.separations.is_empty() {
        cfg.separations = args
            .separations
            .iter()
            .map(|s| parse_separation(s))
            .collect::<Result<_, _>>()?;
    }
    if !args.posts.is_empty() {
        cfg.posts = args.posts.iter().map(|s| parse_post(s)).collect::<Result<_, _>>()?;
    }
    if !args.sigmas.is_empty() {
        cfg.noise_sigmas = args.sigmas.clone();
    }
    if let Some(m) = args.mask_fraction {
        cfg.mask_fraction = m;
    }
    if let Some(q) = args.queries {
        cfg.queries = q;
    }
    if let Some(kind) = &args.dataset {
        cfg.dataset.kind = match kind.as_str() {
            "synthetic-sphere" => DatasetKind::SyntheticSphere,
            "synthetic-gaussian" => DatasetKind::SyntheticGaussian,
            "idx-images" => DatasetKind::IdxImages,
            "flat-f64" => DatasetKind::FlatF64,
            other => {
                return Err(HarnessError::config(format!("unknown dataset kind '{other}'")))
            }
        };
    }
    if let Some(p) = &args.data_path {
        cfg.dataset.path = Some(p.clone());
    }
    if let Some(p) = &args.query_path {
        cfg.dataset.query_path = Some(p.clone());
    }
    if let Some(r) = args.radius {
        cfg.sphere_radius = r;
    }
    if args.min_separation.is_some() {
        cfg.min_separation = args.min_separation;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(t) = args.match_threshold {
        cfg.match_threshold = t;
    }
    if let Some(t) = args.label_tol {
        cfg.label_tol = t;
    }
    if let Some(v) = args.inner_iters {
        cfg.recall.inner_iters = v;
    }
    if let Some(v) = args.lambda {
        cfg.recall.lambda = v;
    }
    if let Some(v) = args.tau {
        cfg.recall.tau = v;
    }
    if let Some(v) = args.omega {
        cfg.recall.omega = v;
    }
    if let Some(v) = args.transition {
        cfg.recall.transition = v;
    }
    if let Some(v) = args.alpha {
        cfg.recall.alpha = v;
    }
    if args.inner_beta {
        cfg.recall.inner_beta = true;
    }
    if let Some(v) = args.cue_sigma {
        cfg.recall.cue_sigma = v;
    }
    if let Some(v) = args.grid_min {
        cfg.grid.min = v;
    }
    if let Some(v) = args.grid_max {
        cfg.grid.max = v;
    }
    if let Some(v) = args.grid_steps {
        cfg.grid.steps = v;
    }
    if args.output.is_some() {
        cfg.output = args.output.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), HarnessError> {
    let cfg = build_config(kind, args)?;
    let out = experiments::run(&cfg)?;
    match &cfg.output {
        None => {
            let mut stdout = std::io::stdout().lock();
            out.table.write_csv(&mut stdout)?;
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| {
                HarnessError::data(format!("cannot create {}: {e}", dir.display()))
            })?;
            out.table.save_csv(&dir.join("results.csv"))?;
            for (name, body) in &out.artifacts {
                std::fs::write(dir.join(name), body).map_err(|e| {
                    HarnessError::data(format!("cannot write artifact {name}: {e}"))
                })?;
            }
            eprintln!(
                "wrote {} rows and {} artifacts to {}",
                out.table.rows.len(),
                out.artifacts.len(),
                dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Capacity(a) => (ExperimentKind::Capacity, a),
        Command::Noise(a) => (ExperimentKind::Noise, a),
        Command::Metastable(a) => (ExperimentKind::Metastable, a),
        Command::Basins(a) => (ExperimentKind::Basins, a),
        Command::FreeRecall(a) => (ExperimentKind::FreeRecall, a),
        Command::SeqRecall(a) => (ExperimentKind::SeqRecall, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
