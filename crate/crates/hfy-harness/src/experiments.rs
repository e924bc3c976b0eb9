//! The batch experiments: retrieval capacity and noise robustness,
//! metastable-state censuses, basin grids, and recall episodes.
//!
//! Every experiment expands its parameter grid into independent cells (one
//! per combination × seed), runs them on a rayon pool, and merges per-seed
//! values into median/IQR rows keyed deterministically.

use std::collections::BTreeMap;
use std::sync::Arc;

use hfy_core::energy::{
    basin_grid, iterate, support_census, GridSpec, PatternMemory, PostSpec, SeparationKind,
    SeparationSpec,
};
use hfy_core::recall::{
    free_recall_constrained, free_recall_penalized, levenshtein_coefficient, sequential_recall,
    successor_reference, unique_memory_ratio, RecallConfig, RecallTrace,
};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DatasetKind, ExperimentConfig, ExperimentKind};
use crate::data::{load_flat_f64, load_idx_images};
use crate::error::{HarnessError, Result};
use crate::results::{iqr, median, ResultRow, ResultTable};
use crate::synth::{corrupt, perturb, synth_patterns, CorruptMode, SynthKind};

/// Experiment output: the aggregated table plus named artifacts (trace
/// JSON/CSV, basin CSV) for the CLI to write next to it.
pub struct RunOutput {
    pub table: ResultTable,
    pub artifacts: Vec<(String, String)>,
}

/// Dispatches on the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Capacity | ExperimentKind::Noise => run_retrieval(cfg),
        ExperimentKind::Metastable => run_metastable(cfg),
        ExperimentKind::Basins => run_basins(cfg),
        ExperimentKind::FreeRecall | ExperimentKind::SeqRecall => run_recall(cfg),
    }
}

/// Mixes a base seed with a cell tag so every cell draws independent
/// randomness while staying reproducible.
fn cell_seed(base: u64, tag: &str) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Source of memorized patterns, resolved once per run.
enum DataSource {
    Synthetic(SynthKind),
    File(Arc<PatternMemory>),
}

impl DataSource {
    fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.dataset.kind {
            DatasetKind::SyntheticSphere => Ok(DataSource::Synthetic(SynthKind::Sphere)),
            DatasetKind::SyntheticGaussian => Ok(DataSource::Synthetic(SynthKind::Gaussian)),
            DatasetKind::IdxImages => {
                let path = cfg.dataset.path.as_ref().expect("validated");
                Ok(DataSource::File(Arc::new(load_idx_images(path)?)))
            }
            DatasetKind::FlatF64 => {
                let path = cfg.dataset.path.as_ref().expect("validated");
                Ok(DataSource::File(Arc::new(load_flat_f64(path)?)))
            }
        }
    }

    fn memory(&self, cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<PatternMemory> {
        match self {
            DataSource::Synthetic(kind) => Ok(synth_patterns(
                *kind,
                n,
                cfg.dim,
                cfg.sphere_radius,
                cfg.min_separation,
                seed,
            )?),
            DataSource::File(full) => subsample(full, n, seed),
        }
    }
}

/// Draws n distinct rows of the full dataset, seeded.
fn subsample(full: &PatternMemory, n: usize, seed: u64) -> Result<PatternMemory> {
    if n > full.n() {
        return Err(HarnessError::config(format!(
            "requested {n} patterns but the dataset holds {}",
            full.n()
        )));
    }
    if n == full.n() {
        return Ok(full.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..full.n()).collect();
    for i in 0..n {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(n);
    let d = full.d();
    let mut x = Array2::zeros((n, d));
    for (r, &i) in indices.iter().enumerate() {
        for c in 0..d {
            x[[r, c]] = full.row(i)[c];
        }
    }
    Ok(PatternMemory::new(x)?)
}

/// Accumulates per-seed values under a row template and emits median/IQR
/// rows in deterministic key order.
#[derive(Default)]
struct Aggregator {
    groups: BTreeMap<String, (ResultRow, Vec<f64>)>,
}

impl Aggregator {
    fn push(&mut self, template: ResultRow, value: f64) {
        let key = template.sort_key();
        let entry = self.groups.entry(key).or_insert_with(|| (template, Vec::new()));
        entry.1.push(value);
    }

    fn into_table(self) -> ResultTable {
        let rows = self
            .groups
            .into_values()
            .map(|(mut row, values)| {
                row.median = median(&values);
                row.iqr = iqr(&values);
                row.runs = values.len();
                row
            })
            .collect();
        ResultTable::new(rows)
    }
}

fn base_row(cfg: &ExperimentConfig) -> ResultRow {
    ResultRow {
        experiment: cfg.experiment.to_string(),
        n: None,
        d: Some(cfg.dim),
        beta: None,
        separation: None,
        post: None,
        sigma: None,
        mask: None,
        size: None,
        algorithm: None,
        metric: String::new(),
        median: f64::NAN,
        iqr: f64::NAN,
        runs: 0,
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Retrieval success sweep (capacity and noise experiments): memorize,
/// corrupt stored patterns, converge, and count cosine-similarity successes.
fn run_retrieval(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let source = DataSource::prepare(cfg)?;

    struct Cell {
        n: usize,
        beta: f64,
        sep: SeparationKind,
        post: PostSpec,
        sigma: f64,
        seed: u64,
    }
    let mut cells = Vec::new();
    for &n in &cfg.memory_sizes {
        for &beta in &cfg.betas {
            for &sep in &cfg.separations {
                for post in &cfg.posts {
                    for &sigma in &cfg.noise_sigmas {
                        for &seed in &cfg.seeds {
                            cells.push(Cell { n, beta, sep, post: post.clone(), sigma, seed });
                        }
                    }
                }
            }
        }
    }

    let outcomes: Vec<Result<(ResultRow, f64)>> = cells
        .par_iter()
        .map(|cell| -> Result<(ResultRow, f64)> {
            let spec = SeparationSpec::new(cell.sep, cell.beta)?;
            let mem_seed = cell_seed(cell.seed, &format!("mem/{}", cell.n));
            let mem = source.memory(cfg, cell.n, mem_seed)?;
            let q_count = cfg.queries.min(mem.n());
            let mut rng =
                ChaCha8Rng::seed_from_u64(cell_seed(cell.seed, &format!("queries/{}", cell.n)));
            let mut successes = 0usize;
            for qi in 0..q_count {
                let target = rng.random_range(0..mem.n());
                let mut q0 = mem.row(target).to_vec();
                if cfg.mask_fraction > 0.0 {
                    q0 = corrupt(&q0, CorruptMode::Mask { fraction: cfg.mask_fraction }, 0);
                }
                let noise_seed = cell_seed(cell.seed, &format!("noise/{}/{qi}", cell.n));
                q0 = corrupt(&q0, CorruptMode::Gaussian { sigma: cell.sigma }, noise_seed);
                let trace = iterate(&q0, &mem, &spec, &cell.post, cfg.max_iter, cfg.tol)?;
                if cosine(trace.final_query(), mem.row(target)) > cfg.match_threshold {
                    successes += 1;
                }
            }
            let mut row = base_row(cfg);
            row.n = Some(cell.n);
            row.beta = Some(cell.beta);
            row.separation = Some(spec.to_string());
            row.post = Some(cell.post.to_string());
            row.sigma = Some(cell.sigma);
            row.mask = (cfg.mask_fraction > 0.0).then_some(cfg.mask_fraction);
            row.metric = "success_rate".into();
            Ok((row, successes as f64 / q_count as f64))
        })
        .collect();

    let mut agg = Aggregator::default();
    for outcome in outcomes {
        let (row, value) = outcome?;
        agg.push(row, value);
    }
    Ok(RunOutput { table: agg.into_table(), artifacts: vec![] })
}

/// Metastable census: converge queries, then histogram the support size of
/// the separation at the converged query (buckets 1..=10 and "10+" = 11).
fn run_metastable(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let source = DataSource::prepare(cfg)?;
    let query_file: Option<Arc<PatternMemory>> = match &cfg.dataset.query_path {
        Some(path) => Some(Arc::new(match cfg.dataset.kind {
            DatasetKind::FlatF64 => load_flat_f64(path)?,
            _ => load_idx_images(path)?,
        })),
        None => None,
    };

    struct Cell {
        n: usize,
        beta: f64,
        sep: SeparationKind,
        seed: u64,
    }
    let mut cells = Vec::new();
    for &n in &cfg.memory_sizes {
        for &beta in &cfg.betas {
            for &sep in &cfg.separations {
                for &seed in &cfg.seeds {
                    cells.push(Cell { n, beta, sep, seed });
                }
            }
        }
    }

    let outcomes: Vec<Result<(ResultRow, [f64; 11])>> = cells
        .par_iter()
        .map(|cell| -> Result<(ResultRow, [f64; 11])> {
            let spec = SeparationSpec::new(cell.sep, cell.beta)?;
            let mem_seed = cell_seed(cell.seed, &format!("mem/{}", cell.n));
            let mem = source.memory(cfg, cell.n, mem_seed)?;
            let sigma = cfg.noise_sigmas[0];
            let mut rng =
                ChaCha8Rng::seed_from_u64(cell_seed(cell.seed, &format!("census/{}", cell.n)));
            let q_count = cfg.queries.min(match &query_file {
                Some(qf) => qf.n(),
                None => mem.n(),
            });
            let mut counts = [0usize; 11];
            for qi in 0..q_count {
                let q0 = match &query_file {
                    Some(qf) => qf.row(rng.random_range(0..qf.n())).to_vec(),
                    None => {
                        let target = rng.random_range(0..mem.n());
                        let seed = cell_seed(cell.seed, &format!("perturb/{}/{qi}", cell.n));
                        perturb(mem.row(target), sigma, seed)
                    }
                };
                let trace = iterate(&q0, &mem, &spec, &PostSpec::Identity, cfg.max_iter, cfg.tol)?;
                let theta = mem.scores(trace.final_query())?;
                let support = support_census(&spec, &theta)?;
                let bucket = support.clamp(1, 11);
                counts[bucket - 1] += 1;
            }
            let mut pct = [0.0; 11];
            for (p, &c) in pct.iter_mut().zip(&counts) {
                *p = 100.0 * c as f64 / q_count as f64;
            }
            let mut row = base_row(cfg);
            row.n = Some(cell.n);
            row.beta = Some(cell.beta);
            row.separation = Some(spec.to_string());
            row.metric = "percent".into();
            Ok((row, pct))
        })
        .collect();

    let mut agg = Aggregator::default();
    for outcome in outcomes {
        let (row, pct) = outcome?;
        for (bucket, &p) in pct.iter().enumerate() {
            let mut r = row.clone();
            r.size = Some(bucket + 1);
            agg.push(r, p);
        }
    }
    Ok(RunOutput { table: agg.into_table(), artifacts: vec![] })
}

/// Basin-of-attraction grids for 2-D/3-D memories; each (separation, post,
/// beta, seed) combo emits a per-cell CSV artifact and summary rows.
fn run_basins(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let source = DataSource::prepare(cfg)?;
    let n = cfg.memory_sizes[0];
    let grid = GridSpec {
        x_min: cfg.grid.min,
        x_max: cfg.grid.max,
        y_min: cfg.grid.min,
        y_max: cfg.grid.max,
        nx: cfg.grid.steps,
        ny: cfg.grid.steps,
    };

    let mut agg = Aggregator::default();
    let mut artifacts = Vec::new();
    for &beta in &cfg.betas {
        for &sep in &cfg.separations {
            for post in &cfg.posts {
                let spec = SeparationSpec::new(sep, beta)?;
                let mut metastable = Vec::new();
                let mut converged = Vec::new();
                for (si, &seed) in cfg.seeds.iter().enumerate() {
                    let mem = source.memory(cfg, n, cell_seed(seed, "basins"))?;
                    let basins =
                        basin_grid(&mem, &spec, post, &grid, cfg.label_tol, cfg.max_iter, cfg.tol)?;
                    let cells = basins.cells.len() as f64;
                    metastable.push(
                        basins.cells.iter().filter(|c| c.label.is_none()).count() as f64 / cells,
                    );
                    converged.push(
                        basins.cells.iter().filter(|c| c.converged).count() as f64 / cells,
                    );
                    if si == 0 {
                        let mut buf = Vec::new();
                        basins
                            .write_csv(&mut buf)
                            .map_err(|e| HarnessError::data(e.to_string()))?;
                        artifacts.push((
                            format!("basins_{spec}_{post}_beta{beta}.csv"),
                            String::from_utf8_lossy(&buf).into_owned(),
                        ));
                    }
                }
                for (metric, values) in
                    [("metastable_fraction", metastable), ("converged_fraction", converged)]
                {
                    for &v in &values {
                        let mut row = base_row(cfg);
                        row.n = Some(n);
                        row.beta = Some(beta);
                        row.separation = Some(spec.to_string());
                        row.post = Some(post.to_string());
                        row.metric = metric.into();
                        agg.push(row, v);
                    }
                }
            }
        }
    }
    Ok(RunOutput { table: agg.into_table(), artifacts })
}

/// Maps a configured separation onto the entropic index used by the recall
/// algorithms' inner loop.
fn recall_alpha(kind: SeparationKind) -> Result<f64> {
    match kind {
        SeparationKind::Softmax => Ok(1.0),
        SeparationKind::Entmax { alpha } => Ok(alpha),
        other => Err(HarnessError::config(format!(
            "recall experiments take softmax/entmax separations, got {other:?}"
        ))),
    }
}

/// Free / sequential recall sweeps reporting the unique memory ratio and,
/// for sequential recall, the Levenshtein coefficient against the stored
/// order.
fn run_recall(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let source = DataSource::prepare(cfg)?;
    let sequential = cfg.experiment == ExperimentKind::SeqRecall;
    let r = &cfg.recall;

    struct Cell {
        n: usize,
        beta: f64,
        algorithm: &'static str,
        alpha: f64,
        sep_label: String,
        seed: u64,
        first_seed: bool,
    }
    let mut cells = Vec::new();
    for &n in &cfg.memory_sizes {
        for &beta in &cfg.betas {
            for (si, &seed) in cfg.seeds.iter().enumerate() {
                if sequential {
                    for &sep in &cfg.separations {
                        cells.push(Cell {
                            n,
                            beta,
                            algorithm: "sequential",
                            alpha: recall_alpha(sep)?,
                            sep_label: SeparationSpec::new(sep, beta)?.to_string(),
                            seed,
                            first_seed: si == 0,
                        });
                    }
                } else {
                    cells.push(Cell {
                        n,
                        beta,
                        algorithm: "constrained",
                        alpha: 2.0,
                        sep_label: "csparsemax".into(),
                        seed,
                        first_seed: si == 0,
                    });
                    for &sep in &cfg.separations {
                        cells.push(Cell {
                            n,
                            beta,
                            algorithm: "penalized",
                            alpha: recall_alpha(sep)?,
                            sep_label: SeparationSpec::new(sep, beta)?.to_string(),
                            seed,
                            first_seed: si == 0,
                        });
                    }
                }
            }
        }
    }

    type CellOut = (Vec<(ResultRow, f64)>, Vec<(String, String)>);
    let outcomes: Vec<Result<CellOut>> = cells
        .par_iter()
        .map(|cell| -> Result<CellOut> {
            let mem_seed = cell_seed(cell.seed, &format!("mem/{}", cell.n));
            let mem = source.memory(cfg, cell.n, mem_seed)?;
            let cue_seed = cell_seed(cell.seed, &format!("cue/{}", cell.n));
            let q0 = perturb(mem.row(0), r.cue_sigma, cue_seed);
            let trace: RecallTrace = match cell.algorithm {
                "constrained" => {
                    let rc = RecallConfig::constrained(cell.beta, r.inner_iters)?
                        .with_match_threshold(cfg.match_threshold);
                    free_recall_constrained(&mem, &q0, &rc)?
                }
                "penalized" => {
                    let rc = RecallConfig::penalized(
                        cell.beta,
                        r.inner_iters,
                        r.lambda,
                        r.tau,
                        cell.alpha,
                    )?
                    .with_match_threshold(cfg.match_threshold);
                    free_recall_penalized(&mem, &q0, &rc)?
                }
                _ => {
                    let rc = RecallConfig::sequential(
                        cell.beta,
                        r.inner_iters,
                        r.lambda,
                        r.tau,
                        r.omega,
                        r.transition,
                        cell.alpha,
                    )?
                    .with_match_threshold(cfg.match_threshold)
                    .with_inner_beta(r.inner_beta);
                    sequential_recall(&mem, &q0, &rc)?
                }
            };

            let mut rows = Vec::new();
            let mut row = base_row(cfg);
            row.n = Some(cell.n);
            row.beta = Some(cell.beta);
            row.separation = Some(cell.sep_label.clone());
            row.algorithm = Some(cell.algorithm.into());
            let mut ratio_row = row.clone();
            ratio_row.metric = "unique_ratio".into();
            rows.push((ratio_row, unique_memory_ratio(&trace, &mem, cfg.match_threshold)));
            if cell.algorithm == "sequential" {
                let coeff = levenshtein_coefficient(
                    &trace.recalled_sequence(),
                    &successor_reference(mem.n()),
                )?;
                let mut lev_row = row.clone();
                lev_row.metric = "levenshtein".into();
                rows.push((lev_row, coeff));
            }

            let artifacts = if cell.first_seed {
                let stem = format!(
                    "trace_{}_{}_n{}_beta{}",
                    cell.algorithm, cell.sep_label, cell.n, cell.beta
                );
                let json = serde_json::to_string_pretty(&trace)
                    .map_err(|e| HarnessError::data(e.to_string()))?;
                let mut csv = Vec::new();
                trace
                    .write_csv(&mut csv)
                    .map_err(|e| HarnessError::data(e.to_string()))?;
                vec![
                    (format!("{stem}.json"), json),
                    (format!("{stem}.csv"), String::from_utf8_lossy(&csv).into_owned()),
                ]
            } else {
                Vec::new()
            };
            Ok((rows, artifacts))
        })
        .collect();

    let mut agg = Aggregator::default();
    let mut artifacts = Vec::new();
    for outcome in outcomes {
        let (rows, mut cell_artifacts) = outcome?;
        for (row, value) in rows {
            agg.push(row, value);
        }
        artifacts.append(&mut cell_artifacts);
    }
    artifacts.sort();
    Ok(RunOutput { table: agg.into_table(), artifacts })
}
