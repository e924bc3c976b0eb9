//! Experiment configuration: one JSON document covering every experiment,
//! with CLI flags overriding individual fields.

use std::path::PathBuf;

use hfy_core::energy::{PostSpec, SeparationKind, StructureKind};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Capacity,
    Noise,
    Metastable,
    Basins,
    FreeRecall,
    SeqRecall,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::Noise => "noise",
            ExperimentKind::Metastable => "metastable",
            ExperimentKind::Basins => "basins",
            ExperimentKind::FreeRecall => "free-recall",
            ExperimentKind::SeqRecall => "seq-recall",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    SyntheticSphere,
    SyntheticGaussian,
    IdxImages,
    FlatF64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Memorized patterns (IDX or flat-binary file) for file-backed kinds.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Optional separate query file; otherwise queries are corrupted copies
    /// of stored patterns.
    #[serde(default)]
    pub query_path: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { kind: DatasetKind::SyntheticSphere, path: None, query_path: None }
    }
}

/// Parameters of the recall algorithms (free and sequential).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecallParams {
    /// Inner Hopfield iterations per outer step.
    pub inner_iters: usize,
    pub lambda: f64,
    pub tau: f64,
    pub omega: f64,
    pub transition: f64,
    pub alpha: f64,
    /// Also apply β inside the sequential inner loop (off: as printed).
    pub inner_beta: bool,
    /// Standard deviation of the cue perturbation.
    pub cue_sigma: f64,
}

impl Default for RecallParams {
    fn default() -> Self {
        RecallParams {
            inner_iters: 20,
            lambda: 1e8,
            tau: 0.001,
            omega: 1.1,
            transition: 1e5,
            alpha: 2.0,
            inner_beta: false,
            cue_sigma: 0.05,
        }
    }
}

/// Query grid for the basins experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { min: -1.5, max: 1.5, steps: 61 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetConfig,
    /// Memory sizes N to sweep.
    pub memory_sizes: Vec<usize>,
    /// Pattern dimension D (synthetic kinds).
    pub dim: usize,
    pub betas: Vec<f64>,
    pub separations: Vec<SeparationKind>,
    pub posts: Vec<PostSpec>,
    pub noise_sigmas: Vec<f64>,
    /// Fraction of trailing coordinates zeroed by mask corruption
    /// (0 disables masking; the suffix of a row-major image is its bottom
    /// rows).
    pub mask_fraction: f64,
    pub seeds: Vec<u64>,
    /// Queries per sweep cell (capped at N).
    pub queries: usize,
    /// Norm of synthetic sphere patterns.
    pub sphere_radius: f64,
    /// Resample synthetic patterns until every separation Δᵢ meets this.
    pub min_separation: Option<f64>,
    /// Convergence iteration cap for retrieval experiments.
    pub max_iter: usize,
    pub tol: f64,
    /// Cosine similarity for retrieval success and recall matching.
    pub match_threshold: f64,
    pub recall: RecallParams,
    pub grid: GridConfig,
    /// Distance tolerance for basin labeling.
    pub label_tol: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Capacity,
            dataset: DatasetConfig::default(),
            memory_sizes: vec![64],
            dim: 64,
            betas: vec![1.0],
            separations: vec![SeparationKind::Entmax { alpha: 2.0 }],
            posts: vec![PostSpec::Identity],
            noise_sigmas: vec![0.1],
            mask_fraction: 0.0,
            seeds: vec![0, 1, 2, 3, 4],
            queries: 100,
            sphere_radius: 1.0,
            min_separation: None,
            max_iter: 20,
            tol: 1e-8,
            match_threshold: 0.9,
            recall: RecallParams::default(),
            grid: GridConfig::default(),
            label_tol: 0.01,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| HarnessError::config(format!("invalid config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_sizes.is_empty() {
            return Err(HarnessError::config("memory_sizes must be non-empty"));
        }
        if self.betas.is_empty() || self.betas.iter().any(|&b| b <= 0.0 || !b.is_finite()) {
            return Err(HarnessError::config("betas must be non-empty and positive"));
        }
        if self.separations.is_empty() {
            return Err(HarnessError::config("separations must be non-empty"));
        }
        if self.posts.is_empty() {
            return Err(HarnessError::config("posts must be non-empty"));
        }
        if self.noise_sigmas.is_empty() || self.noise_sigmas.iter().any(|&s| s < 0.0) {
            return Err(HarnessError::config("noise_sigmas must be non-empty and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(HarnessError::config("mask_fraction must lie in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds must be non-empty"));
        }
        if self.dim == 0 || self.queries == 0 || self.max_iter == 0 {
            return Err(HarnessError::config("dim, queries, and max_iter must be positive"));
        }
        if matches!(self.dataset.kind, DatasetKind::IdxImages | DatasetKind::FlatF64)
            && self.dataset.path.is_none()
        {
            return Err(HarnessError::config("file-backed datasets require dataset.path"));
        }
        // Separation parameter sanity, via the core constructors.
        for &kind in &self.separations {
            for &beta in &self.betas {
                hfy_core::energy::SeparationSpec::new(kind, beta)?;
            }
        }
        if self.experiment == ExperimentKind::Basins && self.dim > 3 {
            return Err(HarnessError::config("basins require dim in {2, 3}"));
        }
        Ok(())
    }
}

/// Parses a separation given as a compact CLI string, e.g. `softmax`,
/// `sparsemax`, `entmax:1.5`, `normmax:5`, `identity`, `spow:3`, `exp`,
/// `ksubsets:4`, `seq-ksubsets:2:1e5`.
pub fn parse_separation(text: &str) -> Result<SeparationKind> {
    let mut parts = text.split(':');
    let head = parts.next().unwrap_or_default();
    let arg = |p: Option<&str>, what: &str| -> Result<f64> {
        p.ok_or_else(|| HarnessError::config(format!("{head} needs {what}")))?
            .parse::<f64>()
            .map_err(|e| HarnessError::config(format!("bad {what} in '{text}': {e}")))
    };
    let kind = match head {
        "identity" => SeparationKind::Identity,
        "spow" => SeparationKind::SignedPower { r: arg(parts.next(), "an exponent")? },
        "exp" => SeparationKind::Exp,
        "softmax" => SeparationKind::Softmax,
        "sparsemax" => SeparationKind::Entmax { alpha: 2.0 },
        "entmax" => SeparationKind::Entmax { alpha: arg(parts.next(), "alpha")? },
        "normmax" => SeparationKind::Normmax { gamma: arg(parts.next(), "gamma")? },
        "ksubsets" => {
            let k = arg(parts.next(), "k")? as usize;
            SeparationKind::Sparsemap(StructureKind::KSubsets { k })
        }
        "seq-ksubsets" => {
            let k = arg(parts.next(), "k")? as usize;
            let t = arg(parts.next(), "a transition score")?;
            SeparationKind::Sparsemap(StructureKind::SeqKSubsets { k, t })
        }
        other => {
            return Err(HarnessError::config(format!("unknown separation '{other}'")));
        }
    };
    Ok(kind)
}

/// Parses a post-transformation CLI string: `identity`, `l2norm:R`,
/// `layernorm:ETA[:EPS]`, `tanh:BETA`, `sign`.
pub fn parse_post(text: &str) -> Result<PostSpec> {
    let mut parts = text.split(':');
    let head = parts.next().unwrap_or_default();
    let arg = |p: Option<&str>, what: &str| -> Result<f64> {
        p.ok_or_else(|| HarnessError::config(format!("{head} needs {what}")))?
            .parse::<f64>()
            .map_err(|e| HarnessError::config(format!("bad {what} in '{text}': {e}")))
    };
    let spec = match head {
        "identity" => PostSpec::Identity,
        "l2norm" => PostSpec::L2Norm { r: arg(parts.next(), "a radius")? },
        "layernorm" => {
            let eta = arg(parts.next(), "eta")?;
            let epsilon = match parts.next() {
                Some(p) => p
                    .parse::<f64>()
                    .map_err(|e| HarnessError::config(format!("bad epsilon: {e}")))?,
                None => 1e-8,
            };
            PostSpec::LayerNorm { eta, delta: vec![], epsilon, unbiased: false }
        }
        "tanh" => PostSpec::Tanh { beta: arg(parts.next(), "beta")? },
        "sign" => PostSpec::Sign,
        other => return Err(HarnessError::config(format!("unknown post '{other}'"))),
    };
    Ok(spec)
}
