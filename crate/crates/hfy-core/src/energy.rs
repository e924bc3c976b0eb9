//! Energies, update rules, and fixed-point dynamics.
//!
//! A memory is a matrix `X` with one pattern per row. The update map is the
//! composition of four operations — similarity (dot products `Xq`),
//! separation (`ŷ_Ω`), projection (`Xᵀ·`), and an optional
//! post-transformation (`ŷ_Ψ`):
//!
//! ```text
//! q ← ŷ_Ψ( Xᵀ · ŷ_Ω(β X q) )
//! ```
//!
//! Separation kinds cover the classical catalogue: identity (classic
//! Hopfield networks, paired with a tanh or sign post-transformation),
//! signed powers and exponentials (dense associative memories), softmax
//! (modern Hopfield networks), the sparse entmax/normmax family, and
//! SparseMAP over a structured polytope for pattern associations.
//!
//! For probabilistic separations with `Ψ = ½‖·‖²`, the iteration is the
//! concave-convex procedure on the energy
//!
//! ```text
//! E(q) = −β⁻¹ L_Ω(βXq, 1/N) + ½‖q − μ_X‖² + ½(M² − ‖μ_X‖²)
//! ```
//!
//! with `μ_X` the mean pattern and `M` the largest pattern norm. The
//! constant term pins the energy so that `0 ≤ E(q) ≤ min{2M²,
//! −β⁻¹Ω(1/N) + ½M²}` for any query in the convex hull of the patterns,
//! and [`iterate`] records the (non-increasing) energy along each trace.
//!
//! Two constructions are documented but not modeled as first-class specs:
//! a hetero-associative projection (`Ψ(q) = ½qᵀA⁻¹q` for a fixed symmetric
//! positive-definite A turns the post step into `z ↦ Az`, which callers can
//! apply to the update output directly), and sums of energies (the
//! conjugate of an infimal convolution `Ω₁ □ Ω₂` is `Ω₁* + Ω₂*`, so the
//! corresponding update maps add).

use std::fmt;
use std::io::Write;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{
    entmax, fy_loss_base, negentropy_value, normmax, softmax, NegentropyKind, SimplexPoint,
    BISECTION_ITERS,
};
use crate::structured::{
    sparsemap, ActiveSetState, KSubsets, MapOracle, SeqKSubsets, StructuredMarginals,
    SPARSEMAP_MAX_ITER, SPARSEMAP_TOL,
};

/// Tolerance for "bit-exact" retrieval claims.
pub const EXACT_RETRIEVAL_TOL: f64 = 1e-9;

/// Default convergence tolerance on `‖q⁺ − q‖_∞` for [`iterate`].
pub const DEFAULT_ITERATE_TOL: f64 = 1e-8;

/// Default iteration cap for [`iterate`].
pub const DEFAULT_MAX_ITER: usize = 1000;

/// A stored pattern matrix with cached geometry. Immutable after
/// construction, so it can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct PatternMemory {
    x: Array2<f64>,
    row_norms: Vec<f64>,
    max_norm: f64,
    mean: Vec<f64>,
}

impl PatternMemory {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(Error::domain("pattern matrix must be non-empty"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("pattern matrix has non-finite entries"));
        }
        let row_norms: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let max_norm = row_norms.iter().cloned().fold(0.0, f64::max);
        let mean: Vec<f64> = (0..d)
            .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
            .collect();
        Ok(PatternMemory { x, row_norms, max_norm, mean })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("pattern matrix must be non-empty"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::dimension("pattern rows have differing lengths"));
        }
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let x = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::dimension(e.to_string()))?;
        PatternMemory::new(x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i).to_slice().expect("standard layout")
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn mean_pattern(&self) -> &[f64] {
        &self.mean
    }

    /// Similarity scores `Xq`.
    pub fn scores(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.d() {
            return Err(Error::dimension(format!(
                "query has {} entries, patterns have {}",
                q.len(),
                self.d()
            )));
        }
        let qv = ndarray::ArrayView1::from(q);
        Ok(self.x.dot(&qv).to_vec())
    }

    /// Projection `Xᵀw`, skipping exact-zero weights so vertex outputs
    /// reproduce stored rows bit-for-bit.
    pub fn weighted_sum(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n() {
            return Err(Error::dimension(format!(
                "weights have {} entries, memory stores {}",
                w.len(),
                self.n()
            )));
        }
        let mut out = vec![0.0; self.d()];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let row = self.row(i);
            if wi == 1.0 && out.iter().all(|&v| v == 0.0) {
                out.copy_from_slice(row);
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o += wi * r;
            }
        }
        Ok(out)
    }

    /// Separations `Δᵢ = xᵢᵀxᵢ − max_{j≠i} xᵢᵀxⱼ`.
    pub fn separations(&self) -> Vec<f64> {
        self.x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, xi)| {
                let own = xi.dot(&xi);
                let mut best = f64::NEG_INFINITY;
                for (j, xj) in self.x.rows().into_iter().enumerate() {
                    if j != i {
                        best = best.max(xi.dot(&xj));
                    }
                }
                if best.is_finite() {
                    own - best
                } else {
                    own
                }
            })
            .collect()
    }

    /// Spectral norm `σ_max(X)` by power iteration on `XᵀX` to 1e−10
    /// relative tolerance.
    pub fn spectral_norm(&self) -> f64 {
        let d = self.d();
        let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
        // Deterministic tilt in case the uniform vector is orthogonal to the
        // leading eigenvector.
        for (j, e) in v.iter_mut().enumerate() {
            *e += 1e-3 * ((j % 7) as f64 - 3.0) / (d as f64);
        }
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = self.x.t().dot(&self.x.dot(&v));
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = &w / norm;
            let new_lambda = norm;
            let rel = (new_lambda - lambda).abs() / new_lambda.max(f64::MIN_POSITIVE);
            v = next;
            lambda = new_lambda;
            if rel < 1e-10 {
                break;
            }
        }
        lambda.sqrt()
    }

    /// True when all rows share a common norm up to relative tolerance.
    pub fn has_common_norm(&self, rel_tol: f64) -> bool {
        let m = self.max_norm;
        self.row_norms.iter().all(|&r| (r - m).abs() <= rel_tol * m.max(1.0))
    }
}

/// Structured polytope choices for the SparseMAP separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "kebab-case")]
pub enum StructureKind {
    KSubsets { k: usize },
    SeqKSubsets { k: usize, t: f64 },
}

/// The separation step `sep(Xq)` of the update pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeparationKind {
    /// Classic Hopfield networks: scores pass through (scaled by β).
    Identity,
    /// Polynomial dense associative memories: `sign(θ)|θ|^{r−1}`.
    SignedPower { r: f64 },
    /// Exponential dense associative memories: `exp(βθ)`.
    Exp,
    /// Modern Hopfield networks.
    Softmax,
    /// Sparse modern Hopfield networks; α = 2 is sparsemax.
    Entmax { alpha: f64 },
    Normmax { gamma: f64 },
    /// Structured modern Hopfield networks.
    Sparsemap(StructureKind),
}

/// Separation kind plus inverse temperature β (applied as `ŷ_Ω(βθ)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationSpec {
    pub kind: SeparationKind,
    pub beta: f64,
}

impl SeparationSpec {
    pub fn new(kind: SeparationKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        match kind {
            SeparationKind::SignedPower { r } if r < 2.0 || !r.is_finite() => {
                Err(Error::domain(format!("signed power requires finite r >= 2, got {r}")))
            }
            SeparationKind::Entmax { alpha } if alpha < 1.0 || !alpha.is_finite() => {
                Err(Error::domain(format!("entmax requires finite alpha >= 1, got {alpha}")))
            }
            SeparationKind::Normmax { gamma } if gamma <= 1.0 || !gamma.is_finite() => {
                Err(Error::domain(format!("normmax requires finite gamma > 1, got {gamma}")))
            }
            SeparationKind::Sparsemap(StructureKind::KSubsets { k })
            | SeparationKind::Sparsemap(StructureKind::SeqKSubsets { k, .. })
                if k == 0 =>
            {
                Err(Error::domain("k-subsets structures require k >= 1"))
            }
            _ => Ok(SeparationSpec { kind, beta }),
        }
    }

    pub fn softmax(beta: f64) -> Result<Self> {
        Self::new(SeparationKind::Softmax, beta)
    }

    pub fn entmax(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(SeparationKind::Entmax { alpha }, beta)
    }

    pub fn normmax(gamma: f64, beta: f64) -> Result<Self> {
        Self::new(SeparationKind::Normmax { gamma }, beta)
    }

    pub fn sparsemap_ksubsets(k: usize, beta: f64) -> Result<Self> {
        Self::new(SeparationKind::Sparsemap(StructureKind::KSubsets { k }), beta)
    }

    pub fn sparsemap_seq(k: usize, t: f64, beta: f64) -> Result<Self> {
        Self::new(SeparationKind::Sparsemap(StructureKind::SeqKSubsets { k, t }), beta)
    }

    /// Negentropy behind probabilistic kinds (those with a defined energy).
    pub fn negentropy_kind(&self) -> Option<NegentropyKind> {
        match self.kind {
            SeparationKind::Softmax => Some(NegentropyKind::Shannon),
            SeparationKind::Entmax { alpha } => Some(NegentropyKind::Tsallis { alpha }),
            SeparationKind::Normmax { gamma } => Some(NegentropyKind::Norm { gamma }),
            _ => None,
        }
    }

    /// Fenchel-Young margin of the separation, when one exists.
    pub fn margin(&self) -> Option<f64> {
        self.negentropy_kind().and_then(crate::simplex::margin_of)
    }
}

impl fmt::Display for SeparationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SeparationKind::Identity => write!(f, "identity"),
            SeparationKind::SignedPower { r } => write!(f, "spow({r})"),
            SeparationKind::Exp => write!(f, "exp"),
            SeparationKind::Softmax => write!(f, "softmax"),
            SeparationKind::Entmax { alpha } => write!(f, "entmax({alpha})"),
            SeparationKind::Normmax { gamma } => write!(f, "normmax({gamma})"),
            SeparationKind::Sparsemap(StructureKind::KSubsets { k }) => {
                write!(f, "ksubsets({k})")
            }
            SeparationKind::Sparsemap(StructureKind::SeqKSubsets { k, t }) => {
                write!(f, "seq-ksubsets({k},t={t})")
            }
        }
    }
}

/// Post-transformation `ŷ_Ψ` applied after the projection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PostSpec {
    Identity,
    /// ℓ₂ normalization onto the sphere of radius r: `r·z/‖z‖`.
    #[serde(rename = "l2norm")]
    L2Norm { r: f64 },
    /// Layer normalization `η(z − μ_z)/√(var + ε) + δ`, with the biased 1/D
    /// variance by default; `unbiased` switches to 1/(D−1). An empty `delta`
    /// means the zero offset.
    #[serde(rename = "layernorm")]
    LayerNorm {
        eta: f64,
        #[serde(default)]
        delta: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
        #[serde(default)]
        unbiased: bool,
    },
    /// Elementwise `tanh(βz)` (continuous classic Hopfield networks).
    Tanh { beta: f64 },
    /// Elementwise sign with `sign(0) = +1` (binary classic Hopfield networks).
    Sign,
}

impl PostSpec {
    pub fn layernorm(eta: f64, delta: Vec<f64>, epsilon: f64) -> Self {
        PostSpec::LayerNorm { eta, delta, epsilon, unbiased: false }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PostSpec::L2Norm { r } if *r <= 0.0 || !r.is_finite() => {
                Err(Error::domain("l2norm requires finite r > 0"))
            }
            PostSpec::LayerNorm { eta, epsilon, .. }
                if *eta <= 0.0 || !eta.is_finite() || *epsilon < 0.0 =>
            {
                Err(Error::domain("layernorm requires finite eta > 0 and epsilon >= 0"))
            }
            PostSpec::Tanh { beta } if *beta <= 0.0 || !beta.is_finite() => {
                Err(Error::domain("tanh requires finite beta > 0"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PostSpec::Identity => write!(f, "identity"),
            PostSpec::L2Norm { r } => write!(f, "l2norm({r})"),
            PostSpec::LayerNorm { eta, .. } => write!(f, "layernorm({eta})"),
            PostSpec::Tanh { beta } => write!(f, "tanh({beta})"),
            PostSpec::Sign => write!(f, "sign"),
        }
    }
}

/// Output of the separation step.
#[derive(Debug, Clone)]
pub enum SeparationOutput {
    /// Raw per-pattern weights (identity, signed power, exponential kinds).
    Weights(Vec<f64>),
    /// A probability distribution over patterns.
    Distribution(SimplexPoint),
    /// Structured marginals with per-pattern weights extracted.
    Structured {
        pattern: Vec<f64>,
        marginals: StructuredMarginals,
        state: ActiveSetState,
    },
}

impl SeparationOutput {
    /// Per-pattern weights fed to the projection `Xᵀ·`.
    pub fn pattern_weights(&self) -> &[f64] {
        match self {
            SeparationOutput::Weights(w) => w,
            SeparationOutput::Distribution(p) => p.probs(),
            SeparationOutput::Structured { pattern, .. } => pattern,
        }
    }
}

fn make_oracle(kind: StructureKind, n: usize) -> Result<Box<dyn MapOracle>> {
    match kind {
        StructureKind::KSubsets { k } => Ok(Box::new(KSubsets::new(n, k)?)),
        StructureKind::SeqKSubsets { k, t } => Ok(Box::new(SeqKSubsets::new(n, k, t)?)),
    }
}

/// Applies the separation step to similarity scores.
pub fn separation_apply(spec: &SeparationSpec, theta: &[f64]) -> Result<SeparationOutput> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scores must be finite"));
    }
    let beta = spec.beta;
    match spec.kind {
        SeparationKind::Identity => {
            Ok(SeparationOutput::Weights(theta.iter().map(|&t| beta * t).collect()))
        }
        SeparationKind::SignedPower { r } => Ok(SeparationOutput::Weights(
            theta.iter().map(|&t| t.signum() * t.abs().powf(r - 1.0)).collect(),
        )),
        SeparationKind::Exp => {
            Ok(SeparationOutput::Weights(theta.iter().map(|&t| (beta * t).exp()).collect()))
        }
        SeparationKind::Softmax => Ok(SeparationOutput::Distribution(softmax(theta, beta)?)),
        SeparationKind::Entmax { alpha } => {
            let scaled: Vec<f64> = theta.iter().map(|&t| beta * t).collect();
            Ok(SeparationOutput::Distribution(entmax(&scaled, alpha)?))
        }
        SeparationKind::Normmax { gamma } => {
            let scaled: Vec<f64> = theta.iter().map(|&t| beta * t).collect();
            Ok(SeparationOutput::Distribution(normmax(&scaled, gamma, BISECTION_ITERS)?))
        }
        SeparationKind::Sparsemap(structure) => {
            let oracle = make_oracle(structure, theta.len())?;
            let scaled: Vec<f64> = theta.iter().map(|&t| beta * t).collect();
            let embedded = oracle.embed_pattern_scores(&scaled);
            let (marginals, state) =
                sparsemap(oracle.as_ref(), &embedded, SPARSEMAP_MAX_ITER, SPARSEMAP_TOL)?;
            let pattern = oracle.pattern_marginals(&marginals.unary);
            Ok(SeparationOutput::Structured { pattern, marginals, state })
        }
    }
}

/// Applies the post-transformation `ŷ_Ψ`.
pub fn post_apply(spec: &PostSpec, z: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        PostSpec::Identity => Ok(z.to_vec()),
        PostSpec::L2Norm { r } => {
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::domain("l2norm is undefined at the zero vector"));
            }
            Ok(z.iter().map(|&v| r * v / norm).collect())
        }
        PostSpec::LayerNorm { eta, delta, epsilon, unbiased } => {
            let d = z.len();
            if !delta.is_empty() && delta.len() != d {
                return Err(Error::dimension("layernorm offset has wrong length"));
            }
            let mu = z.iter().sum::<f64>() / d as f64;
            let denom = if *unbiased { (d - 1).max(1) as f64 } else { d as f64 };
            let var = z.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / denom;
            let scale = (var + epsilon).sqrt();
            if scale == 0.0 {
                return Err(Error::domain(
                    "layernorm is undefined for a constant vector when epsilon = 0",
                ));
            }
            Ok(z.iter()
                .enumerate()
                .map(|(i, &v)| {
                    eta * (v - mu) / scale + delta.get(i).copied().unwrap_or(0.0)
                })
                .collect())
        }
        PostSpec::Tanh { beta } => Ok(z.iter().map(|&v| (beta * v).tanh()).collect()),
        PostSpec::Sign => Ok(z
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect()),
    }
}

/// One Hopfield update `ŷ_Ψ(Xᵀ ŷ_Ω(βXq))`.
pub fn hopfield_update(
    q: &[f64],
    mem: &PatternMemory,
    sep: &SeparationSpec,
    post: &PostSpec,
) -> Result<Vec<f64>> {
    let theta = mem.scores(q)?;
    let out = separation_apply(sep, &theta)?;
    let z = mem.weighted_sum(out.pattern_weights())?;
    post_apply(post, &z)
}

/// Energy of the probabilistic (softmax/entmax/normmax) networks with the
/// quadratic `Ψ`:
///
/// ```text
/// E(q) = −β⁻¹ L_Ω(βXq, 1/N) + ½‖q − μ_X‖² + ½(M² − ‖μ_X‖²)
/// ```
///
/// The loss baseline is the uniform distribution (the minimizer of any
/// generalized negentropy); the energy's value does not depend on that
/// choice, only the constant split between the two loss terms does.
pub fn hfy_energy(q: &[f64], mem: &PatternMemory, sep: &SeparationSpec) -> Result<f64> {
    let kind = sep
        .negentropy_kind()
        .ok_or_else(|| Error::domain(format!("energy is not defined for separation {sep}")))?;
    let beta = sep.beta;
    let theta = mem.scores(q)?;
    let scaled: Vec<f64> = theta.iter().map(|&t| beta * t).collect();
    let n = mem.n();
    let uniform = vec![1.0 / n as f64; n];
    let loss = fy_loss_base(&scaled, &uniform, kind)?;
    let mu = mem.mean_pattern();
    let diff_sq: f64 = q.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    let mu_sq: f64 = mu.iter().map(|v| v * v).sum();
    let m = mem.max_norm();
    Ok(-loss / beta + 0.5 * diff_sq + 0.5 * (m * m - mu_sq))
}

/// Upper bound of the energy over the convex hull of the patterns:
/// `min{2M², −β⁻¹Ω(1/N) + ½M²}`.
pub fn hfy_energy_upper_bound(mem: &PatternMemory, sep: &SeparationSpec) -> Result<f64> {
    let kind = sep
        .negentropy_kind()
        .ok_or_else(|| Error::domain(format!("energy is not defined for separation {sep}")))?;
    let n = mem.n();
    let uniform = vec![1.0 / n as f64; n];
    let m = mem.max_norm();
    let omega_u = negentropy_value(&uniform, kind);
    Ok((2.0 * m * m).min(-omega_u / sep.beta + 0.5 * m * m))
}

/// A fixed-point iteration record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Query after each step, starting with the initial query.
    pub queries: Vec<Vec<f64>>,
    /// Energy at each recorded query; empty when the energy is not defined
    /// for the spec (non-probabilistic separation or non-identity post).
    pub energies: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
}

impl IterationTrace {
    pub fn final_query(&self) -> &[f64] {
        self.queries.last().expect("trace holds at least the initial query")
    }

    /// One row per iterate: `step,energy,q_0,...,q_{D-1}`. The energy column
    /// is empty when undefined.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "step,energy,query")?;
        for (i, q) in self.queries.iter().enumerate() {
            let energy = self
                .energies
                .get(i)
                .map(|e| e.to_string())
                .unwrap_or_default();
            let coords: Vec<String> = q.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{energy},{}", coords.join(";"))?;
        }
        Ok(())
    }
}

/// Iterates the update map until `‖q⁺ − q‖_∞ ≤ tol` or `max_iter` steps.
/// Non-convergence is a flagged outcome, not an error.
pub fn iterate(
    q0: &[f64],
    mem: &PatternMemory,
    sep: &SeparationSpec,
    post: &PostSpec,
    max_iter: usize,
    tol: f64,
) -> Result<IterationTrace> {
    if max_iter == 0 {
        return Err(Error::domain("max_iter must be at least 1"));
    }
    let track_energy = sep.negentropy_kind().is_some() && *post == PostSpec::Identity;
    let mut queries = vec![q0.to_vec()];
    let mut energies = Vec::new();
    if track_energy {
        energies.push(hfy_energy(q0, mem, sep)?);
    }
    let mut q = q0.to_vec();
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..max_iter {
        let next = hopfield_update(&q, mem, sep, post)?;
        steps += 1;
        let delta = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        queries.push(q.clone());
        if track_energy {
            energies.push(hfy_energy(&q, mem, sep)?);
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }
    Ok(IterationTrace { queries, energies, converged, steps })
}

/// Samples ε-perturbed queries around well-separated stored patterns and
/// reports the fraction recovered exactly (within 1e−9, single update).
///
/// Patterns must share a common norm M; only patterns whose separation
/// satisfies `Δᵢ ≥ m/β + 2Mε` are queried, per the one-step exact-retrieval
/// guarantee.
pub fn exact_retrieval_check(
    mem: &PatternMemory,
    sep: &SeparationSpec,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let m = sep
        .margin()
        .ok_or_else(|| Error::domain(format!("separation {sep} has no margin")))?;
    if !mem.has_common_norm(1e-6) {
        return Err(Error::domain("patterns must share a common norm"));
    }
    if epsilon < 0.0 {
        return Err(Error::domain("epsilon must be non-negative"));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let bound = m / sep.beta + 2.0 * mem.max_norm() * epsilon;
    let deltas = mem.separations();
    let qualifying: Vec<usize> = (0..mem.n()).filter(|&i| deltas[i] >= bound).collect();
    if qualifying.is_empty() {
        return Err(Error::domain(format!(
            "no pattern satisfies the separation precondition Δ ≥ {bound}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = mem.d();
    let mut successes = 0;
    for _ in 0..trials {
        let i = qualifying[rng.random_range(0..qualifying.len())];
        let mut q0 = mem.row(i).to_vec();
        if epsilon > 0.0 {
            let mut r: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut r {
                *v /= norm;
            }
            for (qv, rv) in q0.iter_mut().zip(&r) {
                *qv += epsilon * rv;
            }
        }
        let q1 = hopfield_update(&q0, mem, sep, &PostSpec::Identity)?;
        let err = q1
            .iter()
            .zip(mem.row(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err <= EXACT_RETRIEVAL_TOL {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

/// One update of the classic binary Hopfield baseline:
/// `q ← sign(Ŵq)` with Hebbian weights `Ŵ = XᵀX − diag(XᵀX)`.
///
/// Self-connections are removed per the classical construction; keeping
/// them (as the plain identity-separation + sign composition does) lets the
/// diagonal freeze any sign pattern and hides the storage-capacity collapse
/// this baseline is meant to exhibit.
pub fn classic_binary_update(q: &[f64], mem: &PatternMemory) -> Result<Vec<f64>> {
    let theta = mem.scores(q)?;
    let mut z = mem.weighted_sum(&theta)?;
    for (c, zc) in z.iter_mut().enumerate() {
        let diag: f64 = (0..mem.n()).map(|j| mem.row(j)[c] * mem.row(j)[c]).sum();
        *zc -= diag * q[c];
    }
    post_apply(&PostSpec::Sign, &z)
}

/// Iterates the classic binary baseline to a sign fixed point.
pub fn classic_binary_iterate(
    q0: &[f64],
    mem: &PatternMemory,
    max_iter: usize,
) -> Result<IterationTrace> {
    let mut q = q0.to_vec();
    let mut queries = vec![q.clone()];
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..max_iter.max(1) {
        let next = classic_binary_update(&q, mem)?;
        steps += 1;
        let same = q == next;
        q = next;
        queries.push(q.clone());
        if same {
            converged = true;
            break;
        }
    }
    Ok(IterationTrace { queries, energies: vec![], converged, steps })
}

/// Support size of the separation at convergence, for metastable censuses.
/// Dense softmax supports are counted above the 0.01 threshold; sparse and
/// structured kinds use their exact supports.
pub fn support_census(spec: &SeparationSpec, theta: &[f64]) -> Result<usize> {
    let out = separation_apply(spec, theta)?;
    let thresholded = matches!(
        spec.kind,
        SeparationKind::Softmax | SeparationKind::Entmax { alpha: 1.0 }
    );
    Ok(match out {
        SeparationOutput::Distribution(p) => {
            if thresholded {
                p.probs().iter().filter(|&&v| v > 0.01).count()
            } else {
                p.support_size()
            }
        }
        SeparationOutput::Structured { pattern, .. } => {
            pattern.iter().filter(|&&v| v != 0.0).count()
        }
        SeparationOutput::Weights(_) => {
            return Err(Error::domain(
                "support census is defined for probabilistic and structured separations",
            ))
        }
    })
}

/// A rectangular query grid for basin-of-attraction maps. For 3-D memories
/// the third coordinate is taken on the zero-sum plane `z = −x − y`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// One grid cell outcome: the converged label (1-based pattern index, None
/// for metastable) plus trace statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinCell {
    pub q0: Vec<f64>,
    pub label: Option<usize>,
    pub steps: usize,
    pub converged: bool,
}

/// Basin labels over a grid of initial queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinGrid {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<BasinCell>,
}

impl BasinGrid {
    /// Column order: `x,y[,z],label,steps,converged`; label 0 marks a
    /// metastable cell, stored patterns are 1-based.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let d = self.cells.first().map(|c| c.q0.len()).unwrap_or(2);
        if d == 3 {
            writeln!(w, "x,y,z,label,steps,converged")?;
        } else {
            writeln!(w, "x,y,label,steps,converged")?;
        }
        for c in &self.cells {
            let coords: Vec<String> = c.q0.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{}",
                coords.join(","),
                c.label.map(|l| l + 1).unwrap_or(0),
                c.steps,
                c.converged
            )?;
        }
        Ok(())
    }
}

/// Iterates every grid query to convergence and labels it by the nearest
/// stored pattern within `label_tol` (Euclidean), or metastable otherwise.
pub fn basin_grid(
    mem: &PatternMemory,
    sep: &SeparationSpec,
    post: &PostSpec,
    grid: &GridSpec,
    label_tol: f64,
    max_iter: usize,
    tol: f64,
) -> Result<BasinGrid> {
    let d = mem.d();
    if d != 2 && d != 3 {
        return Err(Error::domain("basin grids require 2-D or 3-D patterns"));
    }
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::domain("grid needs at least 2 steps per axis"));
    }
    if !(grid.x_min < grid.x_max && grid.y_min < grid.y_max) {
        return Err(Error::domain("grid bounds must be finite and ordered"));
    }
    let mut cells = Vec::with_capacity(grid.nx * grid.ny);
    for iy in 0..grid.ny {
        let y = grid.y_min + (grid.y_max - grid.y_min) * iy as f64 / (grid.ny - 1) as f64;
        for ix in 0..grid.nx {
            let x = grid.x_min + (grid.x_max - grid.x_min) * ix as f64 / (grid.nx - 1) as f64;
            let q0 = if d == 2 { vec![x, y] } else { vec![x, y, -x - y] };
            let trace = iterate(&q0, mem, sep, post, max_iter, tol)?;
            let qf = trace.final_query();
            let mut label = None;
            let mut best = f64::INFINITY;
            for i in 0..mem.n() {
                let dist = qf
                    .iter()
                    .zip(mem.row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist < best {
                    best = dist;
                    label = Some(i);
                }
            }
            let label = if best <= label_tol { label } else { None };
            cells.push(BasinCell { q0, label, steps: trace.steps, converged: trace.converged });
        }
    }
    Ok(BasinGrid { nx: grid.nx, ny: grid.ny, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn identity_memory() -> PatternMemory {
        PatternMemory::new(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap()
    }

    #[test]
    fn separation_spow_r2_is_signed_identity() {
        let spec = SeparationSpec::new(SeparationKind::SignedPower { r: 2.0 }, 1.0).unwrap();
        let out = separation_apply(&spec, &[-2.0, 3.0]).unwrap();
        assert_eq!(out.pattern_weights(), &[-2.0, 3.0]);
    }

    #[test]
    fn separation_exp_at_zero() {
        let spec = SeparationSpec::new(SeparationKind::Exp, 1.0).unwrap();
        let out = separation_apply(&spec, &[0.0, 0.0]).unwrap();
        assert_eq!(out.pattern_weights(), &[1.0, 1.0]);
    }

    #[test]
    fn separation_entmax_margin_vertex() {
        let spec = SeparationSpec::entmax(2.0, 1.0).unwrap();
        let out = separation_apply(&spec, &[2.0, 0.0]).unwrap();
        assert_eq!(out.pattern_weights(), &[1.0, 0.0]);
    }

    #[test]
    fn post_layernorm_direct_value() {
        let spec = PostSpec::layernorm(1.0, vec![], 0.0);
        let out = post_apply(&spec, &[1.0, 2.0, 3.0]).unwrap();
        let e = 1.5_f64.sqrt();
        for (a, b) in out.iter().zip(&[-e, 0.0, e]) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn post_l2norm_unit() {
        let out = post_apply(&PostSpec::L2Norm { r: 1.0 }, &[3.0, 4.0]).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15);
        assert!((out[1] - 0.8).abs() < 1e-15);
        assert!(post_apply(&PostSpec::L2Norm { r: 1.0 }, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn post_layernorm_idempotent() {
        // Idempotence holds for offsets constant across coordinates (the
        // argmax direction is otherwise tilted by the offset's deviation
        // from its own mean).
        for delta in [vec![], vec![0.7; 4]] {
            let spec = PostSpec::layernorm(1.3, delta, 0.0);
            let z = [0.3, -1.2, 2.0, 0.7];
            let once = post_apply(&spec, &z).unwrap();
            let twice = post_apply(&spec, &once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let spec = PostSpec::layernorm(1.3, vec![], 0.0);
        assert!(post_apply(&spec, &[1.0; 4]).is_err()); // constant input, eps = 0
    }

    #[test]
    fn post_sign_and_tanh() {
        let out = post_apply(&PostSpec::Sign, &[-0.5, 0.0, 2.0]).unwrap();
        assert_eq!(out, vec![-1.0, 1.0, 1.0]);
        let out = post_apply(&PostSpec::Tanh { beta: 2.0 }, &[0.5]).unwrap();
        assert!((out[0] - 1.0_f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn update_softmax_identity_patterns() {
        let mem = identity_memory();
        let spec = SeparationSpec::softmax(1.0).unwrap();
        let q1 = hopfield_update(&[1.0, 0.0], &mem, &spec, &PostSpec::Identity).unwrap();
        assert!((q1[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((q1[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn update_sparse_margin_retrieves_exactly() {
        let mem = identity_memory();
        let spec = SeparationSpec::entmax(2.0, 1.0).unwrap();
        let q1 = hopfield_update(&[1.0, 0.0], &mem, &spec, &PostSpec::Identity).unwrap();
        assert_eq!(q1, vec![1.0, 0.0]);
    }

    #[test]
    fn update_structured_returns_association() {
        let mem = PatternMemory::new(arr2(&[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]))
        .unwrap();
        // Query whose scores are [10, 9, 0]: the top-2 association is exact.
        let q = vec![10.0, 9.0, 0.0];
        let spec = SeparationSpec::sparsemap_ksubsets(2, 1.0).unwrap();
        let q1 = hopfield_update(&q, &mem, &spec, &PostSpec::Identity).unwrap();
        assert_eq!(q1, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn energy_zero_for_repeated_pattern() {
        let mem = PatternMemory::new(arr2(&[[0.5, -0.2], [0.5, -0.2], [0.5, -0.2]])).unwrap();
        let spec = SeparationSpec::softmax(1.0).unwrap();
        let e = hfy_energy(&[0.5, -0.2], &mem, &spec).unwrap();
        assert!(e.abs() < 1e-12, "{e}");
    }

    #[test]
    fn energy_stationary_pattern_is_fixed_point() {
        let mem = identity_memory();
        let spec = SeparationSpec::entmax(2.0, 2.0).unwrap(); // margin 1, Δ = 1, β = 2
        let q1 = hopfield_update(&[1.0, 0.0], &mem, &spec, &PostSpec::Identity).unwrap();
        assert_eq!(q1, vec![1.0, 0.0]);
    }

    #[test]
    fn iterate_records_descending_energy() {
        let mem = PatternMemory::new(arr2(&[
            [1.0, 0.3, -0.2],
            [-0.4, 0.9, 0.1],
            [0.2, -0.5, 0.8],
        ]))
        .unwrap();
        let spec = SeparationSpec::softmax(1.5).unwrap();
        let trace = iterate(&[0.4, 0.1, -0.3], &mem, &spec, &PostSpec::Identity, 100, 1e-10)
            .unwrap();
        assert!(trace.converged);
        assert_eq!(trace.energies.len(), trace.queries.len());
        for pair in trace.energies.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{:?}", trace.energies);
        }
    }

    #[test]
    fn iterate_one_step_exact_from_margin_query() {
        let mem = identity_memory();
        let spec = SeparationSpec::entmax(1.5, 4.0).unwrap(); // margin 2, Δβ = 4 ≥ 2
        let trace = iterate(&[1.0, 0.0], &mem, &spec, &PostSpec::Identity, 10, 1e-8).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.final_query(), &[1.0, 0.0]);
    }

    #[test]
    fn exact_retrieval_on_separated_sphere() {
        // Orthogonal patterns scaled so Δ = M² comfortably exceeds m/β + 2Mε.
        let m = 2.0;
        let mem = PatternMemory::new(arr2(&[
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(mem.max_norm(), m);
        let spec = SeparationSpec::entmax(2.0, 1.0).unwrap();
        let rate = exact_retrieval_check(&mem, &spec, 0.5, 200, 7).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn census_counts_support() {
        let spec = SeparationSpec::entmax(2.0, 1.0).unwrap();
        assert_eq!(support_census(&spec, &[2.0, 0.0, 0.0]).unwrap(), 1);
        let spec = SeparationSpec::softmax(1.0).unwrap();
        assert_eq!(support_census(&spec, &[0.0, 0.0, -100.0]).unwrap(), 2);
        let spec = SeparationSpec::sparsemap_ksubsets(2, 1.0).unwrap();
        assert_eq!(support_census(&spec, &[10.0, 9.0, 0.0]).unwrap(), 2);
    }

    #[test]
    fn basin_grid_labels_attractors() {
        let mem = PatternMemory::new(arr2(&[[1.0, 0.0], [-1.0, 0.0]])).unwrap();
        let spec = SeparationSpec::entmax(2.0, 10.0).unwrap();
        let grid = GridSpec { x_min: -1.2, x_max: 1.2, y_min: -0.5, y_max: 0.5, nx: 7, ny: 3 };
        let basins =
            basin_grid(&mem, &spec, &PostSpec::Identity, &grid, 0.01, 50, 1e-9).unwrap();
        assert_eq!(basins.cells.len(), 21);
        // Queries near each stored pattern are labeled by it.
        let near_first = basins
            .cells
            .iter()
            .find(|c| (c.q0[0] - 1.2).abs() < 1e-12 && c.q0[1].abs() < 1e-12)
            .unwrap();
        assert_eq!(near_first.label, Some(0));
        let near_second = basins
            .cells
            .iter()
            .find(|c| (c.q0[0] + 1.2).abs() < 1e-12 && c.q0[1].abs() < 1e-12)
            .unwrap();
        assert_eq!(near_second.label, Some(1));
    }

    #[test]
    fn trace_csv_has_energy_column() {
        let mem = identity_memory();
        let spec = SeparationSpec::softmax(1.0).unwrap();
        let trace = iterate(&[0.4, 0.1], &mem, &spec, &PostSpec::Identity, 5, 1e-6).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,energy,query"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,") && first.contains(";"), "{first}");
        assert_eq!(text.lines().count(), 1 + trace.queries.len());
    }

    #[test]
    fn classic_binary_stable_at_low_load() {
        let mem = PatternMemory::new(arr2(&[
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
        ]))
        .unwrap();
        let q1 = classic_binary_update(&[1.0, 1.0, 1.0, 1.0], &mem).unwrap();
        assert_eq!(q1, vec![1.0, 1.0, 1.0, 1.0]);
        // A corrupted copy flows back to the stored pattern.
        let trace = classic_binary_iterate(&[0.9, 1.1, 0.8, 1.0], &mem, 10).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.final_query(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn separations_and_spectral_norm() {
        let mem = identity_memory();
        let deltas = mem.separations();
        assert!((deltas[0] - 1.0).abs() < 1e-12);
        assert!((mem.spectral_norm() - 1.0).abs() < 1e-8);
    }
}
