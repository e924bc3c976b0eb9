//! Free and sequential memory recall.
//!
//! Plain Hopfield retrieval returns the attractor closest to the query and
//! keeps returning it. The recall simulators layer a bookkeeping mechanism
//! on top so that an episode visits *all* stored memories:
//!
//! - [`free_recall_constrained`] caps the probability mass each pattern may
//!   receive: attended mass is subtracted from a per-pattern budget `u`,
//!   and the inner retrieval uses the constrained sparsemax `y ≤ u`.
//! - [`free_recall_penalized`] subtracts a decayed moving average of past
//!   attention from the scores before an α-entmax selection, then cleans the
//!   query with un-penalized inner updates.
//! - [`sequential_recall`] replaces the selection with SparseMAP over
//!   sequential 2-subsets: each outer step retrieves the pair (cue,
//!   successor), subtracts the cue, and penalizes it for later steps, so the
//!   episode walks the stored order.
//!
//! Episodes are scored by the fraction of distinct memories recalled
//! ([`unique_memory_ratio`]) and, for sequential recall, by the normalized
//! edit distance to the storage order ([`levenshtein_coefficient`]).

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::energy::PatternMemory;
use crate::error::{Error, Result};
use crate::simplex::{constrained_sparsemax, entmax, SimplexPoint, UpperBounds};
use crate::structured::{sparsemap, MapOracle, SeqKSubsets, SPARSEMAP_MAX_ITER, SPARSEMAP_TOL};

/// Parameters for the recall algorithms. Constructors fill in only the
/// fields the chosen algorithm reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallConfig {
    /// Inverse temperature applied to the outer selection scores.
    pub beta: f64,
    /// Inner Hopfield iterations per outer step (T).
    pub inner_iters: usize,
    /// Penalty weight on the attention moving average (λ).
    pub lambda: f64,
    /// Decay rate of the moving average (τ ∈ (0, 1]).
    pub tau: f64,
    /// Boost coefficient for the successor pattern (ω ≥ 1).
    pub omega: f64,
    /// Transition score of the sequential 2-subsets structure (t).
    pub transition: f64,
    /// Entropic index of the inner α-entmax (1 = softmax, 2 = sparsemax).
    pub alpha: f64,
    /// Cosine similarity above which a query counts as a recalled pattern.
    pub match_threshold: f64,
    /// Also scale the sequential inner-loop scores by β (off by default;
    /// the printed algorithm applies β only in the outer selection).
    pub inner_beta: bool,
}

impl RecallConfig {
    fn base(beta: f64, inner_iters: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("beta must be positive"));
        }
        if inner_iters == 0 {
            return Err(Error::domain("at least one inner iteration is required"));
        }
        Ok(RecallConfig {
            beta,
            inner_iters,
            lambda: 0.0,
            tau: 1.0,
            omega: 1.0,
            transition: 0.0,
            alpha: 2.0,
            match_threshold: 0.9,
            inner_beta: false,
        })
    }

    /// Algorithm parameters for constrained-sparsemax free recall.
    pub fn constrained(beta: f64, inner_iters: usize) -> Result<Self> {
        Self::base(beta, inner_iters)
    }

    /// Algorithm parameters for penalized α-entmax free recall.
    pub fn penalized(
        beta: f64,
        inner_iters: usize,
        lambda: f64,
        tau: f64,
        alpha: f64,
    ) -> Result<Self> {
        let mut cfg = Self::base(beta, inner_iters)?;
        if lambda < 0.0 {
            return Err(Error::domain("lambda must be non-negative"));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::domain("tau must lie in (0, 1]"));
        }
        if alpha < 1.0 {
            return Err(Error::domain("alpha must be at least 1"));
        }
        cfg.lambda = lambda;
        cfg.tau = tau;
        cfg.alpha = alpha;
        Ok(cfg)
    }

    /// Algorithm parameters for sequential recall (SparseMAP, k = 2).
    pub fn sequential(
        beta: f64,
        inner_iters: usize,
        lambda: f64,
        tau: f64,
        omega: f64,
        transition: f64,
        alpha: f64,
    ) -> Result<Self> {
        let mut cfg = Self::penalized(beta, inner_iters, lambda, tau, alpha)?;
        if omega < 1.0 {
            return Err(Error::domain("omega must be at least 1"));
        }
        if !transition.is_finite() {
            return Err(Error::domain("transition score must be finite"));
        }
        cfg.omega = omega;
        cfg.transition = transition;
        Ok(cfg)
    }

    pub fn with_match_threshold(mut self, threshold: f64) -> Self {
        self.match_threshold = threshold;
        self
    }

    pub fn with_inner_beta(mut self, on: bool) -> Self {
        self.inner_beta = on;
        self
    }
}

/// One outer recall step.
#[derive(Debug, Clone)]
pub struct RecallStep {
    pub step: usize,
    /// Attended distribution (p) or structured pattern marginals (y).
    pub attended: Vec<f64>,
    /// Matched pattern (by best cosine similarity above the threshold).
    pub recalled: Option<usize>,
    /// Cosine similarity to the matched (or best) pattern.
    pub similarity: f64,
    /// Query snapshot after the step.
    pub query: Vec<f64>,
}

impl Serialize for RecallStep {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("RecallStep", 5)?;
        s.serialize_field("step", &(self.step + 1))?;
        s.serialize_field("attended", &self.attended)?;
        // Pattern indices are 1-based on the wire; null marks no match.
        s.serialize_field("recalled", &self.recalled.map(|i| i + 1))?;
        s.serialize_field("similarity", &self.similarity)?;
        s.serialize_field("query", &self.query)?;
        s.end()
    }
}

/// A recall episode: one entry per outer step (N steps unless the mass
/// budget was exhausted early).
#[derive(Debug, Clone, Serialize)]
pub struct RecallTrace {
    pub steps: Vec<RecallStep>,
    /// True when constrained recall stopped early because the remaining
    /// upper bounds could no longer hold a unit of probability mass.
    pub exhausted: bool,
}

impl RecallTrace {
    /// Matched pattern indices in recall order, unmatched steps skipped.
    pub fn recalled_sequence(&self) -> Vec<usize> {
        self.steps.iter().filter_map(|s| s.recalled).collect()
    }

    /// Compact per-step CSV: `step,recalled,similarity` with 1-based
    /// pattern indices and 0 for unmatched steps.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "step,recalled,similarity")?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{}",
                s.step + 1,
                s.recalled.map(|i| i + 1).unwrap_or(0),
                s.similarity
            )?;
        }
        Ok(())
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

/// Best-matching pattern for a query: the index with maximal cosine
/// similarity, kept only above the threshold.
pub fn match_pattern(q: &[f64], mem: &PatternMemory, threshold: f64) -> (Option<usize>, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for i in 0..mem.n() {
        let sim = cosine(q, mem.row(i));
        if sim > best {
            best = sim;
            arg = i;
        }
    }
    if best > threshold {
        (Some(arg), best)
    } else {
        (None, best)
    }
}

fn record_step(
    steps: &mut Vec<RecallStep>,
    mem: &PatternMemory,
    cfg: &RecallConfig,
    attended: Vec<f64>,
    q: &[f64],
) {
    let (recalled, similarity) = match_pattern(q, mem, cfg.match_threshold);
    steps.push(RecallStep {
        step: steps.len(),
        attended,
        recalled,
        similarity,
        query: q.to_vec(),
    });
}

/// Free recall with constrained sparsemax.
///
/// Upper bounds start at one; every outer step runs T capped Hopfield
/// updates `p = csparsemax(βXq; u), q = Xᵀp`, then charges the attended
/// mass against the bounds (`u ← u − p`, clamped at zero). A pattern whose
/// budget is spent can no longer receive probability, which forces each
/// outer step toward a fresh attractor.
pub fn free_recall_constrained(
    mem: &PatternMemory,
    q0: &[f64],
    cfg: &RecallConfig,
) -> Result<RecallTrace> {
    let n = mem.n();
    let mut u = vec![1.0; n];
    let mut q = q0.to_vec();
    let mut steps = Vec::with_capacity(n);
    let mut exhausted = false;
    for _ in 0..n {
        if u.iter().sum::<f64>() < 1.0 - 1e-12 {
            exhausted = true;
            break;
        }
        let bounds = UpperBounds::new(u.clone())?;
        let mut p: Option<SimplexPoint> = None;
        for _ in 0..cfg.inner_iters {
            let theta = mem.scores(&q)?;
            let scaled: Vec<f64> = theta.iter().map(|&t| cfg.beta * t).collect();
            let point = constrained_sparsemax(&scaled, &bounds)?;
            q = mem.weighted_sum(point.probs())?;
            p = Some(point);
        }
        let p = p.expect("inner_iters >= 1");
        for (ui, &pi) in u.iter_mut().zip(p.probs()) {
            *ui = (*ui - pi).max(0.0);
        }
        record_step(&mut steps, mem, cfg, p.into_probs(), &q);
    }
    Ok(RecallTrace { steps, exhausted })
}

/// Free recall with penalized α-entmax.
///
/// Every outer step selects `p = entmax_α(β(Xq − λa))`, folds the selection
/// into the exponentially weighted average `a ← τp + (1−τ)a`, applies the
/// outer update `q = Xᵀp`, and then runs T un-penalized inner updates.
pub fn free_recall_penalized(
    mem: &PatternMemory,
    q0: &[f64],
    cfg: &RecallConfig,
) -> Result<RecallTrace> {
    let n = mem.n();
    let mut a = vec![0.0; n];
    let mut q = q0.to_vec();
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = mem.scores(&q)?;
        let scores: Vec<f64> = theta
            .iter()
            .zip(&a)
            .map(|(&t, &ai)| cfg.beta * (t - cfg.lambda * ai))
            .collect();
        let selected = entmax(&scores, cfg.alpha)?;
        for (ai, &pi) in a.iter_mut().zip(selected.probs()) {
            *ai = cfg.tau * pi + (1.0 - cfg.tau) * *ai;
        }
        q = mem.weighted_sum(selected.probs())?;
        for _ in 0..cfg.inner_iters {
            let theta = mem.scores(&q)?;
            let scaled: Vec<f64> = theta.iter().map(|&t| cfg.beta * t).collect();
            let p = entmax(&scaled, cfg.alpha)?;
            q = mem.weighted_sum(p.probs())?;
        }
        record_step(&mut steps, mem, cfg, selected.into_probs(), &q);
    }
    Ok(RecallTrace { steps, exhausted: false })
}

/// Sequential recall using SparseMAP with sequential 2-subsets.
///
/// The outer selection retrieves a pattern *association* `y` (ideally the
/// cue and its successor), the update `q ← Xᵀy − q` subtracts the cue, T
/// inner α-entmax updates settle on the successor, and the moving average
/// absorbs `y − ωp` so the consumed cue is penalized while the successor
/// keeps a small bonus (ω slightly above one discourages memory jumps).
pub fn sequential_recall(
    mem: &PatternMemory,
    q0: &[f64],
    cfg: &RecallConfig,
) -> Result<RecallTrace> {
    let n = mem.n();
    let oracle = SeqKSubsets::new(n, 2, cfg.transition)?;
    let mut a = vec![0.0; n];
    let mut q = q0.to_vec();
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = mem.scores(&q)?;
        let scores: Vec<f64> = theta
            .iter()
            .zip(&a)
            .map(|(&t, &ai)| cfg.beta * (t - cfg.lambda * ai))
            .collect();
        let embedded = oracle.embed_pattern_scores(&scores);
        let (marginals, _) = sparsemap(&oracle, &embedded, SPARSEMAP_MAX_ITER, SPARSEMAP_TOL)?;
        let y = oracle.pattern_marginals(&marginals.unary);
        let xy = mem.weighted_sum(&y)?;
        for (qi, &xi) in q.iter_mut().zip(&xy) {
            *qi = xi - *qi;
        }
        let mut p = vec![0.0; n];
        for _ in 0..cfg.inner_iters {
            let theta = mem.scores(&q)?;
            let scaled: Vec<f64> = if cfg.inner_beta {
                theta.iter().map(|&t| cfg.beta * t).collect()
            } else {
                theta
            };
            let point = entmax(&scaled, cfg.alpha)?;
            q = mem.weighted_sum(point.probs())?;
            p = point.into_probs();
        }
        for i in 0..n {
            a[i] = cfg.tau * (y[i] - cfg.omega * p[i]) + (1.0 - cfg.tau) * a[i];
        }
        record_step(&mut steps, mem, cfg, y, &q);
    }
    Ok(RecallTrace { steps, exhausted: false })
}

/// Fraction of distinct memories recalled across an episode. A step counts
/// as recalling pattern i when the cosine similarity of its query snapshot
/// to row i is maximal and exceeds the threshold.
pub fn unique_memory_ratio(trace: &RecallTrace, mem: &PatternMemory, threshold: f64) -> f64 {
    let mut seen = vec![false; mem.n()];
    for step in &trace.steps {
        if let (Some(i), _) = match_pattern(&step.query, mem, threshold) {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&s| s).count() as f64 / mem.n() as f64
}

/// `1 − D/C` where D is the unit-cost Levenshtein distance between the
/// recalled sequence and the reference, and C the reference length.
pub fn levenshtein_coefficient(recalled: &[usize], reference: &[usize]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::domain("reference sequence must be non-empty"));
    }
    let d = levenshtein(recalled, reference);
    Ok(1.0 - d as f64 / reference.len() as f64)
}

fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let sub = prev[j] + (ai != bj) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Reference order for sequential recall: the successor chain 2..N given
/// cue 1 (0-based indices 1..N−1).
pub fn successor_reference(n: usize) -> Vec<usize> {
    (1..n).collect()
}
