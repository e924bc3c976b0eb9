//! Structured inference: MAP oracles and the SparseMAP transformation.
//!
//! Here the domain of the regularizer is no longer the simplex but the
//! convex hull of a combinatorial set of bit vectors 𝒴 (a marginal
//! polytope). SparseMAP is the quadratically regularized MAP problem
//!
//! ```text
//! ŷ(θ) = argmax_{y ∈ conv(𝒴)}  θᵀy − ½‖y_V‖²
//! ```
//!
//! where only the unary part `y_V` of `y = [y_V; y_F]` is regularized. The
//! solution is a sparse convex combination of structures, computed by an
//! active-set method that needs nothing but a MAP oracle: each iteration
//! solves a small equality-constrained QP over the current structures, asks
//! the oracle for the most violating vertex at the gradient-adjusted scores,
//! and drops structures whose weights become negative.
//!
//! Two structure families are built in:
//!
//! - [`KSubsets`] — subsets of exactly k patterns. Its marginal polytope is
//!   the capped simplex `{y ∈ [0,1]^n : Σy = k}`, so SparseMAP reduces to
//!   the specialized projection [`project_capped_simplex`].
//! - [`SeqKSubsets`] — k-subsets on a chain with a pairwise transition bonus
//!   for adjacent selections, encoded as a factor graph with per-variable
//!   one-hot unaries and per-edge factor configurations. MAP is dynamic
//!   programming in O(nk).
//!
//! New structures plug in through the [`MapOracle`] trait: given adjusted
//! unary scores (fixed structural parameters live inside the oracle), return
//! the exact maximizing vertex with its factor configuration bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{sparsemax, SimplexPoint};

/// Default iteration cap for the active-set solver.
pub const SPARSEMAP_MAX_ITER: usize = 100;

/// Default improvement-gap tolerance for the active-set solver.
pub const SPARSEMAP_TOL: f64 = 1e-9;

/// A vertex of a marginal polytope: unary configuration bits plus factor
/// configuration bits (empty for structures without interactions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub unary: Vec<bool>,
    pub factor: Vec<bool>,
}

impl Structure {
    pub fn unary_f64(&self) -> Vec<f64> {
        self.unary.iter().map(|&b| b as u8 as f64).collect()
    }

    fn unary_dot(&self, scores: &[f64]) -> f64 {
        self.unary
            .iter()
            .zip(scores)
            .filter(|(&b, _)| b)
            .map(|(_, &s)| s)
            .sum()
    }

    /// Squared Euclidean distance between two vertices, over all bits.
    fn squared_distance(&self, other: &Structure) -> f64 {
        let u = self
            .unary
            .iter()
            .zip(&other.unary)
            .filter(|(a, b)| a != b)
            .count();
        let f = self
            .factor
            .iter()
            .zip(&other.factor)
            .filter(|(a, b)| a != b)
            .count();
        (u + f) as f64
    }
}

/// Marginals over a structured polytope: a point of conv(𝒴).
///
/// `unary` holds the variable-node marginals in the oracle's encoding (for
/// k-subsets simply one entry per pattern, summing to k); `factor` holds the
/// factor-node marginals when the structure has interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredMarginals {
    pub unary: Vec<f64>,
    pub factor: Vec<f64>,
}

/// Active-set bookkeeping returned alongside SparseMAP marginals.
#[derive(Debug, Clone)]
pub struct ActiveSetState {
    /// Selected structures with strictly positive weight.
    pub structures: Vec<Structure>,
    /// Convex weights over `structures`, summing to one.
    pub weights: Vec<f64>,
    /// Main-loop iterations performed.
    pub iterations: usize,
    /// False when the iteration cap was hit before the gap fell below
    /// tolerance; the returned marginals are then the best iterate.
    pub converged: bool,
    /// Restricted-QP objective (minimization form `½‖μ_V‖² − θᵀμ`) after
    /// each solve; non-increasing along the iterations.
    pub objectives: Vec<f64>,
}

/// Exact MAP oracle over a structured set 𝒴.
///
/// `decode` receives *adjusted* unary scores (already combined with any
/// temperature and active-set gradient correction) and must return an exact
/// maximizer of `scoresᵀy_V + θ_Fᵀy_F`, where the fixed factor scores θ_F
/// are the oracle's own parameters, surfaced through [`MapOracle::factor_score`].
pub trait MapOracle {
    /// Length of the unary encoding.
    fn unary_dim(&self) -> usize;

    /// Length of the factor encoding (0 without interactions).
    fn factor_dim(&self) -> usize {
        0
    }

    /// Number of underlying patterns.
    fn pattern_count(&self) -> usize;

    /// Exact maximizer of `adjustedᵀy_V + θ_Fᵀy_F` over 𝒴.
    fn decode(&self, adjusted_unary: &[f64]) -> Result<Structure>;

    /// Fixed higher-order score `θ_Fᵀy_F` of a structure.
    fn factor_score(&self, s: &Structure) -> f64 {
        let _ = s;
        0.0
    }

    /// Lift per-pattern scores into the unary encoding.
    fn embed_pattern_scores(&self, scores: &[f64]) -> Vec<f64>;

    /// Project unary marginals back to per-pattern "on" marginals.
    fn pattern_marginals(&self, unary: &[f64]) -> Vec<f64>;

    /// Enumerate all structures, failing with a capacity error when more
    /// than `max_structures` exist.
    fn enumerate(&self, max_structures: usize) -> Result<Vec<Structure>>;
}

/// Subsets of exactly k out of n patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSubsets {
    pub n: usize,
    pub k: usize,
}

impl KSubsets {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::domain(format!("k-subsets requires 1 <= k <= n, got k={k}, n={n}")));
        }
        Ok(KSubsets { n, k })
    }
}

impl MapOracle for KSubsets {
    fn unary_dim(&self) -> usize {
        self.n
    }

    fn pattern_count(&self) -> usize {
        self.n
    }

    fn decode(&self, adjusted_unary: &[f64]) -> Result<Structure> {
        let on = map_ksubsets(adjusted_unary, self.k)?;
        Ok(Structure { unary: on, factor: vec![] })
    }

    fn embed_pattern_scores(&self, scores: &[f64]) -> Vec<f64> {
        scores.to_vec()
    }

    fn pattern_marginals(&self, unary: &[f64]) -> Vec<f64> {
        unary.to_vec()
    }

    fn enumerate(&self, max_structures: usize) -> Result<Vec<Structure>> {
        let combos = enumerate_subsets(self.n, self.k, max_structures)?;
        Ok(combos
            .into_iter()
            .map(|on| Structure { unary: on, factor: vec![] })
            .collect())
    }
}

/// Sequential k-subsets: a chain factor graph over n variables where exactly
/// k are on and each adjacent on-on pair earns the transition score `t`.
///
/// Encoding: unary bits are per-variable one-hots `[off, on]` (2n bits);
/// factor bits are per-edge one-hots `[off-off, off-on, on-off, on-on]`
/// (4(n−1) bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqKSubsets {
    pub n: usize,
    pub k: usize,
    /// Transition score for adjacent on-on pairs (typically > 0).
    pub t: f64,
}

impl SeqKSubsets {
    pub fn new(n: usize, k: usize, t: f64) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::domain(format!(
                "sequential k-subsets requires 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::domain("transition score must be finite"));
        }
        Ok(SeqKSubsets { n, k, t })
    }

    fn structure_from_on(&self, on: &[bool]) -> Structure {
        let mut unary = vec![false; 2 * self.n];
        for (i, &b) in on.iter().enumerate() {
            unary[2 * i + b as usize] = true;
        }
        let mut factor = vec![false; 4 * (self.n - 1)];
        for i in 0..self.n.saturating_sub(1) {
            let cfg = 2 * on[i] as usize + on[i + 1] as usize;
            factor[4 * i + cfg] = true;
        }
        Structure { unary, factor }
    }
}

impl MapOracle for SeqKSubsets {
    fn unary_dim(&self) -> usize {
        2 * self.n
    }

    fn factor_dim(&self) -> usize {
        4 * self.n.saturating_sub(1)
    }

    fn pattern_count(&self) -> usize {
        self.n
    }

    fn decode(&self, adjusted_unary: &[f64]) -> Result<Structure> {
        if adjusted_unary.len() != 2 * self.n {
            return Err(Error::dimension(format!(
                "expected {} unary scores, got {}",
                2 * self.n,
                adjusted_unary.len()
            )));
        }
        let on = seq_budget_dp(
            |i| adjusted_unary[2 * i],
            |i| adjusted_unary[2 * i + 1],
            self.t,
            self.n,
            self.k,
        );
        Ok(self.structure_from_on(&on))
    }

    fn factor_score(&self, s: &Structure) -> f64 {
        // Only the on-on slot carries a score.
        let mut total = 0.0;
        for i in 0..self.n.saturating_sub(1) {
            if s.factor[4 * i + 3] {
                total += self.t;
            }
        }
        total
    }

    fn embed_pattern_scores(&self, scores: &[f64]) -> Vec<f64> {
        let mut unary = vec![0.0; 2 * self.n];
        for (i, &s) in scores.iter().enumerate() {
            unary[2 * i + 1] = s;
        }
        unary
    }

    fn pattern_marginals(&self, unary: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| unary[2 * i + 1]).collect()
    }

    fn enumerate(&self, max_structures: usize) -> Result<Vec<Structure>> {
        let combos = enumerate_subsets(self.n, self.k, max_structures)?;
        Ok(combos.iter().map(|on| self.structure_from_on(on)).collect())
    }
}

/// Indicator of the k largest entries of `theta`; ties broken by ascending
/// index.
pub fn map_ksubsets(theta: &[f64], k: usize) -> Result<Vec<bool>> {
    let n = theta.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k must satisfy 1 <= k <= {n}, got {k}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut on = vec![false; n];
    for &i in idx.iter().take(k) {
        on[i] = true;
    }
    Ok(on)
}

/// Exact maximizer of `Σ_{i on} sᵢ + t · #(adjacent on-on pairs)` over all
/// size-k subsets, by dynamic programming over (position, budget, last
/// state). Ties prefer turning on earlier, so the lexicographically earliest
/// subset wins.
pub fn map_seq_ksubsets(s: &[f64], spec: &SeqKSubsets) -> Result<Vec<bool>> {
    if s.len() != spec.n {
        return Err(Error::dimension(format!(
            "expected {} unary scores, got {}",
            spec.n,
            s.len()
        )));
    }
    Ok(seq_budget_dp(|_| 0.0, |i| s[i], spec.t, spec.n, spec.k))
}

/// Suffix DP: `value[i][c][b]` is the best completion from position i with c
/// activations left and previous state b. Forward decoding takes "on" at
/// ties, which yields the earliest activation pattern.
fn seq_budget_dp(
    off: impl Fn(usize) -> f64,
    on: impl Fn(usize) -> f64,
    t: f64,
    n: usize,
    k: usize,
) -> Vec<bool> {
    let idx = |i: usize, c: usize, b: usize| (i * (k + 1) + c) * 2 + b;
    let mut value = vec![f64::NEG_INFINITY; (n + 1) * (k + 1) * 2];
    value[idx(n, 0, 0)] = 0.0;
    value[idx(n, 0, 1)] = 0.0;
    for i in (0..n).rev() {
        for c in 0..=k.min(n - i) {
            for b in 0..2 {
                let stay_off = value[idx(i + 1, c, 0)] + off(i);
                let turn_on = if c > 0 {
                    value[idx(i + 1, c - 1, 1)] + on(i) + if b == 1 { t } else { 0.0 }
                } else {
                    f64::NEG_INFINITY
                };
                value[idx(i, c, b)] = stay_off.max(turn_on);
            }
        }
    }
    let mut out = vec![false; n];
    let (mut c, mut b) = (k, 0usize);
    for i in 0..n {
        let turn_on = if c > 0 {
            value[idx(i + 1, c - 1, 1)] + on(i) + if b == 1 { t } else { 0.0 }
        } else {
            f64::NEG_INFINITY
        };
        let stay_off = value[idx(i + 1, c, 0)] + off(i);
        if turn_on >= stay_off {
            out[i] = true;
            c -= 1;
            b = 1;
        } else {
            b = 0;
        }
    }
    out
}

/// Lexicographic enumeration of all k-element subsets of {0..n-1} as
/// indicator vectors.
fn enumerate_subsets(n: usize, k: usize, max_structures: usize) -> Result<Vec<Vec<bool>>> {
    let count = binomial(n, k);
    if count > max_structures as u128 {
        return Err(Error::capacity(format!(
            "C({n},{k}) = {count} structures exceeds the enumeration cap {max_structures}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let mut on = vec![false; n];
        for &i in &combo {
            on[i] = true;
        }
        out.push(on);
        // Advance to the next combination.
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if combo[pos] < n - k + pos {
                combo[pos] += 1;
                for q in pos + 1..k {
                    combo[q] = combo[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(out);
            }
        }
        if k == 0 {
            return Ok(out);
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// Euclidean projection of `theta` onto the capped simplex
/// `{y ∈ [0,1]^N : Σy = k}` — SparseMAP for the k-subsets polytope.
///
/// The threshold τ in `yᵢ = clip(θᵢ − τ, 0, 1)` is located by a sweep over
/// the sorted breakpoints `{θᵢ} ∪ {θᵢ − 1}`, which partitions coordinates
/// into clamped-at-1 / free / zero with exact boundary values.
pub fn project_capped_simplex(theta: &[f64], k: usize) -> Result<StructuredMarginals> {
    let n = theta.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k must satisfy 1 <= k <= {n}, got {k}")));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scores must be finite"));
    }
    if k == n {
        return Ok(StructuredMarginals { unary: vec![1.0; n], factor: vec![] });
    }
    let target = k as f64;

    // Breakpoints swept downward: entering free at theta_i, leaving to the
    // clamped-at-1 set at theta_i - 1.
    let mut events: Vec<(f64, i8)> = Vec::with_capacity(2 * n);
    for &t in theta {
        events.push((t, 1));
        events.push((t - 1.0, -1));
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut free_count = 0usize;
    let mut free_sum = 0.0;
    let mut ones = 0usize;
    let mut cursor = events[0].0; // S(tau) = 0 for tau >= max theta
    let mut tau = f64::NEG_INFINITY;
    let mut found = false;
    for &(v, kind) in &events {
        if v < cursor && free_count > 0 {
            // Linear segment [v, cursor]: S(tau) = ones + free_sum - free_count*tau.
            let candidate = (free_sum + ones as f64 - target) / free_count as f64;
            if candidate >= v - 1e-12 && candidate <= cursor + 1e-12 {
                tau = candidate;
                found = true;
                break;
            }
        } else if v < cursor && free_count == 0 && ones as f64 == target {
            // Plateau where the vertex solution lives; pick the midpoint so
            // clips land exactly on 0 and 1.
            tau = 0.5 * (v + cursor);
            found = true;
            break;
        }
        cursor = v;
        if kind == 1 {
            free_count += 1;
            free_sum += v;
        } else {
            free_count -= 1;
            free_sum -= v + 1.0;
            ones += 1;
        }
    }
    if !found {
        // All coordinates clamped at 1 happens only for k = n (handled) —
        // numerically fall back to the final plateau.
        tau = cursor - 1.0;
    }

    let mut unary: Vec<f64> = theta.iter().map(|&t| (t - tau).clamp(0.0, 1.0)).collect();
    // Rescale the fractional coordinates so the total is exactly k.
    let ones_mass: f64 = unary.iter().filter(|&&v| v == 1.0).count() as f64;
    let free_mass: f64 = unary.iter().filter(|&&v| v > 0.0 && v < 1.0).sum();
    if free_mass > 0.0 {
        let want = target - ones_mass;
        for v in unary.iter_mut() {
            if *v > 0.0 && *v < 1.0 {
                *v = *v / free_mass * want;
            }
        }
    }
    Ok(StructuredMarginals { unary, factor: vec![] })
}

/// SparseMAP by the active-set method.
///
/// `scores` live in the oracle's unary encoding (see
/// [`MapOracle::embed_pattern_scores`]); any temperature is applied by the
/// caller. Returns the marginals together with the final active set. When
/// `max_iter` is exhausted the best iterate is returned with
/// `converged = false`.
pub fn sparsemap(
    oracle: &dyn MapOracle,
    scores: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(StructuredMarginals, ActiveSetState)> {
    if scores.len() != oracle.unary_dim() {
        return Err(Error::dimension(format!(
            "expected {} unary scores, got {}",
            oracle.unary_dim(),
            scores.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scores must be finite"));
    }

    let mut active: Vec<Structure> = vec![oracle.decode(scores)?];
    let mut scores_of: Vec<f64> = vec![active[0].unary_dot(scores) + oracle.factor_score(&active[0])];
    let mut weights = vec![1.0];
    let mut objectives = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let unary_dim = oracle.unary_dim();
    let factor_dim = oracle.factor_dim();
    let marginals = |active: &[Structure], weights: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut mu_v = vec![0.0; unary_dim];
        let mut mu_f = vec![0.0; factor_dim];
        for (s, &w) in active.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (i, &b) in s.unary.iter().enumerate() {
                if b {
                    mu_v[i] += w;
                }
            }
            for (i, &b) in s.factor.iter().enumerate() {
                if b {
                    mu_f[i] += w;
                }
            }
        }
        (mu_v, mu_f)
    };
    let objective = |mu_v: &[f64], weights: &[f64], scores_of: &[f64]| -> f64 {
        let sq: f64 = mu_v.iter().map(|v| v * v).sum();
        let lin: f64 = weights.iter().zip(scores_of).map(|(w, s)| w * s).sum();
        0.5 * sq - lin
    };

    {
        let (mu_v, _) = marginals(&active, &weights);
        objectives.push(objective(&mu_v, &weights, &scores_of));
    }

    for iter in 1..=max_iter {
        iterations = iter;
        let (mu_v, _) = marginals(&active, &weights);

        // Most violating vertex at the gradient-adjusted scores.
        let adjusted: Vec<f64> = scores.iter().zip(&mu_v).map(|(s, m)| s - m).collect();
        let candidate = oracle.decode(&adjusted)?;
        let cand_score = candidate.unary_dot(scores) + oracle.factor_score(&candidate);

        // Frank-Wolfe gap of the maximization objective at the current point.
        let cand_adjusted = candidate.unary_dot(&adjusted);
        let mu_adjusted: f64 = adjusted.iter().zip(&mu_v).map(|(a, m)| a * m).sum();
        let factor_mu: f64 = weights
            .iter()
            .zip(&active)
            .map(|(&w, s)| w * oracle.factor_score(s))
            .sum();
        let factor_cand = oracle.factor_score(&candidate);
        let gap = (cand_adjusted - mu_adjusted) + (factor_cand - factor_mu);
        if gap <= tol {
            converged = true;
            break;
        }
        if active.contains(&candidate) {
            // The oracle cannot supply a new direction; numerically optimal.
            converged = true;
            break;
        }

        active.push(candidate);
        scores_of.push(cand_score);
        weights.push(0.0);
        weights = solve_restricted_qp(&active, &scores_of, &weights)?;
        let (mu_v, _) = marginals(&active, &weights);
        objectives.push(objective(&mu_v, &weights, &scores_of));
    }

    // Prune exact-zero weights from the returned state.
    let mut kept_structures = Vec::new();
    let mut kept_weights = Vec::new();
    for (s, &w) in active.iter().zip(&weights) {
        if w > 0.0 {
            kept_structures.push(s.clone());
            kept_weights.push(w);
        }
    }
    let (mu_v, mu_f) = marginals(&kept_structures, &kept_weights);
    Ok((
        StructuredMarginals { unary: mu_v, factor: mu_f },
        ActiveSetState {
            structures: kept_structures,
            weights: kept_weights,
            iterations,
            converged,
            objectives,
        },
    ))
}

/// Solves the restricted QP `min ½‖Σ wⱼ aⱼ_V‖² − Σ wⱼ bⱼ  s.t. Σw = 1, w ≥ 0`
/// over the active structures, warm-started from the feasible `w_start`.
///
/// Each pass solves the equality-constrained KKT system over the live
/// structures; if the solution leaves the simplex, the iterate moves as far
/// toward it as feasibility allows and the blocking structure (whose weight
/// hits zero first) is dropped — one per pass, so the objective never
/// increases. Dropped structures come back with weight zero; the caller
/// prunes them.
fn solve_restricted_qp(
    active: &[Structure],
    scores_of: &[f64],
    w_start: &[f64],
) -> Result<Vec<f64>> {
    let mut live: Vec<usize> = (0..active.len()).collect();
    let mut w = w_start.to_vec();
    loop {
        let j = live.len();
        if j == 1 {
            let mut out = vec![0.0; active.len()];
            out[live[0]] = 1.0;
            return Ok(out);
        }
        let mut gram = vec![vec![0.0; j]; j];
        for (r, &ir) in live.iter().enumerate() {
            for (c, &ic) in live.iter().enumerate().skip(r) {
                let dot = active[ir]
                    .unary
                    .iter()
                    .zip(&active[ic].unary)
                    .filter(|(&a, &b)| a && b)
                    .count() as f64;
                gram[r][c] = dot;
                gram[c][r] = dot;
            }
        }
        let b: Vec<f64> = live.iter().map(|&i| scores_of[i]).collect();
        let w_kkt = solve_kkt(&gram, &b)?;
        if w_kkt.iter().all(|&wi| wi >= 0.0) {
            let mut out = vec![0.0; active.len()];
            for (&i, &wi) in live.iter().zip(&w_kkt) {
                out[i] = wi;
            }
            return Ok(out);
        }
        // Largest feasible step from w toward the KKT point; the structure
        // whose weight reaches zero first leaves the live set.
        let mut alpha = 1.0;
        let mut blocking = 0;
        for (pos, &i) in live.iter().enumerate() {
            if w_kkt[pos] < 0.0 {
                let denom = w[i] - w_kkt[pos];
                let step = if denom > 0.0 { w[i] / denom } else { 0.0 };
                if step < alpha {
                    alpha = step;
                    blocking = pos;
                }
            }
        }
        for (pos, &i) in live.iter().enumerate() {
            w[i] += alpha * (w_kkt[pos] - w[i]);
        }
        w[live[blocking]] = 0.0;
        live.remove(blocking);
    }
}

/// Solves the bordered KKT system `[[G, 1], [1ᵀ, 0]] [w; λ] = [b; 1]` by
/// Gaussian elimination with partial pivoting, retrying with a small ridge
/// on near-singular systems (affinely dependent active sets).
fn solve_kkt(gram: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let j = b.len();
    for ridge in [0.0, 1e-10, 1e-7] {
        let n = j + 1;
        let mut m = vec![vec![0.0; n + 1]; n];
        for r in 0..j {
            for c in 0..j {
                m[r][c] = gram[r][c] + if r == c { ridge } else { 0.0 };
            }
            m[r][j] = 1.0;
            m[r][n] = b[r];
        }
        for cell in m[j].iter_mut().take(j) {
            *cell = 1.0;
        }
        m[j][n] = 1.0;
        if let Some(sol) = gauss_solve(&mut m) {
            return Ok(sol[..j].to_vec());
        }
    }
    Err(Error::domain("active-set KKT system is singular"))
}

/// In-place Gaussian elimination on an augmented matrix; None when singular.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..=n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Structured margin check: true iff
/// `θᵀy ≥ max_{y' ∈ 𝒴} [θᵀy' + ½‖y − y'‖²]` (inclusive), with the score of
/// a vertex including the oracle's fixed factor scores. Enumerates 𝒴, so
/// small instances only.
pub fn structured_margin_satisfied(
    oracle: &dyn MapOracle,
    scores: &[f64],
    y: &Structure,
    max_structures: usize,
) -> Result<bool> {
    let vertices = oracle.enumerate(max_structures)?;
    let own = y.unary_dot(scores) + oracle.factor_score(y);
    for v in &vertices {
        let rival = v.unary_dot(scores) + oracle.factor_score(v) + 0.5 * y.squared_distance(v);
        if own < rival {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Convenience: SparseMAP over k-subsets reduced to per-pattern marginals,
/// cross-checkable against [`project_capped_simplex`].
pub fn sparsemap_ksubsets(theta: &[f64], k: usize) -> Result<(Vec<f64>, ActiveSetState)> {
    let oracle = KSubsets::new(theta.len(), k)?;
    let (marginals, state) = sparsemap(&oracle, theta, SPARSEMAP_MAX_ITER, SPARSEMAP_TOL)?;
    Ok((marginals.unary, state))
}

/// The capped-simplex projection at k = 1 as a [`SimplexPoint`]; equal to
/// sparsemax.
pub fn capped_top1(theta: &[f64]) -> Result<SimplexPoint> {
    sparsemax(theta)
}
