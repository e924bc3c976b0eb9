//! Probability-simplex transformations and Fenchel-Young losses.
//!
//! Every transformation here solves a regularized argmax over the simplex
//! `△_N = {y ≥ 0, Σy = 1}`:
//!
//! ```text
//! ŷ_Ω(θ) = argmax_{y ∈ △_N}  θᵀy − Ω(y)
//! ```
//!
//! for a generalized negentropy Ω (strictly convex, permutation invariant,
//! zero at the simplex vertices):
//!
//! | Ω                                  | transformation | support |
//! |------------------------------------|----------------|---------|
//! | Shannon `Σ yᵢ log yᵢ`              | softmax        | dense   |
//! | Tsallis `(‖y‖_α^α − 1)/(α(α−1))`   | α-entmax       | sparse  |
//! | norm `‖y‖_γ − 1`                   | γ-normmax      | sparse  |
//!
//! Sparsemax is α-entmax at α = 2 (Euclidean projection onto the simplex),
//! and a constrained variant caps each coordinate by an upper bound.
//!
//! The induced Fenchel-Young loss `L_Ω(θ, y) = Ω(y) + Ω*(θ) − θᵀy` is
//! non-negative and vanishes exactly at `y = ŷ_Ω(θ)`. For the sparse
//! negentropies the loss has a *margin*: once the score gap
//! `θᵢ − max_{j≠i} θⱼ` reaches [`margin_of`], the output is exactly the
//! vertex `eᵢ` — the property behind exact memory retrieval.
//!
//! Temperature convention: a spec's inverse temperature β always multiplies
//! the scores before the transform, `ŷ_Ω(βθ)`; the negentropy itself is never
//! rescaled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed number of interval halvings for the entmax/normmax bisections.
/// Shrinks the bracket below 2⁻⁵⁰ of its initial width, beyond what f64
/// resolves for the score ranges in play.
pub const BISECTION_ITERS: usize = 50;

/// Early-exit tolerance on the bisection residual.
const BISECTION_TOL: f64 = 1e-12;

/// A point of the probability simplex with explicit support bookkeeping.
///
/// Sparse transforms emit true zeros off support, so `support()` is exact:
/// an index is present iff its probability is not `0.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    probs: Vec<f64>,
    support: Vec<usize>,
}

impl SimplexPoint {
    /// Wraps a probability vector, deriving the support from nonzero entries.
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let support = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, _)| i)
            .collect();
        SimplexPoint { probs, support }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// True when the point is exactly the vertex `e_i`.
    pub fn is_vertex(&self, i: usize) -> bool {
        self.support.len() == 1 && self.support[0] == i && self.probs[i] == 1.0
    }
}

/// Generalized negentropy families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NegentropyKind {
    /// Shannon negentropy `Σ yᵢ log yᵢ` (softmax / cross-entropy).
    Shannon,
    /// Tsallis α-negentropy `(‖y‖_α^α − 1)/(α(α−1))` (α-entmax). α = 1 is
    /// the Shannon limit, α = 2 the Gini negentropy (sparsemax).
    Tsallis { alpha: f64 },
    /// Norm γ-negentropy `‖y‖_γ − 1` (γ-normmax).
    Norm { gamma: f64 },
}

impl NegentropyKind {
    /// Gini negentropy, the Tsallis family at α = 2.
    pub fn gini() -> Self {
        NegentropyKind::Tsallis { alpha: 2.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NegentropyKind::Shannon => Ok(()),
            NegentropyKind::Tsallis { alpha } if alpha >= 1.0 && alpha.is_finite() => Ok(()),
            NegentropyKind::Tsallis { alpha } => {
                Err(Error::domain(format!("tsallis requires alpha >= 1, got {alpha}")))
            }
            NegentropyKind::Norm { gamma } if gamma > 1.0 && gamma.is_finite() => Ok(()),
            NegentropyKind::Norm { gamma } => {
                Err(Error::domain(format!("norm negentropy requires gamma > 1, got {gamma}")))
            }
        }
    }
}

/// A negentropy together with its inverse temperature β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegentropySpec {
    pub kind: NegentropyKind,
    /// Inverse temperature; scores are scaled as `βθ` before the transform.
    pub beta: f64,
}

impl NegentropySpec {
    pub fn new(kind: NegentropyKind, beta: f64) -> Result<Self> {
        kind.validate()?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(NegentropySpec { kind, beta })
    }

    pub fn shannon(beta: f64) -> Result<Self> {
        Self::new(NegentropyKind::Shannon, beta)
    }

    pub fn tsallis(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(NegentropyKind::Tsallis { alpha }, beta)
    }

    pub fn norm(gamma: f64, beta: f64) -> Result<Self> {
        Self::new(NegentropyKind::Norm { gamma }, beta)
    }

    /// Applies the regularized argmax `ŷ_Ω(βθ)`.
    pub fn transform(&self, theta: &[f64]) -> Result<SimplexPoint> {
        let scaled = scale(theta, self.beta);
        match self.kind {
            NegentropyKind::Shannon => softmax(&scaled, 1.0),
            NegentropyKind::Tsallis { alpha } => entmax(&scaled, alpha),
            NegentropyKind::Norm { gamma } => normmax(&scaled, gamma, BISECTION_ITERS),
        }
    }
}

/// Per-coordinate upper bounds for the constrained sparsemax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBounds(Vec<f64>);

impl UpperBounds {
    /// Bounds must lie in [0, 1] and sum to at least 1 so the constrained
    /// simplex is nonempty.
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::domain("upper bounds must lie in [0, 1]"));
        }
        if u.iter().sum::<f64>() < 1.0 - 1e-12 {
            return Err(Error::domain("upper bounds must sum to at least 1"));
        }
        Ok(UpperBounds(u))
    }

    pub fn ones(n: usize) -> Self {
        UpperBounds(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn validate_scores(theta: &[f64]) -> Result<()> {
    if theta.is_empty() {
        return Err(Error::domain("score vector must be non-empty"));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("score vector has non-finite entries"));
    }
    Ok(())
}

fn scale(theta: &[f64], beta: f64) -> Vec<f64> {
    theta.iter().map(|&t| beta * t).collect()
}

fn max_score(theta: &[f64]) -> f64 {
    theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Indices of `theta` sorted by descending score, ties by ascending index.
fn argsort_desc(theta: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    idx
}

/// Softmax with inverse temperature β, stabilized by max subtraction.
pub fn softmax(theta: &[f64], beta: f64) -> Result<SimplexPoint> {
    validate_scores(theta)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if theta.len() == 1 {
        return Ok(SimplexPoint::from_probs(vec![1.0]));
    }
    let m = max_score(theta);
    let exps: Vec<f64> = theta.iter().map(|&t| (beta * (t - m)).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(SimplexPoint::from_probs(exps.iter().map(|&e| e / z).collect()))
}

/// Euclidean projection of `theta` onto the probability simplex, by the
/// exact sort-and-threshold procedure. Off-support entries are exact zeros.
pub fn sparsemax(theta: &[f64]) -> Result<SimplexPoint> {
    validate_scores(theta)?;
    Ok(sparsemax_with_mass(theta, 1.0))
}

/// Projection of `theta` onto the scaled simplex `{y ≥ 0, Σy = mass}`.
/// Callers guarantee finite scores and `mass ≥ 0`.
pub(crate) fn sparsemax_with_mass(theta: &[f64], mass: f64) -> SimplexPoint {
    let n = theta.len();
    if mass <= 0.0 {
        return SimplexPoint::from_probs(vec![0.0; n]);
    }
    let order = argsort_desc(theta);
    // k = max { j : mass + j·θ_(j) > Σ_{i ≤ j} θ_(i) }
    let mut cumsum = 0.0;
    let mut k = 0;
    let mut topk_sum = 0.0;
    for (j, &i) in order.iter().enumerate() {
        cumsum += theta[i];
        if mass + (j + 1) as f64 * theta[i] > cumsum {
            k = j + 1;
            topk_sum = cumsum;
        }
    }
    let tau = (topk_sum - mass) / k as f64;
    let mut probs = vec![0.0; n];
    let mut total = 0.0;
    for &i in order.iter().take(k) {
        let v = (theta[i] - tau).max(0.0);
        probs[i] = v;
        total += v;
    }
    // Renormalize over the support so single-vertex outputs are exactly
    // `mass` and rounding in tau cannot leak into the sum.
    if total > 0.0 {
        for &i in order.iter().take(k) {
            probs[i] *= mass / total;
        }
    }
    SimplexPoint::from_probs(probs)
}

/// α-entmax: `ŷ_Ω(θ)` for the Tsallis α-negentropy.
///
/// α = 1 dispatches to [`softmax`]; for α > 1 the threshold τ in
/// `yᵢ = [(α−1)(θᵢ − τ)]₊^{1/(α−1)}` is found by bisection and the result is
/// renormalized over its support. α = 2 agrees with [`sparsemax`].
pub fn entmax(theta: &[f64], alpha: f64) -> Result<SimplexPoint> {
    validate_scores(theta)?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("entmax requires alpha >= 1, got {alpha}")));
    }
    if alpha == 1.0 {
        return softmax(theta, 1.0);
    }
    let n = theta.len();
    if n == 1 {
        return Ok(SimplexPoint::from_probs(vec![1.0]));
    }
    let inv = 1.0 / (alpha - 1.0);
    let theta_max = max_score(theta);
    // At tau_lo the top coordinate alone contributes 1; at tau_hi every
    // coordinate contributes at most 1/N. The sum is decreasing in tau.
    let mut lo = theta_max - inv;
    let mut hi = theta_max - inv * (n as f64).powf(1.0 - alpha);
    let sum_at = |tau: f64| -> f64 {
        theta
            .iter()
            .map(|&t| {
                let v = (alpha - 1.0) * (t - tau);
                if v > 0.0 {
                    v.powf(inv)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..BISECTION_ITERS {
        tau = 0.5 * (lo + hi);
        let s = sum_at(tau);
        if (s - 1.0).abs() <= BISECTION_TOL {
            break;
        }
        if s < 1.0 {
            hi = tau;
        } else {
            lo = tau;
        }
    }
    let mut probs: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let v = (alpha - 1.0) * (t - tau);
            if v > 0.0 {
                v.powf(inv)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(SimplexPoint::from_probs(probs))
}

/// γ-normmax: `ŷ_Ω(θ)` for the norm γ-negentropy, by bisection on the dual
/// variable μ over `[θ_max − 1, θ_max − N^{1−γ}]` with the normalization
/// condition `Σ (θⱼ − μ)₊^{γ/(γ−1)} = 1`, then renormalizing
/// `yᵢ ∝ (θᵢ − μ)₊^{1/(γ−1)}` to sum exactly one.
pub fn normmax(theta: &[f64], gamma: f64, iters: usize) -> Result<SimplexPoint> {
    validate_scores(theta)?;
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("normmax requires gamma > 1, got {gamma}")));
    }
    if iters == 0 {
        return Err(Error::domain("normmax requires at least one bisection iteration"));
    }
    let n = theta.len();
    if n == 1 {
        return Ok(SimplexPoint::from_probs(vec![1.0]));
    }
    let theta_max = max_score(theta);
    let mut mu_min = theta_max - 1.0;
    let mut mu_max = theta_max - (n as f64).powf(1.0 - gamma);
    let exp_z = gamma / (gamma - 1.0);
    let mut mu = 0.5 * (mu_min + mu_max);
    for _ in 0..iters {
        mu = 0.5 * (mu_min + mu_max);
        let z: f64 = theta
            .iter()
            .map(|&t| {
                let v = t - mu;
                if v > 0.0 {
                    v.powf(exp_z)
                } else {
                    0.0
                }
            })
            .sum();
        if (z - 1.0).abs() <= BISECTION_TOL {
            break;
        }
        if z < 1.0 {
            mu_max = mu;
        } else {
            mu_min = mu;
        }
    }
    let inv = 1.0 / (gamma - 1.0);
    let mut probs: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let v = t - mu;
            if v > 0.0 {
                v.powf(inv)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(SimplexPoint::from_probs(probs))
}

/// Constrained sparsemax: `argmax θᵀy − ½‖y‖²` over `{y ∈ △_N : y ≤ u}`.
///
/// Active-set over the upper bounds: solve sparsemax on the free
/// coordinates with the residual mass, clamp every violator to its bound,
/// and repeat. The clamped set only grows, so at most N rounds run.
pub fn constrained_sparsemax(theta: &[f64], u: &UpperBounds) -> Result<SimplexPoint> {
    validate_scores(theta)?;
    let bounds = u.values();
    if bounds.len() != theta.len() {
        return Err(Error::dimension(format!(
            "scores have {} entries but bounds have {}",
            theta.len(),
            bounds.len()
        )));
    }
    let n = theta.len();
    let mut clamped = vec![false; n];
    let mut probs = vec![0.0; n];
    loop {
        let clamped_mass: f64 = (0..n).filter(|&i| clamped[i]).map(|i| bounds[i]).sum();
        let mass = (1.0 - clamped_mass).max(0.0);
        let free: Vec<usize> = (0..n).filter(|&i| !clamped[i]).collect();
        for (i, p) in probs.iter_mut().enumerate() {
            *p = if clamped[i] { bounds[i] } else { 0.0 };
        }
        if free.is_empty() || mass == 0.0 {
            break;
        }
        let free_scores: Vec<f64> = free.iter().map(|&i| theta[i]).collect();
        let sub = sparsemax_with_mass(&free_scores, mass);
        let mut violated = false;
        for (pos, &i) in free.iter().enumerate() {
            let v = sub.probs()[pos];
            if v > bounds[i] {
                clamped[i] = true;
                violated = true;
            } else {
                probs[i] = v;
            }
        }
        if !violated {
            break;
        }
    }
    Ok(SimplexPoint::from_probs(probs))
}

/// Generalized negentropy value Ω(y). Zero at one-hot vertices, non-positive
/// on the simplex; `0·log 0 = 0` for the Shannon kind.
pub fn negentropy_value(y: &[f64], kind: NegentropyKind) -> f64 {
    match kind {
        NegentropyKind::Shannon => y
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum(),
        NegentropyKind::Tsallis { alpha } => {
            if alpha == 1.0 {
                return negentropy_value(y, NegentropyKind::Shannon);
            }
            let s: f64 = y.iter().map(|&p| p.abs().powf(alpha)).sum();
            (s - 1.0) / (alpha * (alpha - 1.0))
        }
        NegentropyKind::Norm { gamma } => {
            let s: f64 = y.iter().map(|&p| p.abs().powf(gamma)).sum();
            s.powf(1.0 / gamma) - 1.0
        }
    }
}

/// Fenchel conjugate `Ω*(θ) = max_y θᵀy − Ω(y)` of the *base* negentropy
/// (no temperature applied).
pub fn conjugate_value(theta: &[f64], kind: NegentropyKind) -> Result<f64> {
    match kind {
        NegentropyKind::Shannon => {
            validate_scores(theta)?;
            Ok(log_sum_exp(theta))
        }
        _ => {
            let y = match kind {
                NegentropyKind::Tsallis { alpha } => entmax(theta, alpha)?,
                NegentropyKind::Norm { gamma } => normmax(theta, gamma, BISECTION_ITERS)?,
                NegentropyKind::Shannon => unreachable!(),
            };
            let inner: f64 = theta.iter().zip(y.probs()).map(|(t, p)| t * p).sum();
            Ok(inner - negentropy_value(y.probs(), kind))
        }
    }
}

fn log_sum_exp(theta: &[f64]) -> f64 {
    let m = max_score(theta);
    m + theta.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// Fenchel-Young loss `L_Ω(βθ, y) = Ω(y) + Ω*(βθ) − βθᵀy`.
///
/// Non-negative, and zero (within tolerance) iff `y = ŷ_Ω(βθ)`. The
/// temperature scales the scores, never the negentropy.
pub fn fy_loss(theta: &[f64], y: &[f64], spec: &NegentropySpec) -> Result<f64> {
    if theta.len() != y.len() {
        return Err(Error::dimension(format!(
            "scores have {} entries but target has {}",
            theta.len(),
            y.len()
        )));
    }
    let scaled = scale(theta, spec.beta);
    fy_loss_base(&scaled, y, spec.kind)
}

/// Fenchel-Young loss of the base negentropy at already-scaled scores.
pub(crate) fn fy_loss_base(theta: &[f64], y: &[f64], kind: NegentropyKind) -> Result<f64> {
    let inner: f64 = theta.iter().zip(y).map(|(t, p)| t * p).sum();
    Ok(negentropy_value(y, kind) + conjugate_value(theta, kind)? - inner)
}

/// Separation margin of the Fenchel-Young loss: `1/(α−1)` for Tsallis with
/// α > 1, `1` for the norm family independent of γ, and none for Shannon
/// (cross-entropy never reaches zero).
pub fn margin_of(kind: NegentropyKind) -> Option<f64> {
    match kind {
        NegentropyKind::Shannon => None,
        NegentropyKind::Tsallis { alpha } => {
            if alpha > 1.0 {
                Some(1.0 / (alpha - 1.0))
            } else {
                None
            }
        }
        NegentropyKind::Norm { .. } => Some(1.0),
    }
}
