//! Synthetic pattern generators and query corruption.

use hfy_core::energy::PatternMemory;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HarnessError, Result};

/// Synthetic pattern families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Uniform directions scaled to a common norm.
    Sphere,
    /// I.i.d. standard normal entries.
    Gaussian,
}

/// Rounds of violating-row resampling before giving up on a separation
/// request.
const REJECTION_BUDGET: usize = 500;

/// Samples N×D patterns; the sphere kind scales every row to norm `radius`.
/// When `min_separation` is set, rows violating `Δᵢ ≥ bound` are resampled
/// until the whole set qualifies (capacity error when the budget runs out).
pub fn synth_patterns(
    kind: SynthKind,
    n: usize,
    d: usize,
    radius: f64,
    min_separation: Option<f64>,
    seed: u64,
) -> Result<PatternMemory> {
    if n == 0 || d == 0 {
        return Err(HarnessError::config("patterns need n >= 1 and d >= 1"));
    }
    if kind == SynthKind::Sphere && (radius <= 0.0 || !radius.is_finite()) {
        return Err(HarnessError::config("sphere radius must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, d));
    for i in 0..n {
        sample_row(kind, &mut x, i, radius, &mut rng);
    }
    let mut mem = PatternMemory::new(x)?;
    if let Some(bound) = min_separation {
        for _ in 0..REJECTION_BUDGET {
            let deltas = mem.separations();
            let violators: Vec<usize> =
                (0..n).filter(|&i| deltas[i] < bound).collect();
            if violators.is_empty() {
                return Ok(mem);
            }
            let mut x = mem.matrix().clone();
            for &i in &violators {
                sample_row(kind, &mut x, i, radius, &mut rng);
            }
            mem = PatternMemory::new(x)?;
        }
        return Err(HarnessError::Config(format!(
            "could not reach min separation {bound} for n={n}, d={d} within {REJECTION_BUDGET} rounds"
        )));
    }
    Ok(mem)
}

fn sample_row(kind: SynthKind, x: &mut Array2<f64>, i: usize, radius: f64, rng: &mut ChaCha8Rng) {
    let d = x.ncols();
    loop {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if kind == SynthKind::Gaussian {
            for (j, v) in row.iter().enumerate() {
                x[[i, j]] = *v;
            }
            return;
        }
        if norm > 1e-12 {
            for (j, v) in row.iter().enumerate() {
                x[[i, j]] = radius * v / norm;
            }
            return;
        }
    }
}

/// Query corruption modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptMode {
    /// Additive Gaussian noise, then clipping to the pixel range [−1, 1].
    Gaussian { sigma: f64 },
    /// Zero a contiguous trailing block covering the given fraction (the
    /// bottom rows of a row-major image).
    Mask { fraction: f64 },
}

pub fn corrupt(q: &[f64], mode: CorruptMode, seed: u64) -> Vec<f64> {
    match mode {
        CorruptMode::Gaussian { sigma } => {
            if sigma == 0.0 {
                return q.to_vec();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            q.iter()
                .map(|&v| {
                    let g: f64 = rng.sample(StandardNormal);
                    (v + sigma * g).clamp(-1.0, 1.0)
                })
                .collect()
        }
        CorruptMode::Mask { fraction } => {
            let d = q.len();
            let keep = d - ((fraction * d as f64).round() as usize).min(d);
            let mut out = q.to_vec();
            for v in out.iter_mut().skip(keep) {
                *v = 0.0;
            }
            out
        }
    }
}

/// Additive Gaussian perturbation without clipping, for non-image data.
pub fn perturb(q: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return q.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    q.iter()
        .map(|&v| {
            let g: f64 = rng.sample(StandardNormal);
            v + sigma * g
        })
        .collect()
}
