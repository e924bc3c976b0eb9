//! Brute-force reference solvers for validating the fast implementations.
//!
//! Everything here trades efficiency for independence: no sort-threshold
//! shortcuts, no bisections, no active sets. The solvers either enumerate
//! candidate solution structures exhaustively or search a refined grid, so
//! they can serve as oracles for the production code paths.
//!
//! Compiled only with the `bruteforce` feature; test-suite use only.

use crate::structured::Structure;

/// Maximizes `θᵀy − finalize(Σᵢ per_coord(yᵢ))` over the probability simplex
/// by multiscale grid search down to a final resolution of `1/final_denom`.
///
/// Each stage enumerates all simplex grid points inside a window of ±3 cells
/// of the previous stage's best point (the full simplex at the coarsest
/// stage), then halves the spacing. The objectives in play are strictly
/// concave, which keeps the true maximizer within a cell or two of each
/// stage's argmax.
pub fn grid_maximize(
    theta: &[f64],
    per_coord: impl Fn(f64) -> f64 + Copy,
    finalize: impl Fn(f64) -> f64 + Copy,
    final_denom: u64,
) -> Vec<f64> {
    let n = theta.len();
    assert!(n >= 1);
    if n == 1 {
        return vec![1.0];
    }
    let mut denom: u64 = 16;
    let mut center: Vec<u64> = vec![0; n]; // ignored on the first (full) pass
    let mut full = true;
    loop {
        let (lo, hi): (Vec<u64>, Vec<u64>) = if full {
            (vec![0; n], vec![denom; n])
        } else {
            let lo = center.iter().map(|&c| c.saturating_sub(6)).collect();
            let hi = center.iter().map(|&c| (c + 6).min(denom)).collect();
            (lo, hi)
        };
        let best = best_on_grid(theta, per_coord, finalize, denom, &lo, &hi);
        center = best;
        if denom >= final_denom {
            break;
        }
        denom *= 2;
        for c in &mut center {
            *c *= 2;
        }
        full = false;
    }
    center.iter().map(|&k| k as f64 / denom as f64).collect()
}

/// Exhaustive search over `{k ∈ ℕ^n : Σk = denom, lo ≤ k ≤ hi}` with the
/// objective accumulated along the recursion.
fn best_on_grid(
    theta: &[f64],
    per_coord: impl Fn(f64) -> f64 + Copy,
    finalize: impl Fn(f64) -> f64 + Copy,
    denom: u64,
    lo: &[u64],
    hi: &[u64],
) -> Vec<u64> {
    let n = theta.len();
    let inv = 1.0 / denom as f64;
    // Suffix sums of the per-coordinate bounds prune infeasible branches.
    let mut lo_suffix = vec![0u64; n + 1];
    let mut hi_suffix = vec![0u64; n + 1];
    for i in (0..n).rev() {
        lo_suffix[i] = lo_suffix[i + 1] + lo[i];
        hi_suffix[i] = hi_suffix[i + 1] + hi[i];
    }
    let mut best_val = f64::NEG_INFINITY;
    let mut best = vec![0u64; n];
    let mut current = vec![0u64; n];

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        i: usize,
        remaining: u64,
        linear: f64,
        reg_sum: f64,
        theta: &[f64],
        per_coord: &impl Fn(f64) -> f64,
        finalize: &impl Fn(f64) -> f64,
        inv: f64,
        lo: &[u64],
        hi: &[u64],
        lo_suffix: &[u64],
        hi_suffix: &[u64],
        current: &mut Vec<u64>,
        best_val: &mut f64,
        best: &mut Vec<u64>,
    ) {
        let n = theta.len();
        if i == n - 1 {
            if remaining < lo[i] || remaining > hi[i] {
                return;
            }
            let y = remaining as f64 * inv;
            let val = linear + theta[i] * y - finalize(reg_sum + per_coord(y));
            if val > *best_val {
                *best_val = val;
                current[i] = remaining;
                best.copy_from_slice(current);
            }
            return;
        }
        let min_k = lo[i].max(remaining.saturating_sub(hi_suffix[i + 1]));
        let max_k = hi[i].min(remaining.saturating_sub(lo_suffix[i + 1]));
        let mut k = min_k;
        while k <= max_k {
            let y = k as f64 * inv;
            current[i] = k;
            recurse(
                i + 1,
                remaining - k,
                linear + theta[i] * y,
                reg_sum + per_coord(y),
                theta,
                per_coord,
                finalize,
                inv,
                lo,
                hi,
                lo_suffix,
                hi_suffix,
                current,
                best_val,
                best,
            );
            k += 1;
        }
    }

    recurse(
        0,
        denom,
        0.0,
        0.0,
        theta,
        &per_coord,
        &finalize,
        inv,
        lo,
        hi,
        &lo_suffix,
        &hi_suffix,
        &mut current,
        &mut best_val,
        &mut best,
    );
    best
}

/// Grid oracle preset for the Tsallis negentropy.
pub fn grid_entmax(theta: &[f64], alpha: f64, final_denom: u64) -> Vec<f64> {
    grid_maximize(
        theta,
        move |y| y.powf(alpha),
        move |s| (s - 1.0) / (alpha * (alpha - 1.0)),
        final_denom,
    )
}

/// Grid oracle preset for the norm negentropy.
pub fn grid_normmax(theta: &[f64], gamma: f64, final_denom: u64) -> Vec<f64> {
    grid_maximize(
        theta,
        move |y| y.powf(gamma),
        move |s| s.powf(1.0 / gamma) - 1.0,
        final_denom,
    )
}

/// Exact sparsemax by support enumeration: for every nonempty support S,
/// solve the equality-constrained projection in closed form and keep the
/// best feasible candidate. Exponential in N.
pub fn sparsemax_qp(theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    assert!(n <= 20, "support enumeration is exponential");
    let mut best_val = f64::NEG_INFINITY;
    let mut best = vec![0.0; n];
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let sum: f64 = support.iter().map(|&i| theta[i]).sum();
        let tau = (sum - 1.0) / support.len() as f64;
        let mut y = vec![0.0; n];
        let mut feasible = true;
        for &i in &support {
            let v = theta[i] - tau;
            if v < -1e-12 {
                feasible = false;
                break;
            }
            y[i] = v.max(0.0);
        }
        if !feasible {
            continue;
        }
        let val = objective_quadratic(theta, &y);
        if val > best_val {
            best_val = val;
            best = y;
        }
    }
    best
}

/// Exact constrained sparsemax / capped-simplex projection by enumerating
/// the zero / free / clamped partition of every coordinate. `mass` is 1 for
/// the constrained sparsemax and k for the capped simplex (with u = 1).
pub fn box_simplex_qp(theta: &[f64], upper: &[f64], mass: f64) -> Vec<f64> {
    let n = theta.len();
    assert!(n <= 12, "partition enumeration is exponential");
    let mut best_val = f64::NEG_INFINITY;
    let mut best = vec![0.0; n];
    let mut assign = vec![0u8; n]; // 0 = zero, 1 = free, 2 = clamped
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| assign[i] == 1).collect();
        let clamped: Vec<usize> = (0..n).filter(|&i| assign[i] == 2).collect();
        let clamped_mass: f64 = clamped.iter().map(|&i| upper[i]).sum();
        let m_free = mass - clamped_mass;
        let mut y = vec![0.0; n];
        let mut feasible = m_free >= -1e-12;
        for &i in &clamped {
            y[i] = upper[i];
        }
        if feasible {
            if free.is_empty() {
                feasible = m_free.abs() <= 1e-9;
            } else {
                let sum: f64 = free.iter().map(|&i| theta[i]).sum();
                let tau = (sum - m_free) / free.len() as f64;
                for &i in &free {
                    let v = theta[i] - tau;
                    if v < -1e-12 || v > upper[i] + 1e-12 {
                        feasible = false;
                        break;
                    }
                    y[i] = v.clamp(0.0, upper[i]);
                }
            }
        }
        if feasible {
            let val = objective_quadratic(theta, &y);
            if val > best_val {
                best_val = val;
                best = y;
            }
        }
        // Next ternary assignment.
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            if assign[pos] < 2 {
                assign[pos] += 1;
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

fn objective_quadratic(theta: &[f64], y: &[f64]) -> f64 {
    theta.iter().zip(y).map(|(t, v)| t * v).sum::<f64>()
        - 0.5 * y.iter().map(|v| v * v).sum::<f64>()
}

/// SparseMAP reference: solves the QP over the full enumerated vertex set
/// with pairwise Frank-Wolfe and exact line search on the weight simplex,
/// run until no weight transfer improves the objective. Returns (unary
/// marginals, factor marginals, maximization objective).
pub fn qp_over_vertices(
    vertices: &[Structure],
    vertex_scores: &[f64],
    unary_dim: usize,
    factor_dim: usize,
) -> (Vec<f64>, Vec<f64>, f64) {
    let j = vertices.len();
    assert!(j >= 1);
    let unary: Vec<Vec<f64>> = vertices.iter().map(|s| s.unary_f64()).collect();
    // Gram matrix of the unary encodings.
    let mut gram = vec![vec![0.0; j]; j];
    for a in 0..j {
        for b in a..j {
            let dot: f64 = unary[a].iter().zip(&unary[b]).map(|(x, y)| x * y).sum();
            gram[a][b] = dot;
            gram[b][a] = dot;
        }
    }

    let fresh_grad = |w: &[f64]| -> Vec<f64> {
        (0..j)
            .map(|r| {
                gram[r].iter().zip(w).map(|(g, wi)| g * wi).sum::<f64>() - vertex_scores[r]
            })
            .collect()
    };

    let mut w = vec![1.0 / j as f64; j];
    let mut g = fresh_grad(&w);
    let scale = 1.0 + vertex_scores.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for step in 0..200_000usize {
        if step % 1024 == 1023 {
            g = fresh_grad(&w); // reset incremental drift
        }
        // Move mass from the worst in-support vertex to the best vertex.
        let mut best = 0;
        for r in 1..j {
            if g[r] < g[best] {
                best = r;
            }
        }
        let mut worst = usize::MAX;
        for r in 0..j {
            if w[r] > 0.0 && (worst == usize::MAX || g[r] > g[worst]) {
                worst = r;
            }
        }
        let pair_gap = g[worst] - g[best];
        if pair_gap <= 1e-14 * scale {
            break;
        }
        let curvature = gram[best][best] - 2.0 * gram[best][worst] + gram[worst][worst];
        let unconstrained = if curvature > 0.0 { pair_gap / curvature } else { f64::INFINITY };
        let delta = unconstrained.min(w[worst]);
        if delta <= 0.0 {
            break;
        }
        if delta == w[worst] {
            w[worst] = 0.0;
        } else {
            w[worst] -= delta;
        }
        w[best] += delta;
        for r in 0..j {
            g[r] += delta * (gram[r][best] - gram[r][worst]);
        }
    }

    let mut mu_v = vec![0.0; unary_dim];
    let mut mu_f = vec![0.0; factor_dim];
    for (s, &wi) in vertices.iter().zip(&w) {
        if wi == 0.0 {
            continue;
        }
        for (i, &b) in s.unary.iter().enumerate() {
            if b {
                mu_v[i] += wi;
            }
        }
        for (i, &b) in s.factor.iter().enumerate() {
            if b {
                mu_f[i] += wi;
            }
        }
    }
    let lin: f64 = w.iter().zip(vertex_scores).map(|(wi, s)| wi * s).sum();
    let sq: f64 = mu_v.iter().map(|v| v * v).sum();
    (mu_v, mu_f, lin - 0.5 * sq)
}
