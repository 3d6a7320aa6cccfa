//! Exact PPR by truncated power iteration.
//!
//! After `K` rounds the truncated series misses exactly `(1-α)^K` of the
//! termination mass, so `K = ⌈ln(tol)/ln(1-α)⌉` bounds the L1 error by `tol`.

use serde::Serialize;

use crate::error::{check_alpha, PprError, Result};
use crate::graph::Graph;
use crate::NodeId;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseScores {
    pub values: Vec<f64>,
    /// Source node for a single-source vector, target node for a column.
    pub anchor: NodeId,
    pub alpha: f64,
    /// Upper bound on the L1 mass not represented in `values`.
    pub residual_l1: f64,
}

impl DenseScores {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, v: NodeId) -> f64 {
        self.values[v]
    }
}

fn iterations_for(alpha: f64, tol: f64) -> usize {
    (tol.ln() / (1.0 - alpha).ln()).ceil().max(1.0) as usize
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(PprError::arg(format!("tol must be in (0, 1), got {tol}")));
    }
    Ok(())
}

/// π(s,·) accurate to `tol` in L1.
pub fn exact_ssppr(g: &Graph, s: NodeId, alpha: f64, tol: f64) -> Result<DenseScores> {
    check_alpha(alpha)?;
    check_tol(tol)?;
    g.check_node(s)?;
    let n = g.n();
    let rounds = iterations_for(alpha, tol);
    // `walk` holds the distribution of a non-terminated walk after k steps
    // scaled by (1-α)^k.
    let mut walk = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut pi = vec![0.0; n];
    walk[s] = 1.0;
    let mut alive = 1.0;
    for _ in 0..rounds {
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            let mass = walk[u];
            if mass == 0.0 {
                continue;
            }
            pi[u] += alpha * mass;
            let share = (1.0 - alpha) * mass / g.out_degree(u) as f64;
            for &v in g.out_neighbors(u) {
                next[v] += share;
            }
        }
        alive *= 1.0 - alpha;
        std::mem::swap(&mut walk, &mut next);
    }
    Ok(DenseScores {
        values: pi,
        anchor: s,
        alpha,
        residual_l1: alive,
    })
}

/// Column π(·,t), every entry within `tol / n`, so the column is within
/// `tol` in L1.
pub fn exact_stppr(g: &Graph, t: NodeId, alpha: f64, tol: f64) -> Result<DenseScores> {
    check_alpha(alpha)?;
    check_tol(tol)?;
    g.check_node(t)?;
    let n = g.n();
    let rounds = iterations_for(alpha, tol / n as f64);
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..rounds {
        for v in 0..n {
            let out = g.out_neighbors(v);
            let avg: f64 = out.iter().map(|&u| x[u]).sum::<f64>() / out.len() as f64;
            next[v] = (1.0 - alpha) * avg + if v == t { alpha } else { 0.0 };
        }
        std::mem::swap(&mut x, &mut next);
    }
    let residual = (1.0 - alpha).powi(rounds as i32) * n as f64;
    Ok(DenseScores {
        values: x,
        anchor: t,
        alpha,
        residual_l1: residual,
    })
}

/// ‖π − α·e_s − (1−α)·πP‖₁ for a single-source vector.
pub fn recurrence_residual(g: &Graph, scores: &DenseScores) -> f64 {
    let n = g.n();
    let alpha = scores.alpha;
    let mut rhs = vec![0.0; n];
    rhs[scores.anchor] = alpha;
    for u in 0..n {
        let share = (1.0 - alpha) * scores.values[u] / g.out_degree(u) as f64;
        for &v in g.out_neighbors(u) {
            rhs[v] += share;
        }
    }
    rhs.iter()
        .zip(&scores.values)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    /// Mean fitted exponent γ̂ (negated log-log slope of sorted PPR values).
    pub gamma: f64,
    /// Mean RMS residual of the per-source log-log fits.
    pub fit_residual: f64,
    /// Mean Σ_t π(v,t)² over sampled sources.
    pub mean_square_sum: f64,
    /// Mean max_t π(v,t) over sampled sources.
    pub mean_max: f64,
    pub sources: usize,
    /// γ̂ in (1/2, 1) with a fit residual below 0.5 (natural log units).
    pub looks_power_law: bool,
}

/// Fits the log-log profile of exact PPR vectors from sampled sources over
/// ranks `[10, n/10]`. Diagnostic only.
pub fn powerlaw_fit_diagnostic(
    g: &Graph,
    sample_sources: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerLawFit> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let n = g.n();
    if n < 100 {
        return Err(PprError::arg(format!("power-law fit needs n >= 100, got {n}")));
    }
    if sample_sources == 0 {
        return Err(PprError::arg("sample_sources must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gamma, mut resid, mut sq, mut mx) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..sample_sources {
        let v = rng.random_range(0..n);
        let pi = exact_ssppr(g, v, alpha, DEFAULT_TOL)?;
        let mut sorted = pi.values.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        sq += sorted.iter().map(|x| x * x).sum::<f64>();
        mx += sorted[0];
        let pts: Vec<(f64, f64)> = (10..=n / 10)
            .filter(|&rank| sorted[rank - 1] > 0.0)
            .map(|rank| ((rank as f64).ln(), sorted[rank - 1].ln()))
            .collect();
        let (slope, rms) = crate::harness::least_squares(&pts).unwrap_or((0.0, 0.0));
        gamma += -slope;
        resid += rms;
    }
    let k = sample_sources as f64;
    let gamma = gamma / k;
    let fit_residual = resid / k;
    Ok(PowerLawFit {
        gamma,
        fit_residual,
        mean_square_sum: sq / k,
        mean_max: mx / k,
        sources: sample_sources,
        looks_power_law: gamma > 0.5 && gamma < 1.0 && fit_residual < 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_power_law, generate_random, Mode};

    fn two_cycle() -> Graph {
        Graph::from_arcs(2, [(0, 1)], Mode::Undirected).unwrap()
    }

    #[test]
    fn self_loop_is_certain() {
        let g = Graph::from_arcs(1, [(0, 0)], Mode::Directed).unwrap();
        for alpha in [0.05, 0.2, 0.9] {
            let pi = exact_ssppr(&g, 0, alpha, 1e-12).unwrap();
            assert!((pi.get(0) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_cycle_closed_form() {
        let alpha = 0.2;
        let pi = exact_ssppr(&two_cycle(), 0, alpha, 1e-10).unwrap();
        assert!((pi.get(0) - 1.0 / (2.0 - alpha)).abs() <= 1e-10);
        assert!((pi.get(1) - (1.0 - alpha) / (2.0 - alpha)).abs() <= 1e-10);
        let col = exact_stppr(&two_cycle(), 0, alpha, 1e-10).unwrap();
        assert!((col.get(0) - 1.0 / (2.0 - alpha)).abs() <= 1e-10);
        assert!((col.get(1) - (1.0 - alpha) / (2.0 - alpha)).abs() <= 1e-10);
    }

    #[test]
    fn normalization_and_recurrence() {
        let g = generate_random(60, 3, Mode::Directed, 9).unwrap();
        let tol = 1e-10;
        for s in [0, 17, 59] {
            let pi = exact_ssppr(&g, s, 0.15, tol).unwrap();
            assert!((pi.sum() - 1.0).abs() <= tol);
            assert!(pi.sum() + pi.residual_l1 >= 1.0 - 1e-12);
            assert!(pi.residual_l1 <= tol);
            assert!(pi.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(recurrence_residual(&g, &pi) <= 2.0 * tol);
        }
    }

    #[test]
    fn column_matches_rows() {
        let g = generate_random(40, 2, Mode::Directed, 4).unwrap();
        let tol = 1e-10;
        let rows: Vec<DenseScores> = (0..g.n()).map(|v| exact_ssppr(&g, v, 0.2, tol).unwrap()).collect();
        for t in 0..g.n() {
            let col = exact_stppr(&g, t, 0.2, tol).unwrap();
            for v in 0..g.n() {
                assert!((col.get(v) - rows[v].get(t)).abs() <= 2.0 * tol);
            }
        }
    }

    #[test]
    fn star_column_consistent_with_rows() {
        let arcs: Vec<(usize, usize)> = (1..=5).map(|leaf| (0, leaf)).collect();
        let g = Graph::from_arcs(6, arcs, Mode::Undirected).unwrap();
        let col = exact_stppr(&g, 0, 0.2, 1e-10).unwrap();
        for v in 0..6 {
            let row = exact_ssppr(&g, v, 0.2, 1e-10).unwrap();
            assert!((col.get(v) - row.get(0)).abs() <= 2e-10);
        }
        // a leaf's first step always reaches the center
        assert!(col.get(1) >= 0.8 * 0.2);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = two_cycle();
        assert!(exact_ssppr(&g, 5, 0.2, 1e-10).is_err());
        assert!(exact_ssppr(&g, 0, 1.0, 1e-10).is_err());
        assert!(exact_ssppr(&g, 0, 0.2, 0.0).is_err());
    }

    #[test]
    fn ring_is_not_power_law() {
        let arcs: Vec<(usize, usize)> = (0..1000).map(|v| (v, (v + 1) % 1000)).collect();
        let g = Graph::from_arcs(1000, arcs, Mode::Undirected).unwrap();
        let fit = powerlaw_fit_diagnostic(&g, 3, 0.2, 1).unwrap();
        assert!(!fit.looks_power_law, "{fit:?}");
        assert!(fit.mean_square_sum <= fit.mean_max && fit.mean_max <= 1.0);
    }

    #[test]
    fn power_law_fit_reports() {
        let g = generate_power_law(2000, 4, 3).unwrap();
        let fit = powerlaw_fit_diagnostic(&g, 4, 0.2, 2).unwrap();
        assert!(fit.gamma.is_finite() && fit.fit_residual.is_finite());
        assert!(fit.mean_square_sum <= fit.mean_max && fit.mean_max <= 1.0);
    }

    #[test]
    fn fit_refuses_small_graphs() {
        assert!(powerlaw_fit_diagnostic(&two_cycle(), 1, 0.2, 0).is_err());
    }
}
