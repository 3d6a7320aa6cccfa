//! α-discounted random walks and the statistical helpers built on them.
//!
//! Randomness comes from ChaCha8 streams: a query seed selects the key and
//! each independent consumer (Phase-I sampling, every Phase-III trial, ...)
//! gets its own stream number via [`stream_rng`]. Two consumers never share
//! a stream, so trials can run in any order or in parallel and still
//! reproduce bit-for-bit.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alias::AliasTable;
use crate::error::{check_alpha, PprError, Result};
use crate::graph::Graph;
use crate::scores::ScoreVector;
use crate::NodeId;

/// Stream used for Phase-I Monte Carlo.
pub const STREAM_PHASE_ONE: u64 = 0;

/// Stream for Phase-III trial `i` (0-based).
pub fn trial_stream(i: usize) -> u64 {
    1 + i as u64
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Walk simulator with step accounting.
#[derive(Debug, Clone)]
pub struct WalkEngine {
    alpha: f64,
    rng: ChaCha8Rng,
    steps: u64,
}

impl WalkEngine {
    pub fn new(alpha: f64, rng: ChaCha8Rng) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, rng, steps: 0 })
    }

    pub fn from_seed(alpha: f64, seed: u64, stream: u64) -> Result<Self> {
        Self::new(alpha, stream_rng(seed, stream))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Transitions taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Runs one walk from `s`. Termination is tested before every step, so
    /// the walk may stop at `s` without moving.
    #[inline]
    pub fn simulate_walk(&mut self, g: &Graph, s: NodeId) -> NodeId {
        let mut v = s;
        loop {
            if self.rng.random::<f64>() < self.alpha {
                return v;
            }
            let out = g.out_neighbors(v);
            v = out[self.rng.random_range(0..out.len())];
            self.steps += 1;
        }
    }
}

/// Monte Carlo estimate: terminal counts over `n_walks` walks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseEstimate {
    counts: HashMap<NodeId, u64>,
    n_walks: u64,
}

impl SparseEstimate {
    pub fn n_walks(&self) -> u64 {
        self.n_walks
    }

    #[inline]
    pub fn get(&self, v: NodeId) -> f64 {
        self.count(v) as f64 / self.n_walks as f64
    }

    #[inline]
    pub fn count(&self, v: NodeId) -> u64 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Entries sorted by node id.
    pub fn sorted(&self) -> Vec<(NodeId, u64)> {
        let mut v: Vec<(NodeId, u64)> = self.counts.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable();
        v
    }

    pub fn to_scores(&self) -> ScoreVector {
        self.sorted()
            .into_iter()
            .map(|(v, c)| (v, c as f64 / self.n_walks as f64))
            .collect()
    }
}

fn check_walks(n_walks: u64) -> Result<()> {
    if n_walks == 0 {
        return Err(PprError::arg("n_walks must be at least 1"));
    }
    Ok(())
}

pub fn monte_carlo(g: &Graph, s: NodeId, n_walks: u64, engine: &mut WalkEngine) -> Result<SparseEstimate> {
    g.check_node(s)?;
    check_walks(n_walks)?;
    let mut counts = HashMap::new();
    for _ in 0..n_walks {
        *counts.entry(engine.simulate_walk(g, s)).or_insert(0) += 1;
    }
    Ok(SparseEstimate { counts, n_walks })
}

/// Monte Carlo with the source of every walk drawn from `table`. A uniform
/// table estimates PageRank.
pub fn monte_carlo_from_distribution(
    g: &Graph,
    table: &AliasTable,
    n_walks: u64,
    engine: &mut WalkEngine,
) -> Result<SparseEstimate> {
    if table.len() != g.n() {
        return Err(PprError::arg(format!(
            "alias table has {} entries, graph has {} nodes",
            table.len(),
            g.n()
        )));
    }
    check_walks(n_walks)?;
    let mut counts = HashMap::new();
    for _ in 0..n_walks {
        let s = table.sample(engine.rng());
        *counts.entry(engine.simulate_walk(g, s)).or_insert(0) += 1;
    }
    Ok(SparseEstimate { counts, n_walks })
}

/// Lower median: the ⌈k/2⌉-th smallest of `k` values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(PprError::arg("median of an empty list"));
    }
    let mut buf = values.to_vec();
    let idx = values.len().div_ceil(2) - 1;
    let (_, m, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*m)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(PprError::arg("node count must be positive"));
    }
    Ok(())
}

/// Phase-I walk count ⌈12·ln(2n³)/ε⌉.
pub fn phase1_walk_count(n: usize, eps: f64) -> Result<u64> {
    check_n(n)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PprError::arg(format!("eps must be positive, got {eps}")));
    }
    let n = n as f64;
    Ok((12.0 * (2.0 * n * n * n).ln() / eps).ceil() as u64)
}

/// Median-trick trial count ⌈18·ln(2n²)⌉.
pub fn trial_count(n: usize) -> Result<usize> {
    check_n(n)?;
    let n = n as f64;
    Ok((18.0 * (2.0 * n * n).ln()).ceil() as usize)
}

/// Trials needed for failure probability `p_f`: ⌈18·ln(1/p_f)⌉.
pub fn trials_for_failure(p_f: f64) -> Result<usize> {
    if !(p_f > 0.0 && p_f < 1.0) {
        return Err(PprError::arg(format!("p_f must be in (0, 1), got {p_f}")));
    }
    Ok((18.0 * (1.0 / p_f).ln()).ceil() as usize)
}

/// Chernoff tail bound on `P[|X̄ − μ| ≥ λ]` for `k` independent samples in
/// `[0, r]` with mean `μ`.
pub fn chernoff_tail(lambda: f64, k: u64, mu: f64, r: f64) -> f64 {
    let k = k as f64;
    (2.0 * (-(lambda * lambda * k) / (2.0 * r * (mu + lambda / 3.0))).exp()).min(1.0)
}
