//! Single-source PPR query engines.
//!
//! Both engines run in three phases:
//!
//! 1. rough estimates π′(s,·) and a candidate set `C` of nodes that may need
//!    a nonzero answer (Monte Carlo for [`ssppr_a`], a single-target
//!    estimator from `s` plus degree symmetry for [`ssppr_d`]);
//! 2. Adaptive Backward Push: each `t ∈ C` gets a push threshold inversely
//!    proportional to π′(s,t), and the Phase-III walk count `n_r` is halved
//!    while the push work of an attempt stays within the cost of the walks
//!    it would save;
//! 3. `n_t` independent Monte Carlo trials with `n_r` walks each, combined
//!    with the push output through the push invariant, and a lower median
//!    over trials.

use serde::Serialize;

use crate::error::{check_alpha, PprError, Result};
use crate::graph::Graph;
use crate::oracle::{exact_ssppr, DEFAULT_TOL};
use crate::push::{backward_push, Budget, PushResult};
use crate::sampling::{
    median, monte_carlo, phase1_walk_count, trial_count, trial_stream, SparseEstimate, WalkEngine,
    STREAM_PHASE_ONE,
};
use crate::scores::ScoreVector;
use crate::NodeId;

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_FALLBACK_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryParams {
    pub alpha: f64,
    /// ε for [`ssppr_a`], ε_d for [`ssppr_d`].
    pub eps: f64,
    pub seed: u64,
    /// Push-cost units charged per walk step in the balancing rule.
    pub c_walk: f64,
    pub fallback_enabled: bool,
    /// Switch to the exact oracle once accounted cost would exceed
    /// `fallback_factor · n²`.
    pub fallback_factor: f64,
}

impl QueryParams {
    pub fn new(eps: f64) -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            eps,
            seed: 0,
            c_walk: 1.0,
            fallback_enabled: false,
            fallback_factor: DEFAULT_FALLBACK_FACTOR,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(PprError::arg(format!("error parameter must be positive, got {}", self.eps)));
        }
        if !(self.c_walk > 0.0) || !self.c_walk.is_finite() {
            return Err(PprError::arg(format!("c_walk must be positive, got {}", self.c_walk)));
        }
        if !(self.fallback_factor > 0.0) {
            return Err(PprError::arg("fallback factor must be positive"));
        }
        Ok(())
    }

    /// Budget currency: cost units charged for one simulated walk. A walk
    /// takes (1−α)/α steps on average; 1/α rounds that up.
    pub fn walk_cost(&self) -> f64 {
        self.c_walk / self.alpha
    }
}

/// Candidate targets with their Phase-I rough estimates π′(s,t), sorted by
/// node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    members: Vec<(NodeId, f64)>,
}

impl CandidateSet {
    pub fn from_members(mut members: Vec<(NodeId, f64)>) -> Self {
        members.sort_by_key(|&(v, _)| v);
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search_by_key(&v, |&(u, _)| u).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.members.iter().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().map(|&(v, _)| v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QueryDiagnostics {
    pub algorithm: &'static str,
    pub source: NodeId,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub eps: f64,
    pub seed: u64,
    pub c_walk: f64,
    pub phase1_walks: u64,
    pub phase1_steps: u64,
    pub phase1_push_cost: u64,
    pub candidates: usize,
    pub n_r_initial: u64,
    pub n_r: u64,
    pub n_t: usize,
    pub iterations: usize,
    pub budget_binding: bool,
    /// All Phase-II push work, including abandoned attempts.
    pub phase2_push_cost: u64,
    /// Push work of the final pass alone.
    pub phase2_final_push_cost: u64,
    pub phase3_walks: u64,
    pub phase3_steps: u64,
    /// Walk steps plus push cost units over all phases.
    pub accounted_cost: u64,
    pub trivial: bool,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnswer {
    /// π̂(s,t) for every candidate; absent nodes are zero.
    pub estimates: ScoreVector,
    pub candidates: CandidateSet,
    pub diagnostics: QueryDiagnostics,
}

impl QueryAnswer {
    pub fn estimate(&self, t: NodeId) -> f64 {
        self.estimates.get(t)
    }
}

/// π̂(s,t) = q(s,t) + Σ_v π″(s,v)·r(v,t), summed over nonzero residues.
pub fn combine_estimate(push: &PushResult, mc: &SparseEstimate, s: NodeId) -> f64 {
    let carried: f64 = push.residues.nonzero().map(|(v, r)| mc.get(v) * r).sum();
    push.reserve(s) + carried
}

/// Lower median of every per-target trial list.
pub fn median_trick_apply(trials: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = trials.first() else {
        return Ok(Vec::new());
    };
    let k = first.len();
    if trials.iter().any(|t| t.len() != k) {
        return Err(PprError::arg("trial lists must all have the same length"));
    }
    trials.iter().map(|t| median(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub alpha: f64,
    /// Initial Phase-III walk count.
    pub n_r0: u64,
    pub n_t: usize,
    /// Cost units charged per walk when sizing an attempt's budget.
    pub walk_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutcome {
    /// Final push results, aligned with the input targets.
    pub pushes: Vec<PushResult>,
    /// Final thresholds r_max(t), aligned with the input targets.
    pub r_max: Vec<f64>,
    pub n_r: u64,
    /// Completed (halving) iterations.
    pub iterations: usize,
    /// Whether the loop ended because an attempt ran out of budget (as
    /// opposed to `n_r` reaching its floor of 1).
    pub budget_binding: bool,
    /// Push cost over all attempts and the final pass.
    pub total_cost: u64,
    pub final_cost: u64,
}

/// Adaptive Backward Push over `targets`, given as `(t, initial r_max(t))`.
///
/// Each attempt pushes every target at half its current threshold under a
/// shared budget of `walk_cost · n_t · n_r / 2`. A completed attempt halves
/// `n_r` (floor) and every threshold; an exhausted budget ends the loop
/// without halving. `n_r` never drops below 1. The targets are then pushed
/// once more at the current thresholds with no budget.
pub fn adaptive_backward_push(
    g: &Graph,
    targets: &[(NodeId, f64)],
    cfg: AdaptiveConfig,
) -> Result<AdaptiveOutcome> {
    check_alpha(cfg.alpha)?;
    if cfg.n_r0 == 0 || cfg.n_t == 0 {
        return Err(PprError::arg("n_r0 and n_t must be positive"));
    }
    if !(cfg.walk_cost >= 0.0) {
        return Err(PprError::arg("walk_cost must be nonnegative"));
    }
    for &(t, r) in targets {
        g.check_node(t)?;
        if !(r > 0.0) || !r.is_finite() {
            return Err(PprError::arg(format!("threshold for node {t} must be positive and finite")));
        }
    }

    let mut r_max: Vec<f64> = targets.iter().map(|&(_, r)| r).collect();
    let mut n_r = cfg.n_r0;
    let mut iterations = 0;
    let mut total_cost = 0u64;
    let mut budget_binding = false;

    while !targets.is_empty() && n_r >= 2 {
        let mut budget = Budget::new(cfg.walk_cost * cfg.n_t as f64 * n_r as f64 / 2.0);
        let mut exhausted = false;
        for (&(t, _), &r) in targets.iter().zip(&r_max) {
            if !backward_push(g, cfg.alpha, t, r / 2.0, Some(&mut budget))?.is_completed() {
                exhausted = true;
                break;
            }
        }
        total_cost += budget.spent();
        if exhausted {
            budget_binding = true;
            break;
        }
        n_r /= 2;
        r_max.iter_mut().for_each(|r| *r /= 2.0);
        iterations += 1;
    }

    let mut pushes = Vec::with_capacity(targets.len());
    let mut final_cost = 0;
    for (&(t, _), &r) in targets.iter().zip(&r_max) {
        let res = backward_push(g, cfg.alpha, t, r, None)?.into_result();
        final_cost += res.cost;
        pushes.push(res);
    }
    total_cost += final_cost;

    Ok(AdaptiveOutcome {
        pushes,
        r_max,
        n_r,
        iterations,
        budget_binding,
        total_cost,
        final_cost,
    })
}

/// Phase I of [`ssppr_a`]: Monte Carlo with ⌈12·ln(2n³)/ε⌉ walks on the
/// Phase-I stream, and `C = {t : π′(s,t) > ε/2}`. Also returns the step count.
pub fn phase_one_monte_carlo(
    g: &Graph,
    s: NodeId,
    params: &QueryParams,
) -> Result<(SparseEstimate, CandidateSet, u64)> {
    let walks = phase1_walk_count(g.n(), params.eps)?;
    let mut engine = WalkEngine::from_seed(params.alpha, params.seed, STREAM_PHASE_ONE)?;
    let rough = monte_carlo(g, s, walks, &mut engine)?;
    let candidates = CandidateSet::from_members(
        rough
            .sorted()
            .into_iter()
            .map(|(v, c)| (v, c as f64 / walks as f64))
            .filter(|&(_, p)| p > params.eps / 2.0)
            .collect(),
    );
    Ok((rough, candidates, engine.steps()))
}

/// Output of a single-target estimator: π′(v,t) for all v, plus its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub values: ScoreVector,
    pub cost: u64,
}

/// Single-target PPR estimator with the relative/additive contract: with
/// probability at least `1 − p_f`, `|π′(v,t) − π(v,t)| ≤ eps_r·π(v,t)`
/// whenever `π(v,t) ≥ delta`, and `π′(v,t) ≤ π(v,t) + delta` otherwise.
pub trait TargetEstimator {
    fn estimate(
        &self,
        g: &Graph,
        alpha: f64,
        t: NodeId,
        eps_r: f64,
        delta: f64,
        p_f: f64,
    ) -> Result<TargetEstimate>;
}

/// Deterministic provider: Backward Push at `r_max = eps_r·delta`.
///
/// Push reserves are within `r_max` below the truth, which meets both
/// clauses of the contract with probability 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct PushTargetEstimator;

impl TargetEstimator for PushTargetEstimator {
    fn estimate(
        &self,
        g: &Graph,
        alpha: f64,
        t: NodeId,
        eps_r: f64,
        delta: f64,
        p_f: f64,
    ) -> Result<TargetEstimate> {
        if !(eps_r > 0.0 && eps_r < 1.0) {
            return Err(PprError::arg(format!("eps_r must be in (0, 1), got {eps_r}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(PprError::arg(format!("delta must be positive, got {delta}")));
        }
        if !(p_f > 0.0 && p_f < 1.0) {
            return Err(PprError::arg(format!("p_f must be in (0, 1), got {p_f}")));
        }
        let res = backward_push(g, alpha, t, eps_r * delta, None)?.into_result();
        Ok(TargetEstimate {
            values: res.reserves,
            cost: res.cost,
        })
    }
}

/// Single-target estimate on an undirected graph with the default provider.
pub fn rbs_estimate(
    g: &Graph,
    alpha: f64,
    t: NodeId,
    eps_r: f64,
    delta: f64,
    p_f: f64,
) -> Result<TargetEstimate> {
    require_undirected(g)?;
    PushTargetEstimator.estimate(g, alpha, t, eps_r, delta, p_f)
}

fn require_undirected(g: &Graph) -> Result<()> {
    if !g.is_undirected() {
        return Err(PprError::arg(
            "degree-normalized queries are defined on undirected graphs only",
        ));
    }
    Ok(())
}

/// Phase I of [`ssppr_d`]: π′(v,s) from the provider, mapped to π′(s,v) by
/// degree symmetry, and `C = {t : π′(s,t)/d(t) > ε_d/2}`. Also returns the
/// provider's cost.
pub fn phase_one_symmetric(
    g: &Graph,
    s: NodeId,
    params: &QueryParams,
    provider: &dyn TargetEstimator,
) -> Result<(ScoreVector, CandidateSet, u64)> {
    require_undirected(g)?;
    let n = g.n() as f64;
    let d_s = g.degree(s) as f64;
    let delta = params.eps * d_s / 4.0;
    // failure probability 1/n², kept inside (0, 1) for the one-node graph
    let p_f = 1.0 / (n * n).max(2.0);
    let reverse = provider.estimate(g, params.alpha, s, 0.5, delta, p_f)?;
    let rough: ScoreVector = reverse
        .values
        .nonzero()
        .map(|(v, x)| (v, x * g.degree(v) as f64 / d_s))
        .collect();
    let candidates = CandidateSet::from_members(
        rough
            .iter()
            .filter(|&(v, p)| p / g.degree(v) as f64 > params.eps / 2.0)
            .collect(),
    );
    Ok((rough, candidates, reverse.cost))
}

/// Absolute-error query: with probability at least `1 − 1/n`,
/// `max_t |π̂(s,t) − π(s,t)| ≤ ε`.
pub fn ssppr_a(g: &Graph, s: NodeId, params: &QueryParams) -> Result<QueryAnswer> {
    params.validate()?;
    g.check_node(s)?;
    let mut diag = base_diagnostics("ssppr-a", g, s, params);
    if params.eps >= 1.0 {
        diag.trivial = true;
        return Ok(empty_answer(diag));
    }

    let (_, candidates, steps) = phase_one_monte_carlo(g, s, params)?;
    diag.phase1_walks = phase1_walk_count(g.n(), params.eps)?;
    diag.phase1_steps = steps;
    let n_r0 = (g.n() as f64 / params.eps).ceil() as u64;
    let eps2 = params.eps * params.eps;
    let targets: Vec<(NodeId, f64)> = candidates
        .iter()
        .map(|(t, rough)| {
            debug_assert!(rough > 0.0);
            (t, eps2 * n_r0 as f64 / (6.0 * rough))
        })
        .collect();
    finish_query(g, s, params, candidates, targets, n_r0, diag)
}

/// Degree-normalized query on an undirected graph: with probability at
/// least `1 − 1/n`, `max_t |π̂(s,t) − π(s,t)|/d(t) ≤ ε_d`.
pub fn ssppr_d(g: &Graph, s: NodeId, params: &QueryParams) -> Result<QueryAnswer> {
    ssppr_d_with(g, s, params, &PushTargetEstimator)
}

pub fn ssppr_d_with(
    g: &Graph,
    s: NodeId,
    params: &QueryParams,
    provider: &dyn TargetEstimator,
) -> Result<QueryAnswer> {
    params.validate()?;
    require_undirected(g)?;
    g.check_node(s)?;
    let mut diag = base_diagnostics("ssppr-d", g, s, params);
    if params.eps >= 1.0 {
        diag.trivial = true;
        return Ok(empty_answer(diag));
    }

    let (_, candidates, cost) = phase_one_symmetric(g, s, params, provider)?;
    diag.phase1_push_cost = cost;
    let n_r0 = (g.n() as f64 / params.eps).ceil() as u64;
    let eps2 = params.eps * params.eps;
    let targets: Vec<(NodeId, f64)> = candidates
        .iter()
        .map(|(t, rough)| {
            debug_assert!(rough > 0.0);
            let d = g.degree(t) as f64;
            (t, d * d * eps2 * n_r0 as f64 / (6.0 * rough))
        })
        .collect();
    finish_query(g, s, params, candidates, targets, n_r0, diag)
}

fn base_diagnostics(algorithm: &'static str, g: &Graph, s: NodeId, params: &QueryParams) -> QueryDiagnostics {
    QueryDiagnostics {
        algorithm,
        source: s,
        n: g.n(),
        m: g.m(),
        alpha: params.alpha,
        eps: params.eps,
        seed: params.seed,
        c_walk: params.c_walk,
        ..Default::default()
    }
}

fn empty_answer(diagnostics: QueryDiagnostics) -> QueryAnswer {
    QueryAnswer {
        estimates: ScoreVector::new(),
        candidates: CandidateSet::default(),
        diagnostics,
    }
}

fn over_fallback_cap(g: &Graph, params: &QueryParams, cost: f64) -> bool {
    let n = g.n() as f64;
    params.fallback_enabled && cost > params.fallback_factor * n * n
}

fn fallback_answer(
    g: &Graph,
    s: NodeId,
    params: &QueryParams,
    candidates: CandidateSet,
    mut diag: QueryDiagnostics,
) -> Result<QueryAnswer> {
    let exact = exact_ssppr(g, s, params.alpha, DEFAULT_TOL)?;
    diag.fallback = true;
    diag.accounted_cost = accounted(&diag);
    Ok(QueryAnswer {
        estimates: exact.values.iter().copied().enumerate().filter(|&(_, x)| x > 0.0).collect(),
        candidates,
        diagnostics: diag,
    })
}

fn accounted(d: &QueryDiagnostics) -> u64 {
    d.phase1_steps + d.phase1_push_cost + d.phase2_push_cost + d.phase3_steps
}

/// Phases II and III shared by both engines.
fn finish_query(
    g: &Graph,
    s: NodeId,
    params: &QueryParams,
    candidates: CandidateSet,
    targets: Vec<(NodeId, f64)>,
    n_r0: u64,
    mut diag: QueryDiagnostics,
) -> Result<QueryAnswer> {
    let n_t = trial_count(g.n())?;
    diag.candidates = candidates.len();
    diag.n_r_initial = n_r0;
    diag.n_r = n_r0;
    diag.n_t = n_t;
    if candidates.is_empty() {
        diag.accounted_cost = accounted(&diag);
        return Ok(QueryAnswer {
            estimates: ScoreVector::new(),
            candidates,
            diagnostics: diag,
        });
    }
    if over_fallback_cap(g, params, accounted(&diag) as f64) {
        return fallback_answer(g, s, params, candidates, diag);
    }

    let cfg = AdaptiveConfig {
        alpha: params.alpha,
        n_r0,
        n_t,
        walk_cost: params.walk_cost(),
    };
    let adaptive = adaptive_backward_push(g, &targets, cfg)?;
    diag.n_r = adaptive.n_r;
    diag.iterations = adaptive.iterations;
    diag.budget_binding = adaptive.budget_binding;
    diag.phase2_push_cost = adaptive.total_cost;
    diag.phase2_final_push_cost = adaptive.final_cost;

    let planned = accounted(&diag) as f64 + params.walk_cost() * n_t as f64 * adaptive.n_r as f64;
    if over_fallback_cap(g, params, planned) {
        return fallback_answer(g, s, params, candidates, diag);
    }

    let mut trials: Vec<Vec<f64>> = vec![Vec::with_capacity(n_t); adaptive.pushes.len()];
    let mut steps = 0;
    for i in 0..n_t {
        let mut engine = WalkEngine::from_seed(params.alpha, params.seed, trial_stream(i))?;
        let mc = monte_carlo(g, s, adaptive.n_r, &mut engine)?;
        steps += engine.steps();
        for (per_t, push) in trials.iter_mut().zip(&adaptive.pushes) {
            per_t.push(combine_estimate(push, &mc, s));
        }
    }
    diag.phase3_walks = n_t as u64 * adaptive.n_r;
    diag.phase3_steps = steps;
    diag.accounted_cost = accounted(&diag);

    let medians = median_trick_apply(&trials)?;
    let estimates = candidates.nodes().zip(medians).collect();
    Ok(QueryAnswer {
        estimates,
        candidates,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_power_law, generate_random, Mode};
    use crate::oracle::exact_ssppr;
    use crate::sampling::stream_rng;

    fn self_loop() -> Graph {
        Graph::from_arcs(1, [(0, 0)], Mode::Undirected).unwrap()
    }

    fn two_cycle() -> Graph {
        Graph::from_arcs(2, [(0, 1)], Mode::Undirected).unwrap()
    }

    #[test]
    fn single_node_is_exact() {
        let g = self_loop();
        for eps in [0.5, 0.1, 0.01] {
            let a = ssppr_a(&g, 0, &QueryParams::new(eps).with_seed(3)).unwrap();
            assert!((a.estimate(0) - 1.0).abs() < 1e-12);
            let d = ssppr_d(&g, 0, &QueryParams::new(eps).with_seed(3)).unwrap();
            assert!((d.estimate(0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_eps_returns_zero_answer() {
        let g = two_cycle();
        let a = ssppr_a(&g, 0, &QueryParams::new(1.0)).unwrap();
        assert!(a.estimates.is_empty());
        assert!(a.diagnostics.trivial);
        assert_eq!(a.diagnostics.accounted_cost, 0);
    }

    #[test]
    fn directed_input_rejected_for_degree_normalized() {
        let g = Graph::from_arcs(2, [(0, 1), (1, 0)], Mode::Directed).unwrap();
        let err = ssppr_d(&g, 0, &QueryParams::new(0.1)).unwrap_err();
        assert!(matches!(err, PprError::InvalidArgument(_)));
    }

    #[test]
    fn parameter_validation() {
        let g = two_cycle();
        assert!(ssppr_a(&g, 0, &QueryParams::new(0.0)).is_err());
        assert!(ssppr_a(&g, 0, &QueryParams::new(0.1).with_alpha(1.0)).is_err());
        assert!(ssppr_a(&g, 7, &QueryParams::new(0.1)).is_err());
        let mut p = QueryParams::new(0.1);
        p.c_walk = 0.0;
        assert!(ssppr_a(&g, 0, &p).is_err());
    }

    #[test]
    fn two_cycle_answer_within_eps() {
        let g = two_cycle();
        let pi = exact_ssppr(&g, 0, 0.2, 1e-12).unwrap();
        for seed in 0..20 {
            let ans = ssppr_a(&g, 0, &QueryParams::new(0.05).with_seed(seed)).unwrap();
            for t in 0..2 {
                assert!((ans.estimate(t) - pi.get(t)).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn support_is_within_candidates_and_nonnegative() {
        let g = generate_power_law(200, 3, 5).unwrap();
        let ans = ssppr_a(&g, 0, &QueryParams::new(0.02).with_seed(9)).unwrap();
        for (v, x) in ans.estimates.iter() {
            assert!(ans.candidates.contains(v));
            assert!(x >= 0.0);
        }
        let d = &ans.diagnostics;
        assert_eq!(
            d.accounted_cost,
            d.phase1_steps + d.phase1_push_cost + d.phase2_push_cost + d.phase3_steps
        );
        assert_eq!(d.phase3_walks, d.n_t as u64 * d.n_r);
    }

    #[test]
    fn query_is_deterministic() {
        let g = generate_power_law(150, 3, 2).unwrap();
        let p = QueryParams::new(0.03).with_seed(44);
        assert_eq!(ssppr_a(&g, 1, &p).unwrap(), ssppr_a(&g, 1, &p).unwrap());
        assert_eq!(ssppr_d(&g, 1, &p).unwrap(), ssppr_d(&g, 1, &p).unwrap());
    }

    #[test]
    fn combine_degenerate_cases() {
        let g = generate_random(12, 2, Mode::Directed, 1).unwrap();
        let mut e = WalkEngine::new(0.2, stream_rng(1, 0)).unwrap();
        let mc = monte_carlo(&g, 0, 1000, &mut e).unwrap();
        let lazy = backward_push(&g, 0.2, 5, 1.0, None).unwrap().into_result();
        assert_eq!(combine_estimate(&lazy, &mc, 0), mc.get(5));
        let mut settled = lazy.clone();
        settled.residues = ScoreVector::new();
        settled.reserves.insert(0, 0.125);
        assert_eq!(combine_estimate(&settled, &mc, 0), 0.125);
    }

    #[test]
    fn median_trick_examples() {
        assert_eq!(median_trick_apply(&[vec![0.3; 7]]).unwrap(), vec![0.3]);
        assert_eq!(median_trick_apply(&[vec![0.42]]).unwrap(), vec![0.42]);
        assert!(median_trick_apply(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn unbounded_budget_halves_to_floor() {
        let g = generate_random(30, 3, Mode::Directed, 8).unwrap();
        let cfg = AdaptiveConfig {
            alpha: 0.2,
            n_r0: 1000,
            n_t: 10,
            walk_cost: 1e12,
        };
        let out = adaptive_backward_push(&g, &[(0, 50.0), (4, 10.0)], cfg).unwrap();
        assert_eq!(out.n_r, 1);
        assert!(!out.budget_binding);
        assert_eq!(out.iterations, 9);
        for (push, r) in out.pushes.iter().zip(&out.r_max) {
            assert!(push.residues.max_value() <= *r);
        }
    }

    #[test]
    fn zero_budget_breaks_immediately() {
        let g = generate_random(30, 3, Mode::Directed, 8).unwrap();
        let cfg = AdaptiveConfig {
            alpha: 0.2,
            n_r0: 640,
            n_t: 10,
            walk_cost: 0.0,
        };
        let fed: Vec<usize> = (0..30).filter(|&v| g.in_degree(v) > 0).take(2).collect();
        let out = adaptive_backward_push(&g, &[(fed[0], 0.5), (fed[1], 0.3)], cfg).unwrap();
        assert!(out.budget_binding);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.n_r, 640);
        assert_eq!(out.r_max, vec![0.5, 0.3]);
    }

    #[test]
    fn final_pass_matches_literal_rerun() {
        let g = generate_random(40, 3, Mode::Directed, 2).unwrap();
        let cfg = AdaptiveConfig {
            alpha: 0.2,
            n_r0: 4096,
            n_t: 5,
            walk_cost: 5.0,
        };
        let out = adaptive_backward_push(&g, &[(1, 20.0), (2, 30.0)], cfg).unwrap();
        for (push, (&t, &r)) in out.pushes.iter().zip([1usize, 2].iter().zip(&out.r_max)) {
            let again = backward_push(&g, 0.2, t, r, None).unwrap().into_result();
            assert_eq!(push, &again);
        }
    }

    #[test]
    fn empty_candidates_cost_nothing() {
        let g = generate_random(20, 2, Mode::Directed, 3).unwrap();
        let cfg = AdaptiveConfig {
            alpha: 0.2,
            n_r0: 100,
            n_t: 5,
            walk_cost: 5.0,
        };
        let out = adaptive_backward_push(&g, &[], cfg).unwrap();
        assert_eq!((out.n_r, out.total_cost, out.iterations), (100, 0, 0));
    }

    #[test]
    fn rbs_two_cycle() {
        let g = two_cycle();
        let est = rbs_estimate(&g, 0.2, 0, 0.5, 0.1, 0.01).unwrap();
        let col = crate::oracle::exact_stppr(&g, 0, 0.2, 1e-12).unwrap();
        for v in 0..2 {
            assert!((est.values.get(v) - col.get(v)).abs() <= 0.05);
        }
        // delta >= 1 still runs with r_max = eps_r * delta
        let wide = rbs_estimate(&g, 0.2, 0, 0.5, 4.0, 0.01).unwrap();
        assert_eq!(wide.cost, 0);
        assert!(rbs_estimate(&g, 0.2, 0, 1.5, 0.1, 0.01).is_err());
        let dir = Graph::from_arcs(2, [(0, 1), (1, 0)], Mode::Directed).unwrap();
        assert!(rbs_estimate(&dir, 0.2, 0, 0.5, 0.1, 0.01).is_err());
    }

    #[test]
    fn fallback_switches_to_oracle() {
        let g = generate_power_law(60, 2, 1).unwrap();
        let mut p = QueryParams::new(0.01).with_seed(1);
        p.fallback_enabled = true;
        p.fallback_factor = 1e-3;
        let ans = ssppr_a(&g, 0, &p).unwrap();
        assert!(ans.diagnostics.fallback);
        let pi = exact_ssppr(&g, 0, 0.2, DEFAULT_TOL).unwrap();
        assert!((ans.estimate(3) - pi.get(3)).abs() < 1e-12);
    }
}
