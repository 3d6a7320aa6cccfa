//! Guarantee verification against the oracle and cost-scaling experiments.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::alias::AliasTable;
use crate::error::{PprError, Result};
use crate::graph::Graph;
use crate::oracle::{exact_ssppr, DenseScores, DEFAULT_TOL};
use crate::query::{ssppr_a, ssppr_d, QueryAnswer, QueryParams};
use crate::sampling::stream_rng;
use crate::NodeId;

pub const DEFAULT_ORACLE_CAP: usize = 2000;
/// Absorbs oracle tolerance when comparing errors against ε.
pub const ERROR_SLACK: f64 = 1e-12;
/// Stream reserved for drawing per-run sources.
const SOURCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    #[serde(rename = "a")]
    Absolute,
    #[serde(rename = "d")]
    DegreeNormalized,
}

impl Algorithm {
    pub fn run(self, g: &Graph, s: NodeId, params: &QueryParams) -> Result<QueryAnswer> {
        match self {
            Algorithm::Absolute => ssppr_a(g, s, params),
            Algorithm::DegreeNormalized => ssppr_d(g, s, params),
        }
    }

    /// Per-node error weight: 1 for absolute error, 1/d(t) otherwise.
    fn scale(self, g: &Graph, t: NodeId) -> f64 {
        match self {
            Algorithm::Absolute => 1.0,
            Algorithm::DegreeNormalized => 1.0 / g.degree(t) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSpec {
    Fixed(NodeId),
    Uniform,
    /// Probability proportional to degree, via an alias table.
    Degree,
    MaxDegree,
}

impl SourceSpec {
    /// Draws one source per run, deterministically from `seed`.
    pub fn draw(self, g: &Graph, runs: usize, seed: u64) -> Result<Vec<NodeId>> {
        let mut rng = stream_rng(seed, SOURCE_STREAM);
        Ok(match self {
            SourceSpec::Fixed(s) => {
                g.check_node(s)?;
                vec![s; runs]
            }
            SourceSpec::MaxDegree => {
                let s = (0..g.n()).max_by_key(|&v| (g.out_degree(v), std::cmp::Reverse(v))).unwrap();
                vec![s; runs]
            }
            SourceSpec::Uniform => (0..runs).map(|_| rng.random_range(0..g.n())).collect(),
            SourceSpec::Degree => {
                let weights: Vec<f64> = (0..g.n()).map(|v| g.out_degree(v) as f64).collect();
                let table = AliasTable::new(&weights)?;
                (0..runs).map(|_| table.sample(&mut rng)).collect()
            }
        })
    }
}

/// Worker count from `PPR_THREADS` (default 1).
pub fn threads_from_env() -> usize {
    std::env::var("PPR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| PprError::arg(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Ordinary least squares `y = a + b·x`; returns `(b, rms residual)`.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Some((slope, (rss / k).sqrt()))
}

/// Wilson score interval at ~95% confidence.
pub fn wilson_interval(failures: usize, runs: usize) -> (f64, f64) {
    if runs == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = runs as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Largest (possibly degree-normalized) absolute error of an answer.
pub fn max_error(g: &Graph, algorithm: Algorithm, answer: &QueryAnswer, exact: &DenseScores) -> f64 {
    (0..g.n())
        .map(|t| (answer.estimate(t) - exact.get(t)).abs() * algorithm.scale(g, t))
        .fold(0.0, f64::max)
}

/// Whether some non-candidate node has (normalized) exact value above ε.
pub fn missed_candidate(g: &Graph, algorithm: Algorithm, answer: &QueryAnswer, exact: &DenseScores, eps: f64) -> bool {
    if answer.diagnostics.fallback || answer.diagnostics.trivial {
        return false;
    }
    (0..g.n()).any(|t| !answer.candidates.contains(t) && exact.get(t) * algorithm.scale(g, t) > eps + ERROR_SLACK)
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub algorithm: Algorithm,
    pub source: SourceSpec,
    /// `params.seed` is the base seed; run `i` uses `seed + i`.
    pub params: QueryParams,
    pub runs: usize,
    pub oracle_cap: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub source: NodeId,
    pub max_error: f64,
    pub failed: bool,
    pub missed_candidate: bool,
    pub push_cost: u64,
    pub walk_steps: u64,
    pub accounted_cost: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub alpha: f64,
    pub runs: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub failure_ci95: (f64, f64),
    /// Failure probability the guarantee allows, 1/n.
    pub allowed_rate: f64,
    pub candidate_misses: usize,
    pub max_error: f64,
    pub mean_push_cost: f64,
    pub mean_walk_steps: f64,
    pub mean_accounted_cost: f64,
    pub note: String,
    pub records: Vec<RunRecord>,
}

/// Runs seeded queries and checks each against the oracle.
pub fn verify(g: &Graph, cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.runs == 0 {
        return Err(PprError::arg("runs must be at least 1"));
    }
    if g.n() > cfg.oracle_cap {
        return Err(PprError::arg(format!(
            "graph has {} nodes, above the oracle cap of {}; raise --oracle-cap or use a smaller graph",
            g.n(),
            cfg.oracle_cap
        )));
    }
    if cfg.algorithm == Algorithm::DegreeNormalized && !g.is_undirected() {
        return Err(PprError::arg("degree-normalized verification needs an undirected graph"));
    }
    cfg.params.validate()?;
    let sources = cfg.source.draw(g, cfg.runs, cfg.params.seed)?;
    let mut distinct: Vec<NodeId> = sources.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let alpha = cfg.params.alpha;
    let records = with_pool(cfg.threads, || -> Result<Vec<RunRecord>> {
        let oracles: HashMap<NodeId, DenseScores> = distinct
            .par_iter()
            .map(|&s| exact_ssppr(g, s, alpha, DEFAULT_TOL).map(|pi| (s, pi)))
            .collect::<Result<_>>()?;
        sources
            .par_iter()
            .enumerate()
            .map(|(i, &s)| {
                let seed = cfg.params.seed.wrapping_add(i as u64);
                let params = cfg.params.with_seed(seed);
                let answer = cfg.algorithm.run(g, s, &params)?;
                let exact = &oracles[&s];
                let err = max_error(g, cfg.algorithm, &answer, exact);
                let d = &answer.diagnostics;
                Ok(RunRecord {
                    seed,
                    source: s,
                    max_error: err,
                    failed: err > params.eps + ERROR_SLACK,
                    missed_candidate: missed_candidate(g, cfg.algorithm, &answer, exact, params.eps),
                    push_cost: d.phase1_push_cost + d.phase2_push_cost,
                    walk_steps: d.phase1_steps + d.phase3_steps,
                    accounted_cost: d.accounted_cost,
                })
            })
            .collect()
    })??;

    let runs = records.len();
    let failures = records.iter().filter(|r| r.failed).count();
    let mean = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).sum::<f64>() / runs as f64;
    let allowed = 1.0 / g.n() as f64;
    let rate = failures as f64 / runs as f64;
    let note = if rate <= allowed {
        format!("observed failure rate {rate:.4} within the 1/n = {allowed:.4} guarantee")
    } else {
        format!("observed failure rate {rate:.4} exceeds 1/n = {allowed:.4}; check the CI before drawing conclusions")
    };
    Ok(VerifyReport {
        algorithm: cfg.algorithm,
        n: g.n(),
        m: g.m(),
        eps: cfg.params.eps,
        alpha,
        runs,
        failures,
        failure_rate: rate,
        failure_ci95: wilson_interval(failures, runs),
        allowed_rate: allowed,
        candidate_misses: records.iter().filter(|r| r.missed_candidate).count(),
        max_error: records.iter().map(|r| r.max_error).fold(0.0, f64::max),
        mean_push_cost: mean(&|r| r.push_cost as f64),
        mean_walk_steps: mean(&|r| r.walk_steps as f64),
        mean_accounted_cost: mean(&|r| r.accounted_cost as f64),
        note,
        records,
    })
}

#[derive(Debug, Clone)]
pub struct ScaleGraph {
    pub label: String,
    pub graph: Graph,
}

#[derive(Debug, Clone)]
pub struct ScaleConfig {
    pub algorithm: Algorithm,
    pub eps_grid: Vec<f64>,
    pub seeds: usize,
    pub source: SourceSpec,
    /// `eps` is ignored; every cell sets its own.
    pub params: QueryParams,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleCell {
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub runs: usize,
    pub mean_cost: f64,
    pub mean_push_cost: f64,
    pub mean_walk_steps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    /// Graph label (for cost vs 1/ε) or ε value (for cost vs m).
    pub fixed: String,
    pub slope: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleReport {
    pub algorithm: Algorithm,
    pub cells: Vec<ScaleCell>,
    /// log(cost) vs log(1/ε) at fixed graph.
    pub eps_slopes: Vec<SlopeFit>,
    /// log(cost) vs log(m) at fixed ε.
    pub m_slopes: Vec<SlopeFit>,
}

impl ScaleReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph,n,m,eps,runs,mean_cost,mean_push_cost,mean_walk_steps\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.graph, c.n, c.m, c.eps, c.runs, c.mean_cost, c.mean_push_cost, c.mean_walk_steps
            ));
        }
        out
    }
}

/// Measures mean accounted cost over a (graph × ε) grid and fits log-log
/// slopes. Slopes are reported only where at least two cells line up.
pub fn scale(graphs: &[ScaleGraph], cfg: &ScaleConfig) -> Result<ScaleReport> {
    if cfg.seeds == 0 {
        return Err(PprError::arg("seeds must be at least 1"));
    }
    if graphs.is_empty() || cfg.eps_grid.is_empty() {
        return Err(PprError::arg("scale needs at least one graph and one eps value"));
    }
    let mut jobs = Vec::new();
    for (gi, sg) in graphs.iter().enumerate() {
        let sources = cfg.source.draw(&sg.graph, cfg.seeds, cfg.params.seed)?;
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            for (k, &s) in sources.iter().enumerate() {
                jobs.push((gi, ei, s, cfg.params.seed.wrapping_add(k as u64), eps));
            }
        }
    }
    let diags = with_pool(cfg.threads, || -> Result<Vec<_>> {
        jobs.par_iter()
            .map(|&(gi, _, s, seed, eps)| {
                let mut params = cfg.params.with_seed(seed);
                params.eps = eps;
                cfg.algorithm.run(&graphs[gi].graph, s, &params).map(|a| a.diagnostics)
            })
            .collect()
    })??;

    let mut cells = Vec::new();
    for (gi, sg) in graphs.iter().enumerate() {
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            let ds: Vec<_> = jobs
                .iter()
                .zip(&diags)
                .filter(|((g, e, ..), _)| *g == gi && *e == ei)
                .map(|(_, d)| d)
                .collect();
            let k = ds.len() as f64;
            cells.push(ScaleCell {
                graph: sg.label.clone(),
                n: sg.graph.n(),
                m: sg.graph.m(),
                eps,
                runs: ds.len(),
                mean_cost: ds.iter().map(|d| d.accounted_cost as f64).sum::<f64>() / k,
                mean_push_cost: ds.iter().map(|d| (d.phase1_push_cost + d.phase2_push_cost) as f64).sum::<f64>() / k,
                mean_walk_steps: ds.iter().map(|d| (d.phase1_steps + d.phase3_steps) as f64).sum::<f64>() / k,
            });
        }
    }

    let fit = |fixed: String, pts: Vec<(f64, f64)>| {
        least_squares(&pts).map(|(slope, residual)| SlopeFit {
            fixed,
            slope,
            residual,
            points: pts.len(),
        })
    };
    let positive = |c: &&ScaleCell| c.mean_cost > 0.0;
    let eps_slopes = graphs
        .iter()
        .filter_map(|sg| {
            let pts = cells
                .iter()
                .filter(|c| c.graph == sg.label)
                .filter(positive)
                .map(|c| ((1.0 / c.eps).ln(), c.mean_cost.ln()))
                .collect();
            fit(sg.label.clone(), pts)
        })
        .collect();
    let m_slopes = cfg
        .eps_grid
        .iter()
        .filter_map(|&eps| {
            let pts = cells
                .iter()
                .filter(|c| c.eps == eps)
                .filter(positive)
                .map(|c| ((c.m as f64).ln(), c.mean_cost.ln()))
                .collect();
            fit(eps.to_string(), pts)
        })
        .collect();

    Ok(ScaleReport {
        algorithm: cfg.algorithm,
        cells,
        eps_slopes,
        m_slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_power_law, Mode};

    #[test]
    fn least_squares_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (slope, rms) = least_squares(&pts).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!(rms < 1e-12);
        assert!(least_squares(&pts[..1]).is_none());
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 200);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.03);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn verify_two_cycle() {
        let g = Graph::from_arcs(2, [(0, 1)], Mode::Undirected).unwrap();
        let cfg = VerifyConfig {
            algorithm: Algorithm::Absolute,
            source: SourceSpec::Fixed(0),
            params: QueryParams::new(0.05).with_seed(1),
            runs: 200,
            oracle_cap: DEFAULT_ORACLE_CAP,
            threads: 2,
        };
        let report = verify(&g, &cfg).unwrap();
        assert_eq!(report.runs, 200);
        assert!(report.failures <= 1, "{}", report.failures);
        assert!(report.failures <= report.runs);
    }

    #[test]
    fn verify_refuses_directed_for_d_and_large_graphs() {
        let g = Graph::from_arcs(2, [(0, 1), (1, 0)], Mode::Directed).unwrap();
        let mut cfg = VerifyConfig {
            algorithm: Algorithm::DegreeNormalized,
            source: SourceSpec::Fixed(0),
            params: QueryParams::new(0.05),
            runs: 3,
            oracle_cap: DEFAULT_ORACLE_CAP,
            threads: 1,
        };
        assert!(matches!(verify(&g, &cfg), Err(PprError::InvalidArgument(_))));
        cfg.algorithm = Algorithm::Absolute;
        cfg.oracle_cap = 1;
        assert!(matches!(verify(&g, &cfg), Err(PprError::InvalidArgument(_))));
    }

    #[test]
    fn verify_is_thread_count_independent() {
        let g = generate_power_law(80, 2, 4).unwrap();
        let mut cfg = VerifyConfig {
            algorithm: Algorithm::DegreeNormalized,
            source: SourceSpec::Degree,
            params: QueryParams::new(0.05).with_seed(10),
            runs: 6,
            oracle_cap: DEFAULT_ORACLE_CAP,
            threads: 1,
        };
        let a = serde_json::to_string(&verify(&g, &cfg).unwrap()).unwrap();
        cfg.threads = 3;
        let b = serde_json::to_string(&verify(&g, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scale_reports_slopes() {
        let graphs: Vec<ScaleGraph> = [100, 200]
            .iter()
            .map(|&n| ScaleGraph {
                label: format!("pl{n}"),
                graph: generate_power_law(n, 2, 1).unwrap(),
            })
            .collect();
        let cfg = ScaleConfig {
            algorithm: Algorithm::Absolute,
            eps_grid: vec![0.1, 0.05],
            seeds: 3,
            source: SourceSpec::Fixed(0),
            params: QueryParams::new(0.1),
            threads: 1,
        };
        let report = scale(&graphs, &cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert!(report.cells.iter().all(|c| c.mean_cost > 0.0));
        assert_eq!(report.eps_slopes.len(), 2);
        assert_eq!(report.m_slopes.len(), 2);
        assert_eq!(report.to_csv().lines().count(), 5);
    }

    #[test]
    fn source_draws() {
        let g = generate_power_law(50, 2, 3).unwrap();
        let hub = SourceSpec::MaxDegree.draw(&g, 2, 0).unwrap();
        assert_eq!(g.degree(hub[0]), g.max_degree());
        assert_eq!(SourceSpec::Degree.draw(&g, 5, 1).unwrap(), SourceSpec::Degree.draw(&g, 5, 1).unwrap());
        assert!(SourceSpec::Fixed(99).draw(&g, 1, 0).is_err());
    }
}
