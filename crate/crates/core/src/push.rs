//! Local push algorithms.
//!
//! [`backward_push`] estimates the column π(·,t) for one target. After every
//! push the reserves `q` and residues `r` satisfy
//!
//! ```text
//! π(v,t) = q(v,t) + Σ_u π(v,u)·r(u,t)    for all v
//! ```
//!
//! and on completion every residue is at most `r_max`, which gives
//! `q(v,t) ≤ π(v,t) ≤ q(v,t) + r_max`. The cost counter counts in-neighbor
//! residue updates, one per arc scanned.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{check_alpha, PprError, Result};
use crate::graph::Graph;
use crate::oracle::{exact_ssppr, DenseScores};
use crate::scores::ScoreVector;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct PushResult {
    pub target: NodeId,
    pub r_max: f64,
    pub reserves: ScoreVector,
    /// Nonzero residues only.
    pub residues: ScoreVector,
    pub cost: u64,
}

impl PushResult {
    pub fn reserve(&self, v: NodeId) -> f64 {
        self.reserves.get(v)
    }

    pub fn residue(&self, v: NodeId) -> f64 {
        self.residues.get(v)
    }

    /// `# t=.. r_max=.. cost=..` header, then `node<TAB>q<TAB>r` by node id.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# t={} r_max={} cost={}\n", self.target, self.r_max, self.cost);
        let mut nodes: Vec<NodeId> = self
            .reserves
            .iter()
            .chain(self.residues.iter())
            .map(|(v, _)| v)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        for v in nodes {
            let _ = writeln!(out, "{v}\t{}\t{}", self.reserve(v), self.residue(v));
        }
        out
    }
}

/// Cost allowance shared by any number of push runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    limit: f64,
    spent: u64,
}

impl Budget {
    pub fn new(limit: f64) -> Self {
        Self { limit, spent: 0 }
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn exceeded(&self) -> bool {
        self.spent as f64 > self.limit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PushOutcome {
    Completed(PushResult),
    /// The shared budget ran out; carries the state after the last push.
    BudgetExceeded(PushResult),
}

impl PushOutcome {
    pub fn result(&self) -> &PushResult {
        match self {
            PushOutcome::Completed(r) | PushOutcome::BudgetExceeded(r) => r,
        }
    }

    pub fn into_result(self) -> PushResult {
        match self {
            PushOutcome::Completed(r) | PushOutcome::BudgetExceeded(r) => r,
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, PushOutcome::Completed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PushOrder {
    #[default]
    Fifo,
    Lifo,
}

fn check_threshold(r_max: f64) -> Result<()> {
    if !(r_max > 0.0) || r_max.is_nan() {
        return Err(PprError::arg(format!("r_max must be positive, got {r_max}")));
    }
    Ok(())
}

/// Backward Push from target `t` in FIFO order.
///
/// With a budget, the spent counter is checked after each completed push and
/// the run stops as soon as it exceeds the limit, so overshoot is at most one
/// node's in-degree.
pub fn backward_push(
    g: &Graph,
    alpha: f64,
    t: NodeId,
    r_max: f64,
    budget: Option<&mut Budget>,
) -> Result<PushOutcome> {
    backward_push_ordered(g, alpha, t, r_max, budget, PushOrder::Fifo)
}

pub fn backward_push_ordered(
    g: &Graph,
    alpha: f64,
    t: NodeId,
    r_max: f64,
    mut budget: Option<&mut Budget>,
    order: PushOrder,
) -> Result<PushOutcome> {
    check_alpha(alpha)?;
    check_threshold(r_max)?;
    g.check_node(t)?;

    let mut q: HashMap<NodeId, f64> = HashMap::new();
    let mut r: HashMap<NodeId, f64> = HashMap::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    let mut queued: HashSet<NodeId> = HashSet::new();
    let mut cost = 0u64;
    r.insert(t, 1.0);
    if 1.0 > r_max {
        queue.push_back(t);
        queued.insert(t);
    }

    let mut interrupted = false;
    loop {
        let next = match order {
            PushOrder::Fifo => queue.pop_front(),
            PushOrder::Lifo => queue.pop_back(),
        };
        let Some(v) = next else { break };
        queued.remove(&v);
        let Some(res) = r.insert(v, 0.0) else { continue };
        *q.entry(v).or_insert(0.0) += alpha * res;
        let spread = (1.0 - alpha) * res;
        let in_nbrs = g.in_neighbors(v);
        for &u in in_nbrs {
            let ru = r.entry(u).or_insert(0.0);
            *ru += spread / g.out_degree(u) as f64;
            if *ru > r_max && queued.insert(u) {
                queue.push_back(u);
            }
        }
        cost += in_nbrs.len() as u64;
        if let Some(b) = budget.as_deref_mut() {
            b.spent += in_nbrs.len() as u64;
            if b.exceeded() {
                interrupted = true;
                break;
            }
        }
    }

    let result = PushResult {
        target: t,
        r_max,
        reserves: q.into_iter().collect(),
        residues: r.into_iter().filter(|&(_, x)| x != 0.0).collect(),
        cost,
    };
    Ok(if interrupted {
        PushOutcome::BudgetExceeded(result)
    } else {
        PushOutcome::Completed(result)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPushResult {
    pub source: NodeId,
    pub r_max: f64,
    pub reserves: ScoreVector,
    pub residues: ScoreVector,
    /// Out-neighbor residue updates performed.
    pub cost: u64,
}

/// Forward Push from `s`: pushes while some `r(v) > r_max·d_out(v)`.
///
/// On undirected graphs the result satisfies
/// `|p(v)/d(v) − π(s,v)/d(v)| ≤ r_max` for every node.
pub fn forward_push(g: &Graph, alpha: f64, s: NodeId, r_max: f64) -> Result<ForwardPushResult> {
    check_alpha(alpha)?;
    check_threshold(r_max)?;
    g.check_node(s)?;

    let mut p: HashMap<NodeId, f64> = HashMap::new();
    let mut r: HashMap<NodeId, f64> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut queued = HashSet::new();
    let mut cost = 0u64;
    r.insert(s, 1.0);
    if 1.0 > r_max * g.out_degree(s) as f64 {
        queue.push_back(s);
        queued.insert(s);
    }
    while let Some(v) = queue.pop_front() {
        queued.remove(&v);
        let Some(res) = r.insert(v, 0.0) else { continue };
        *p.entry(v).or_insert(0.0) += alpha * res;
        let out = g.out_neighbors(v);
        let share = (1.0 - alpha) * res / out.len() as f64;
        for &u in out {
            let ru = r.entry(u).or_insert(0.0);
            *ru += share;
            if *ru > r_max * g.out_degree(u) as f64 && queued.insert(u) {
                queue.push_back(u);
            }
        }
        cost += out.len() as u64;
    }
    Ok(ForwardPushResult {
        source: s,
        r_max,
        reserves: p.into_iter().collect(),
        residues: r.into_iter().filter(|&(_, x)| x != 0.0).collect(),
        cost,
    })
}

/// `|π(v,t) − q(v,t) − Σ_u π(v,u)·r(u,t)|` given the exact row π(v,·).
pub fn invariant_deviation(result: &PushResult, v: NodeId, row: &DenseScores) -> f64 {
    let carried: f64 = result.residues.nonzero().map(|(u, x)| row.get(u) * x).sum();
    (row.get(result.target) - result.reserve(v) - carried).abs()
}

/// Maximum deviation from the push invariant over the sampled rows, using
/// the power-iteration oracle at tolerance `tol`.
pub fn verify_invariant(
    g: &Graph,
    alpha: f64,
    result: &PushResult,
    rows: &[NodeId],
    tol: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &v in rows {
        let row = exact_ssppr(g, v, alpha, tol)?;
        worst = worst.max(invariant_deviation(result, v, &row));
    }
    Ok(worst)
}
