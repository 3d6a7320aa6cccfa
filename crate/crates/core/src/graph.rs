//! Immutable CSR graph with both adjacency directions.
//!
//! Undirected graphs are stored as two opposing arcs per edge, so the walk
//! and push code never needs to distinguish the two cases. Every node must
//! have at least one out-arc; a walk therefore always has a next step.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PprError, Result};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Directed,
    Undirected,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Directed => "d",
            Mode::Undirected => "u",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    mode: Mode,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
    external_ids: Vec<u64>,
    dense_ids: HashMap<u64, NodeId>,
}

/// Equality is over external ids; the dense numbering is not compared.
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.n() == other.n()
            && self.m() == other.m()
            && self.canonical_arcs() == other.canonical_arcs()
    }
}

impl Graph {
    /// Builds a graph over dense ids `0..n` with identity external ids.
    ///
    /// Duplicate arcs are collapsed. In undirected mode each pair is
    /// materialized in both directions; a self-loop stays a single arc.
    pub fn from_arcs<I>(n: usize, arcs: I, mode: Mode) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        Self::build(n, arcs, mode, (0..n as u64).collect())
    }

    fn build<I>(n: usize, arcs: I, mode: Mode, external_ids: Vec<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n == 0 {
            return Err(PprError::Validation("graph has no nodes".into()));
        }
        debug_assert_eq!(external_ids.len(), n);
        let mut list: Vec<(NodeId, NodeId)> = Vec::new();
        for (u, v) in arcs {
            if u >= n || v >= n {
                return Err(PprError::arg(format!("arc ({u}, {v}) out of range for n={n}")));
            }
            list.push((u, v));
            if mode == Mode::Undirected && u != v {
                list.push((v, u));
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut out_offsets = vec![0usize; n + 1];
        for &(u, _) in &list {
            out_offsets[u + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        let out_targets: Vec<NodeId> = list.iter().map(|&(_, v)| v).collect();

        let mut in_offsets = vec![0usize; n + 1];
        for &(_, v) in &list {
            in_offsets[v + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut cursor = in_offsets.clone();
        let mut in_sources = vec![0; list.len()];
        // `list` is sorted by source, so every in-list comes out sorted too.
        for &(u, v) in &list {
            in_sources[cursor[v]] = u;
            cursor[v] += 1;
        }

        let dense_ids = external_ids
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i))
            .collect();
        let g = Graph {
            mode,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            external_ids,
            dense_ids,
        };
        if let Some(v) = (0..n).find(|&v| g.out_degree(v) == 0) {
            return Err(PprError::Validation(format!(
                "node {} has out-degree 0",
                g.external_ids[v]
            )));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.external_ids.len()
    }

    /// Number of arcs; an undirected edge counts twice, a self-loop once.
    pub fn m(&self) -> usize {
        self.out_targets.len()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_undirected(&self) -> bool {
        self.mode == Mode::Undirected
    }

    #[inline]
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    #[inline]
    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    #[inline]
    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    /// Degree of an undirected node (equal to its out-degree).
    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.out_degree(v)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.out_degree(v)).max().unwrap_or(0)
    }

    pub fn external_id(&self, v: NodeId) -> u64 {
        self.external_ids[v]
    }

    pub fn dense_id(&self, external: u64) -> Option<NodeId> {
        self.dense_ids.get(&external).copied()
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v >= self.n() {
            return Err(PprError::arg(format!("node {v} out of range (n={})", self.n())));
        }
        Ok(())
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n()).flat_map(move |u| self.out_neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Arc set in external ids, sorted; independent of dense numbering.
    pub fn canonical_arcs(&self) -> Vec<(u64, u64)> {
        let mut arcs: Vec<(u64, u64)> = self
            .arcs()
            .map(|(u, v)| (self.external_ids[u], self.external_ids[v]))
            .collect();
        arcs.sort_unstable();
        arcs
    }
}

/// Parses a whitespace-separated edge list. Lines starting with `#` and
/// blank lines are skipped. External ids are densified in order of first
/// appearance.
pub fn load_edge_list<R: BufRead>(reader: R, mode: Mode) -> Result<Graph> {
    let mut dense: HashMap<u64, NodeId> = HashMap::new();
    let mut external = Vec::new();
    let mut arcs = Vec::new();
    let mut intern = |id: u64, external: &mut Vec<u64>| -> NodeId {
        *dense.entry(id).or_insert_with(|| {
            external.push(id);
            external.len() - 1
        })
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(PprError::Parse {
                line: lineno,
                message: format!("expected two node ids, got {trimmed:?}"),
            });
        };
        let parse = |tok: &str| {
            tok.parse::<u64>().map_err(|_| PprError::Parse {
                line: lineno,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        let u = intern(a, &mut external);
        let v = intern(b, &mut external);
        arcs.push((u, v));
    }
    let n = external.len();
    Graph::build(n, arcs, mode, external)
}

/// Reads the `mode=` field from a `# n=.. m=.. mode=..` header, if any.
pub fn header_mode(text: &str) -> Option<Mode> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    let body = first.trim().strip_prefix('#')?;
    body.split_whitespace().find_map(|kv| match kv {
        "mode=u" => Some(Mode::Undirected),
        "mode=d" => Some(Mode::Directed),
        _ => None,
    })
}

/// Writes the header and one arc per line (each undirected edge once) using
/// external ids.
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "# n={} m={} mode={}", g.n(), g.m(), g.mode().tag())?;
    for (u, v) in g.arcs() {
        if g.is_undirected() && v < u {
            continue;
        }
        writeln!(w, "{} {}", g.external_id(u), g.external_id(v))?;
    }
    Ok(())
}

pub fn write_id_map<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    for v in 0..g.n() {
        writeln!(w, "{}\t{}", g.external_id(v), v)?;
    }
    Ok(())
}

/// Undirected preferential-attachment graph.
///
/// Starts from a clique on `attach + 1` nodes; each later node links to
/// `attach` distinct existing nodes chosen with probability proportional to
/// their current degree.
pub fn generate_power_law(n: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach == 0 {
        return Err(PprError::arg("attach must be at least 1"));
    }
    if n < attach + 1 {
        return Err(PprError::arg(format!(
            "n must be at least attach + 1 (n={n}, attach={attach})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = attach + 1;
    let mut edges = Vec::with_capacity(n * attach);
    // each endpoint appears once per incident edge
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * n * attach);
    for u in 0..core {
        for v in (u + 1)..core {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(attach);
    for u in core..n {
        chosen.clear();
        while chosen.len() < attach {
            let v = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for &v in &chosen {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Graph::from_arcs(n, edges, Mode::Undirected)
}

/// Random graph where each node draws `out_per_node` uniform neighbors
/// (duplicates collapse, self-loops allowed), so every out-degree is ≥ 1.
pub fn generate_random(n: usize, out_per_node: usize, mode: Mode, seed: u64) -> Result<Graph> {
    if n == 0 || out_per_node == 0 {
        return Err(PprError::arg("n and out_per_node must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::with_capacity(n * out_per_node);
    for u in 0..n {
        for _ in 0..out_per_node {
            arcs.push((u, rng.random_range(0..n)));
        }
    }
    Graph::from_arcs(n, arcs, mode)
}
