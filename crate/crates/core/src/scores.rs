use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::NodeId;

/// Sparse node → value map with node-ordered iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreVector {
    entries: BTreeMap<NodeId, f64>,
}

impl ScoreVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: NodeId) -> f64 {
        self.entries.get(&v).copied().unwrap_or(0.0)
    }

    pub fn insert(&mut self, v: NodeId, value: f64) {
        self.entries.insert(v, value);
    }

    pub fn add(&mut self, v: NodeId, delta: f64) {
        *self.entries.entry(v).or_insert(0.0) += delta;
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.entries.contains_key(&v)
    }

    /// Number of stored entries (zeros included if they were inserted).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.entries.iter().map(|(&v, &x)| (v, x))
    }

    /// Iterates entries whose value is nonzero.
    pub fn nonzero(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.iter().filter(|&(_, x)| x != 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.entries.values().copied().fold(0.0, f64::max)
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (v, x) in self.iter() {
            out[v] = x;
        }
        out
    }

    /// `node<TAB>value` lines sorted by node id, zeros omitted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (v, x) in self.nonzero() {
            let _ = writeln!(out, "{v}\t{x}");
        }
        out
    }
}

impl FromIterator<(NodeId, f64)> for ScoreVector {
    fn from_iter<I: IntoIterator<Item = (NodeId, f64)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
