//! Sublinear single-source Personalized PageRank.
//!
//! The crate answers single-source PPR queries with either a uniform absolute
//! error bound (`ssppr_a`) or a degree-normalized absolute error bound on
//! undirected graphs (`ssppr_d`). Both engines combine Monte Carlo random
//! walks with per-target Backward Push whose depth adapts to rough PPR
//! estimates, and amplify the success probability with a median over
//! independent trials.
//!
//! Supporting pieces:
//!
//! - [`graph`]: CSR graph with in/out adjacency, edge-list IO, generators.
//! - [`alias`]: Walker/Vose alias tables for weighted source sampling.
//! - [`oracle`]: power-iteration ground truth.
//! - [`sampling`]: α-discounted walks, Monte Carlo, the median and sizing rules.
//! - [`push`]: Backward Push with budgets and a Forward Push baseline.
//! - [`query`]: the two query engines.
//! - [`harness`]: guarantee verification and cost-scaling experiments.

pub mod alias;
pub mod error;
pub mod graph;
pub mod harness;
pub mod oracle;
pub mod push;
pub mod query;
pub mod sampling;
pub mod scores;

pub use alias::AliasTable;
pub use error::{PprError, Result};
pub use graph::{Graph, Mode};
pub use push::{backward_push, forward_push, Budget, PushOutcome, PushResult};
pub use query::{ssppr_a, ssppr_d, QueryAnswer, QueryParams};
pub use scores::ScoreVector;

/// Dense node identifier.
pub type NodeId = usize;
