//! Quasi-stationarity centrality for reducible web graphs.
//!
//! A web graph with dangling nodes is split into its extended strongly
//! connected component (ESCC) and the pure OUT part (POUT). On the ESCC block
//! `T` of the hyperlink matrix this crate computes four parameter-free
//! centrality measures alongside damped PageRank, a dense perturbation
//! laboratory for their first-order expansions, and survival-conditioned walk
//! kernels with a Monte-Carlo check.

pub mod block;
pub mod decomposition;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod perturbation;
pub mod rank;
pub mod report;
pub mod spectral;
pub mod walk;

pub use block::SparseBlock;
pub use decomposition::{split_escc_pout, tarjan_scc, ComponentStats, Decomposition, SccLabeling};
pub use error::{Error, ErrorKind, Result};
pub use graph::{parse_edge_list, EdgeList, NodeId, WebGraph};
pub use spectral::{CentralityVector, Measure, QsMeasures, SolverOptions, SpectralResult};
