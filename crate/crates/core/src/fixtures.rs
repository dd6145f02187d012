//! Small hand-checkable graphs.

use crate::graph::{EdgeList, WebGraph};

pub fn graph(n: usize, edges: &[(usize, usize)]) -> WebGraph {
    WebGraph::build(&EdgeList::from_pairs(n, edges.iter().copied()).expect("fixture edges in range"))
}

/// `0 ⇄ 1 → 2 ↺`: ESCC `{0, 1}`, POUT `{2}`, no dangling node.
pub fn g3() -> WebGraph {
    graph(3, &[(0, 1), (1, 0), (1, 2), (2, 2)])
}

/// `0 ⇄ 1`, `1 → 2`, `1 → 3 ↺`, node 2 dangling: ESCC `{0, 1, 2}`, POUT `{3}`.
pub fn g4() -> WebGraph {
    graph(4, &[(0, 1), (1, 0), (1, 2), (1, 3), (3, 3)])
}

pub const G3_EDGES: &str = "0 1\n1 0\n1 2\n2 2\n";
pub const G4_EDGES: &str = "0 1\n1 0\n1 2\n1 3\n3 3\n";
