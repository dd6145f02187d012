//! Edge-list ingestion and the immutable compressed web graph.
//!
//! The hyperlink matrix `P` is never stored. Row `i` of `P` is `1/d_i` on each
//! out-neighbour, or `1/n` everywhere when `i` is dangling, and every solver
//! applies the dangling rows analytically.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Dense node index in `[0, n)`, assigned in first-appearance order.
pub type NodeId = usize;

/// Deduplicated edges plus the external label of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<(NodeId, NodeId)>,
    labels: Vec<String>,
    label_map: HashMap<String, NodeId>,
}

impl EdgeList {
    /// Builds an edge list over nodes labelled `"0"..n`. Duplicate pairs collapse.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let label_map = labels.iter().cloned().zip(0..n).collect();
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for (s, t) in pairs {
            for v in [s, t] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { index: v, n });
                }
            }
            if seen.insert((s, t)) {
                edges.push((s, t));
            }
        }
        Ok(EdgeList { edges, labels, label_map })
    }

    /// Like [`EdgeList::from_pairs`] with caller-supplied labels, which must be distinct.
    pub fn with_labels(labels: Vec<String>, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut list = Self::from_pairs(labels.len(), pairs)?;
        let label_map: HashMap<String, NodeId> = labels.iter().cloned().zip(0..labels.len()).collect();
        if label_map.len() != labels.len() {
            return Err(Error::InvalidParameter("duplicate node labels".into()));
        }
        list.labels = labels;
        list.label_map = label_map;
        Ok(list)
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.label_map.get(label).copied()
    }

    /// Renders back to the text format accepted by [`parse_edge_list`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for &(s, t) in &self.edges {
            let _ = writeln!(out, "{}\t{}", self.labels[s], self.labels[t]);
        }
        out
    }
}

/// Parses `source target` lines. `#` lines and blank lines are skipped.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<EdgeList> {
    let mut labels = Vec::new();
    let mut label_map: HashMap<String, NodeId> = HashMap::new();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();

    let mut intern = |label: &str, labels: &mut Vec<String>| -> NodeId {
        if let Some(&id) = label_map.get(label) {
            return id;
        }
        let id = labels.len();
        labels.push(label.to_owned());
        label_map.insert(label.to_owned(), id);
        id
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 2 node labels, found {}", tokens.len()),
            });
        }
        let s = intern(tokens[0], &mut labels);
        let t = intern(tokens[1], &mut labels);
        if seen.insert((s, t)) {
            edges.push((s, t));
        }
    }

    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let label_map = labels.iter().cloned().zip(0..).collect();
    Ok(EdgeList { edges, labels, label_map })
}

pub fn parse_edge_str(text: &str) -> Result<EdgeList> {
    parse_edge_list(text.as_bytes())
}

/// Immutable directed graph in CSR layout with its transpose.
#[derive(Debug, Clone)]
pub struct WebGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
    dangling: Vec<NodeId>,
    labels: Vec<String>,
}

fn csr(n: usize, pairs: impl Iterator<Item = (NodeId, NodeId)> + Clone) -> (Vec<usize>, Vec<NodeId>) {
    let mut offsets = vec![0usize; n + 1];
    for (s, _) in pairs.clone() {
        offsets[s + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut targets = vec![0; offsets[n]];
    for (s, t) in pairs {
        targets[cursor[s]] = t;
        cursor[s] += 1;
    }
    for i in 0..n {
        targets[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, targets)
}

impl WebGraph {
    pub fn build(edges: &EdgeList) -> WebGraph {
        let n = edges.node_count();
        let fwd = edges.edges.iter().copied();
        let (out_offsets, out_targets) = csr(n, fwd.clone());
        let (in_offsets, in_sources) = csr(n, fwd.map(|(s, t)| (t, s)));
        let dangling = (0..n).filter(|&i| out_offsets[i + 1] == out_offsets[i]).collect();
        WebGraph {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            dangling,
            labels: edges.labels.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_degree(&self, i: NodeId) -> usize {
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    pub fn successors(&self, i: NodeId) -> &[NodeId] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    pub fn predecessors(&self, i: NodeId) -> &[NodeId] {
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    pub fn is_dangling(&self, i: NodeId) -> bool {
        self.out_degree(i) == 0
    }

    /// Dangling nodes in ascending order.
    pub fn dangling(&self) -> &[NodeId] {
        &self.dangling
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: NodeId) -> &str {
        &self.labels[i]
    }

    /// Iterates over all real edges in row order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).flat_map(move |i| self.successors(i).iter().map(move |&j| (i, j)))
    }

    /// Entry `P_ij` of the hyperlink matrix, dangling rows included.
    pub fn transition_prob(&self, i: NodeId, j: NodeId) -> Result<f64> {
        for v in [i, j] {
            if v >= self.n {
                return Err(Error::NodeOutOfRange { index: v, n: self.n });
            }
        }
        let d = self.out_degree(i);
        if d == 0 {
            return Ok(1.0 / self.n as f64);
        }
        Ok(if self.successors(i).binary_search(&j).is_ok() {
            1.0 / d as f64
        } else {
            0.0
        })
    }

    /// `x ← xP` with dangling rows spread uniformly. `out` is overwritten.
    pub fn left_mul_p(&self, x: &[f64], out: &mut [f64]) {
        let mut dangling_mass = 0.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let succ = self.successors(i);
            if succ.is_empty() {
                dangling_mass += x[i];
                continue;
            }
            let share = x[i] / succ.len() as f64;
            for &j in succ {
                out[j] += share;
            }
        }
        let spread = dangling_mass / self.n as f64;
        out.iter_mut().for_each(|v| *v += spread);
    }
}
