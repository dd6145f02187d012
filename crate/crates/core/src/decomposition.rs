//! Strongly connected components, bow-tie classification and the ESCC/POUT
//! split that puts `P` into the block form `[[Q, 0], [R, T]]`.
//!
//! The extended component (ESCC) is the giant SCC of the graph once every
//! dangling node links to all nodes. A dangling node then reaches everything,
//! so that SCC is exactly the set of nodes that reach some dangling node over
//! real edges. It is computed that way, by one reverse sweep from the dangling
//! set, without materializing the artificial links.

use std::collections::VecDeque;

use serde::Serialize;

use crate::block::SparseBlock;
use crate::error::{Error, Result};
use crate::graph::{NodeId, WebGraph};

const UNVISITED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccLabeling {
    /// Component index of each node. Indices follow Tarjan emission order,
    /// so component 0 is always a sink component.
    pub component_of: Vec<usize>,
    pub component_sizes: Vec<usize>,
    /// Largest component; ties go to the smallest index.
    pub giant: usize,
}

impl SccLabeling {
    pub fn count(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn members(&self, c: usize) -> Vec<NodeId> {
        (0..self.component_of.len()).filter(|&v| self.component_of[v] == c).collect()
    }
}

/// Iterative Tarjan over real edges only.
pub fn tarjan_scc(g: &WebGraph) -> SccLabeling {
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<NodeId> = Vec::new();
    let mut call: Vec<(NodeId, usize)> = Vec::new();
    let mut component_of = vec![UNVISITED; n];
    let mut component_sizes = Vec::new();
    let mut counter = 0usize;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = counter;
        lowlink[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            let succ = g.successors(v);
            if frame.1 < succ.len() {
                let w = succ[frame.1];
                frame.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    lowlink[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if lowlink[v] == index[v] {
                let c = component_sizes.len();
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component_of[w] = c;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                component_sizes.push(size);
            }
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
        }
    }

    let giant = component_sizes
        .iter()
        .enumerate()
        .fold(None::<(usize, usize)>, |best, (c, &s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((c, s)),
        })
        .map_or(0, |(c, _)| c);
    SccLabeling { component_of, component_sizes, giant }
}

fn sweep<'a, F>(n: usize, seeds: impl IntoIterator<Item = NodeId>, next: F) -> Vec<bool>
where
    F: Fn(NodeId) -> &'a [NodeId],
{
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in next(v) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BowTie {
    Scc,
    In,
    Out,
    Other,
}

/// Classic bow-tie over real edges, dangling nodes having no out-links.
pub fn classify_bowtie(g: &WebGraph, s: &SccLabeling) -> Result<Vec<BowTie>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let core = s.members(s.giant);
    let forward = sweep(n, core.iter().copied(), |v| g.successors(v));
    let backward = sweep(n, core.iter().copied(), |v| g.predecessors(v));
    Ok((0..n)
        .map(|v| {
            if s.component_of[v] == s.giant {
                BowTie::Scc
            } else if backward[v] {
                BowTie::In
            } else if forward[v] {
                BowTie::Out
            } else {
                BowTie::Other
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Escc,
    Pout,
    ResidualIn,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Escc => "ESCC",
            Part::Pout => "POUT",
            Part::ResidualIn => "residual_in",
        }
    }
}

/// ESCC/POUT partition with the blocks of the reordered hyperlink matrix.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub n: usize,
    pub escc: Vec<NodeId>,
    pub pout: Vec<NodeId>,
    pub residual_in: Vec<NodeId>,
    pub part: Vec<Part>,
    /// Position of each node inside its part's list.
    pub local: Vec<usize>,
    /// ESCC → ESCC block.
    pub t: SparseBlock,
    /// ESCC → POUT block.
    pub r: SparseBlock,
    /// POUT → POUT block.
    pub q: SparseBlock,
    pub row_sum_t: Vec<f64>,
    /// `R·1`, the one-step exit probability of each ESCC node.
    pub exit: Vec<f64>,
}

impl Decomposition {
    pub fn n_t(&self) -> usize {
        self.escc.len()
    }

    /// Global id of ESCC-local index `k`.
    pub fn escc_node(&self, k: usize) -> NodeId {
        self.escc[k]
    }

    pub fn escc_index(&self, v: NodeId) -> Option<usize> {
        (self.part[v] == Part::Escc).then(|| self.local[v])
    }
}

pub fn split_escc_pout(g: &WebGraph) -> Result<Decomposition> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let in_escc = if g.dangling().is_empty() {
        let s = tarjan_scc(g);
        s.component_of.iter().map(|&c| c == s.giant).collect::<Vec<_>>()
    } else {
        sweep(n, g.dangling().iter().copied(), |v| g.predecessors(v))
    };
    let escc: Vec<NodeId> = (0..n).filter(|&v| in_escc[v]).collect();
    if escc.is_empty() {
        return Err(Error::NoRecurrentCore);
    }
    let reaches = sweep(n, escc.iter().copied(), |v| g.predecessors(v));

    let mut part = vec![Part::Pout; n];
    let mut local = vec![0usize; n];
    let (mut pout, mut residual_in) = (Vec::new(), Vec::new());
    for v in 0..n {
        if in_escc[v] {
            part[v] = Part::Escc;
        } else if reaches[v] {
            part[v] = Part::ResidualIn;
            local[v] = residual_in.len();
            residual_in.push(v);
        } else {
            local[v] = pout.len();
            pout.push(v);
        }
    }
    for (k, &v) in escc.iter().enumerate() {
        local[v] = k;
    }
    if !residual_in.is_empty() {
        log::warn!(
            "{} nodes reach the ESCC without belonging to it; they are excluded from T",
            residual_in.len()
        );
    }

    let inv_n = 1.0 / n as f64;
    let mut t_rows = Vec::with_capacity(escc.len());
    let mut r_rows = Vec::with_capacity(escc.len());
    let mut t_uniform = vec![0.0; escc.len()];
    let mut r_uniform = vec![0.0; escc.len()];
    for (k, &v) in escc.iter().enumerate() {
        let succ = g.successors(v);
        if succ.is_empty() {
            if !residual_in.is_empty() {
                return Err(Error::Inconsistent("dangling ESCC node alongside residual IN nodes".into()));
            }
            t_uniform[k] = inv_n;
            r_uniform[k] = inv_n;
            t_rows.push(Vec::new());
            r_rows.push(Vec::new());
            continue;
        }
        let p = 1.0 / succ.len() as f64;
        let (mut t_row, mut r_row) = (Vec::new(), Vec::new());
        for &w in succ {
            match part[w] {
                Part::Escc => t_row.push((local[w], p)),
                Part::Pout => r_row.push((local[w], p)),
                Part::ResidualIn => {
                    return Err(Error::Inconsistent(format!("ESCC node {v} links into residual IN node {w}")));
                }
            }
        }
        t_rows.push(t_row);
        r_rows.push(r_row);
    }
    let mut q_rows = Vec::with_capacity(pout.len());
    for &v in &pout {
        let succ = g.successors(v);
        if succ.is_empty() {
            return Err(Error::Inconsistent(format!("dangling node {v} outside the ESCC")));
        }
        let p = 1.0 / succ.len() as f64;
        let mut row = Vec::with_capacity(succ.len());
        for &w in succ {
            if part[w] != Part::Pout {
                return Err(Error::Inconsistent(format!("zero block violated by edge {v} -> {w}")));
            }
            row.push((local[w], p));
        }
        q_rows.push(row);
    }

    let t = SparseBlock::from_rows(escc.len(), t_rows, t_uniform)?;
    let r = SparseBlock::from_rows(pout.len(), r_rows, r_uniform)?;
    let q = SparseBlock::from_rows(pout.len(), q_rows, vec![0.0; pout.len()])?;
    let row_sum_t = t.row_sums();
    let exit = r.row_sums();
    for (k, (&ts, &rs)) in row_sum_t.iter().zip(&exit).enumerate() {
        if ts <= 0.0 {
            return Err(Error::ZeroRowSum { row: k });
        }
        if (ts + rs - 1.0).abs() > 1e-12 {
            return Err(Error::Inconsistent(format!("row balance of ESCC row {k} is {}", ts + rs)));
        }
    }

    Ok(Decomposition { n, escc, pout, residual_in, part, local, t, r, q, row_sum_t, exit })
}

/// Node counts in the layout of the component-size table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentStats {
    pub total: usize,
    pub scc_size: usize,
    pub in_size: usize,
    pub out_size: usize,
    pub escc_size: usize,
    pub pout_size: usize,
    pub residual_in_size: usize,
    pub scc_count_in_out: usize,
    pub scc_count_in_pout: usize,
}

pub fn component_stats(g: &WebGraph, s: &SccLabeling, d: &Decomposition) -> Result<ComponentStats> {
    let bowtie = classify_bowtie(g, s)?;
    let count = |b: BowTie| bowtie.iter().filter(|&&x| x == b).count();

    // A component lies fully inside a region iff all its members do.
    let mut all_out = vec![true; s.count()];
    let mut all_pout = vec![true; s.count()];
    for v in 0..g.node_count() {
        let c = s.component_of[v];
        all_out[c] &= bowtie[v] == BowTie::Out;
        all_pout[c] &= d.part[v] == Part::Pout;
    }
    Ok(ComponentStats {
        total: g.node_count(),
        scc_size: s.component_sizes[s.giant],
        in_size: count(BowTie::In),
        out_size: count(BowTie::Out),
        escc_size: d.escc.len(),
        pout_size: d.pout.len(),
        residual_in_size: d.residual_in.len(),
        scc_count_in_out: all_out.iter().filter(|&&b| b).count(),
        scc_count_in_pout: all_pout.iter().filter(|&&b| b).count(),
    })
}
