//! Synthetic web sites with photo-album structure.
//!
//! Hubs form a strongly connected ring, and each hub adds the same number of
//! extra links to other hubs, drawn with weight `(b + 1)²` on target `b`. Each album
//! is an index page linked both ways with its hub and with every photo page.
//! Referrer pages have no in-links and point at one hub each; the hub with the
//! `k`-th smallest weight in the hub-only chain gets a share proportional to `k`. Dangling leaves hang off the hubs, and a
//! small pure-OUT sink cycle is reachable only through the uniform rows of the
//! leaves. Albums, leaves and referrers are dealt to hubs round-robin or by
//! fixed shares, so only the extra hub links depend on the seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{parse_edge_str, EdgeList, NodeId, WebGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlbumGraphSpec {
    pub n_albums: usize,
    /// Photo pages per album, not counting the index page.
    pub pages_per_album: usize,
    pub hub_count: usize,
    /// Extra out-links per hub, as a fraction in `[0, 1]` of the other hubs.
    pub hub_link_density: f64,
    /// Pages without in-links, each pointing at one hub.
    pub referrers: usize,
    pub dangling_leaves: usize,
    pub pout_size: usize,
    pub seed: u64,
}

impl AlbumGraphSpec {
    /// Albums and hubs only: no dangling leaf and no sink.
    pub fn new(n_albums: usize, pages_per_album: usize, hub_count: usize, hub_link_density: f64, seed: u64) -> Self {
        AlbumGraphSpec {
            n_albums,
            pages_per_album,
            hub_count,
            hub_link_density,
            referrers: 0,
            dangling_leaves: 0,
            pout_size: 0,
            seed,
        }
    }

    /// The instance used by the acceptance suite, about a thousand nodes.
    pub fn standard(seed: u64) -> Self {
        AlbumGraphSpec { referrers: 640, dangling_leaves: 24, pout_size: 4, ..Self::new(24, 14, 8, 0.5, seed) }
    }

    pub fn node_count(&self) -> usize {
        self.hub_count + self.n_albums * (self.pages_per_album + 1) + self.referrers + self.dangling_leaves + self.pout_size
    }

    fn validate(&self) -> Result<()> {
        if self.n_albums == 0 || self.pages_per_album == 0 || self.hub_count == 0 {
            return Err(Error::InvalidParameter("album, page and hub counts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.hub_link_density) {
            return Err(Error::InvalidParameter(format!("hub link density {} outside [0, 1]", self.hub_link_density)));
        }
        if self.pout_size > 0 && self.dangling_leaves == 0 {
            return Err(Error::InvalidParameter("a sink needs dangling leaves to be reachable".into()));
        }
        Ok(())
    }
}

/// Generated graph plus the node ids of each role. Ids follow first
/// appearance in the rendered edge list, so re-parsing reproduces them.
#[derive(Debug, Clone)]
pub struct AlbumGraph {
    pub spec: AlbumGraphSpec,
    pub edges: EdgeList,
    pub graph: WebGraph,
    pub hubs: Vec<NodeId>,
    pub album_index: Vec<NodeId>,
    /// `album_pages[a]` are the photo pages of album `a`.
    pub album_pages: Vec<Vec<NodeId>>,
    pub leaves: Vec<NodeId>,
    pub sink: Vec<NodeId>,
}

impl AlbumGraph {
    /// Index and photo pages of every album.
    pub fn album_nodes(&self) -> Vec<NodeId> {
        let mut out = self.album_index.clone();
        out.extend(self.album_pages.iter().flatten());
        out.sort_unstable();
        out
    }
}

pub fn generate_album_graph(spec: &AlbumGraphSpec) -> Result<AlbumGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.hub_count;
    let mut labels: Vec<String> = (0..h).map(|i| format!("hub{i}")).collect();
    let mut edges = Vec::new();

    if h > 1 {
        edges.extend((0..h).map(|i| (i, (i + 1) % h)));
    }
    // Every hub gets the same number of extra out-links, so the right Perron
    // vector is constant over hubs. Targets favour high hub indices.
    let extra = (spec.hub_link_density * h.saturating_sub(2) as f64).round() as usize;
    for a in 0..h {
        let mut candidates: Vec<usize> = (0..h).filter(|&b| b != a && b != (a + 1) % h).collect();
        for _ in 0..extra.min(candidates.len()) {
            let k = *(0..candidates.len())
                .collect::<Vec<_>>()
                .choose_weighted(&mut rng, |&k| ((candidates[k] + 1) * (candidates[k] + 1)) as f64)
                .expect("positive weights");
            edges.push((a, candidates.swap_remove(k)));
        }
    }

    let mut album_index = Vec::with_capacity(spec.n_albums);
    let mut album_pages = Vec::with_capacity(spec.n_albums);
    for a in 0..spec.n_albums {
        let hub = a % h;
        let index = labels.len();
        labels.push(format!("album{a}/index"));
        edges.extend([(hub, index), (index, hub)]);
        let pages: Vec<NodeId> = (0..spec.pages_per_album)
            .map(|p| {
                let v = labels.len();
                labels.push(format!("album{a}/p{p}"));
                edges.extend([(index, v), (v, index)]);
                v
            })
            .collect();
        album_index.push(index);
        album_pages.push(pages);
    }

    // Referrer shares grow with the hub's weight in the hub-only chain, so
    // damped and undamped measures grade the hubs in the same direction.
    let hub_edges: Vec<(NodeId, NodeId)> = edges.iter().copied().filter(|&(a, b)| a < h && b < h).collect();
    let weight = hub_chain_weights(h, &hub_edges);
    let mut by_weight: Vec<usize> = (0..h).collect();
    by_weight.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(a.cmp(&b)));
    let total_weight = h * (h + 1) / 2;
    let mut dealt = 0;
    for (pos, &b) in by_weight.iter().enumerate() {
        let share = if pos + 1 == h { spec.referrers - dealt } else { spec.referrers * (pos + 1) / total_weight };
        for _ in 0..share {
            let v = labels.len();
            labels.push(format!("ref{dealt}"));
            edges.push((v, b));
            dealt += 1;
        }
    }

    let leaves: Vec<NodeId> = (0..spec.dangling_leaves)
        .map(|l| {
            let v = labels.len();
            labels.push(format!("leaf{l}"));
            edges.push((l % h, v));
            v
        })
        .collect();

    let first_sink = labels.len();
    for s in 0..spec.pout_size {
        labels.push(format!("sink{s}"));
        edges.push((first_sink + s, first_sink + (s + 1) % spec.pout_size));
    }

    let raw = EdgeList::with_labels(labels, edges)?;
    let canonical = parse_edge_str(&raw.render())?;
    if canonical.node_count() != raw.node_count() {
        return Err(Error::Inconsistent("album graph has an isolated node".into()));
    }
    let id = |v: NodeId| canonical.id_of(&raw.labels()[v]).expect("label survives rendering");
    let graph = WebGraph::build(&canonical);
    Ok(AlbumGraph {
        spec: spec.clone(),
        hubs: (0..h).map(id).collect(),
        album_index: album_index.into_iter().map(id).collect(),
        album_pages: album_pages.into_iter().map(|p| p.into_iter().map(id).collect()).collect(),
        leaves: leaves.into_iter().map(id).collect(),
        sink: (first_sink..first_sink + spec.pout_size).map(id).collect(),
        edges: canonical,
        graph,
    })
}

/// Stationary law of the walk on hub-to-hub links alone, by lazy power
/// iteration.
fn hub_chain_weights(h: usize, edges: &[(NodeId, NodeId)]) -> Vec<f64> {
    let mut out_deg = vec![0usize; h];
    for &(a, _) in edges {
        out_deg[a] += 1;
    }
    let mut x = vec![1.0 / h as f64; h];
    for _ in 0..100_000 {
        let mut y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        for &(a, b) in edges {
            y[b] += 0.5 * x[a] / out_deg[a] as f64;
        }
        let change: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
        x = y;
        if change < 1e-15 {
            break;
        }
    }
    x
}
