//! Rank correlation between centrality measures.

pub mod album;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::block::SparseBlock;
use crate::error::{Error, Result};
use crate::spectral::{pagerank_escc, CentralityVector, SolverOptions};

pub use album::{generate_album_graph, AlbumGraph, AlbumGraphSpec};

/// Scores closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Descending order of a score vector with its tie groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    /// Node indices sorted by descending score; ties by ascending index.
    pub order: Vec<usize>,
    /// Maximal groups of consecutive equal scores, best group first.
    pub groups: Vec<Vec<usize>>,
    /// `level[v]` is the index of the group containing `v`.
    pub level: Vec<usize>,
}

impl Ranking {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut level = vec![0; scores.len()];
        let mut prev = f64::NAN;
        for &v in &order {
            if groups.is_empty() || (prev - scores[v]).abs() > TIE_TOL {
                groups.push(Vec::new());
            }
            prev = scores[v];
            level[v] = groups.len() - 1;
            groups.last_mut().expect("group pushed").push(v);
        }
        Ranking { order, groups, level }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn has_ties(&self) -> bool {
        self.groups.len() < self.order.len()
    }

    /// Competition rank: one plus the number of strictly better nodes.
    pub fn competition_ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.len()];
        let mut above = 0;
        for g in &self.groups {
            for &v in g {
                rank[v] = above + 1;
            }
            above += g.len();
        }
        rank
    }

    /// Nodes alone in their group.
    pub fn untied(&self) -> Vec<usize> {
        self.groups.iter().filter(|g| g.len() == 1).map(|g| g[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TauVariant {
    /// No ties in either input.
    A,
    /// Tie-corrected denominator.
    B,
}

impl TauVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TauVariant::A => "tau_a",
            TauVariant::B => "tau_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tau {
    pub value: f64,
    pub variant: TauVariant,
}

fn tied_pairs(sorted_levels: impl Iterator<Item = usize>) -> u64 {
    let (mut total, mut run, mut prev) = (0u64, 0u64, usize::MAX);
    for l in sorted_levels {
        if l == prev {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
            prev = l;
        }
    }
    total + run * run.saturating_sub(1) / 2
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau between two rankings of one domain, O(n log n).
pub fn kendall_tau_rankings(a: &Ranking, b: &Ranking) -> Result<Tau> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::DomainMismatch { left: n, right: b.len() });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by_key(|&v| (a.level[v], b.level[v]));
    let n0 = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let n1 = tied_pairs(idx.iter().map(|&v| a.level[v]));
    let mut joint = 0u64;
    let mut run = 0u64;
    for w in 0..n {
        let same = w > 0 && {
            let (p, q) = (idx[w - 1], idx[w]);
            a.level[p] == a.level[q] && b.level[p] == b.level[q]
        };
        if same {
            run += 1;
        } else {
            joint += run * run.saturating_sub(1) / 2;
            run = 1;
        }
    }
    joint += run * run.saturating_sub(1) / 2;

    let mut ys: Vec<usize> = idx.iter().map(|&v| b.level[v]).collect();
    let mut buf = vec![0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(ys.iter().copied());

    if n0 == n1 || n0 == n2 {
        return Err(Error::DegenerateRanking);
    }
    let numerator = n0 as f64 - n1 as f64 - n2 as f64 + joint as f64 - 2.0 * swaps as f64;
    let variant = if n1 == 0 && n2 == 0 { TauVariant::A } else { TauVariant::B };
    let denominator = if n1 == n2 {
        (n0 - n1) as f64
    } else {
        (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt()
    };
    let value = numerator / denominator;
    Ok(Tau { value: value.clamp(-1.0, 1.0), variant })
}

pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<Tau> {
    if a.len() != b.len() {
        return Err(Error::DomainMismatch { left: a.len(), right: b.len() });
    }
    kendall_tau_rankings(&Ranking::from_scores(a), &Ranking::from_scores(b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauMatrix {
    pub measures: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub variants: Vec<Vec<TauVariant>>,
}

impl TauMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.measures.iter().position(|m| m == a)?;
        let j = self.measures.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> f64 {
        let k = self.measures.len();
        (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Like [`kendall_tau_rankings`], but an all-tied input gives `NaN` instead
/// of an error so that one constant vector does not sink a whole table.
fn tau_or_nan(a: &Ranking, b: &Ranking) -> Result<Tau> {
    match kendall_tau_rankings(a, b) {
        Err(Error::DegenerateRanking) => Ok(Tau { value: f64::NAN, variant: TauVariant::B }),
        other => other,
    }
}

/// Pairwise taus; entries involving an all-tied vector are `NaN`.
pub fn tau_table(vectors: &[&CentralityVector]) -> Result<TauMatrix> {
    let k = vectors.len();
    if let Some(v) = vectors.iter().find(|v| v.len() != vectors[0].len()) {
        return Err(Error::DomainMismatch { left: vectors[0].len(), right: v.len() });
    }
    let rankings: Vec<Ranking> = vectors.iter().map(|v| Ranking::from_scores(&v.scores)).collect();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let taus = pairs
        .par_iter()
        .map(|&(i, j)| tau_or_nan(&rankings[i], &rankings[j]))
        .collect::<Result<Vec<_>>>()?;

    if taus.iter().any(|t| t.value.is_nan()) {
        warn!("some taus are undefined because a vector has every pair tied");
    }
    let mut values = vec![vec![1.0; k]; k];
    let mut variants = vec![vec![TauVariant::A; k]; k];
    for (i, r) in rankings.iter().enumerate() {
        if r.has_ties() {
            variants[i][i] = TauVariant::B;
        }
    }
    for (&(i, j), t) in pairs.iter().zip(taus) {
        values[i][j] = t.value;
        values[j][i] = t.value;
        variants[i][j] = t.variant;
        variants[j][i] = t.variant;
    }
    Ok(TauMatrix { measures: vectors.iter().map(|v| v.measure.name().to_owned()).collect(), values, variants })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub c: f64,
    pub tau: f64,
    pub variant: TauVariant,
}

/// `tau(reference, π̂_T(c))` for every `c` in the grid; `NaN` where undefined.
pub fn damping_sweep(
    t: &SparseBlock,
    reference: &CentralityVector,
    c_grid: &[f64],
    opts: SolverOptions,
) -> Result<Vec<SweepPoint>> {
    let base = Ranking::from_scores(&reference.scores);
    c_grid
        .par_iter()
        .map(|&c| {
            let at = |e: Error| Error::AtDamping { c, source: Box::new(e) };
            let pr = pagerank_escc(t, c, opts).map_err(at)?;
            let tau = tau_or_nan(&base, &Ranking::from_scores(&pr.scores)).map_err(at)?;
            Ok(SweepPoint { c, tau: tau.value, variant: tau.variant })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub node: usize,
    pub rank_pr: usize,
    pub rank_qs: usize,
    /// `rank_pr − rank_qs`; positive when the second measure ranks the node higher.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// Every node, by descending delta then ascending index.
    pub rows: Vec<DivergenceRow>,
    /// Leading rows with positive delta, at most `k`.
    pub flagged: Vec<usize>,
}

pub fn divergence_report(pr: &CentralityVector, qs: &CentralityVector, k: usize) -> Result<DivergenceReport> {
    let n = pr.len();
    if n != qs.len() {
        return Err(Error::DomainMismatch { left: n, right: qs.len() });
    }
    let k = if k > n {
        warn!("top-k {k} exceeds {n} nodes; clamping");
        n
    } else {
        k
    };
    let rp = Ranking::from_scores(&pr.scores).competition_ranks();
    let rq = Ranking::from_scores(&qs.scores).competition_ranks();
    let mut rows: Vec<DivergenceRow> = (0..n)
        .map(|v| DivergenceRow { node: v, rank_pr: rp[v], rank_qs: rq[v], delta: rp[v] as i64 - rq[v] as i64 })
        .collect();
    rows.sort_by(|a, b| b.delta.cmp(&a.delta).then(a.node.cmp(&b.node)));
    let flagged = rows.iter().take(k).take_while(|r| r.delta > 0).map(|r| r.node).collect();
    Ok(DivergenceReport { rows, flagged })
}

/// Whether every pair drawn from `nodes` is ordered the same way (ties
/// included) by every ranking.
pub fn same_pairwise_order(rankings: &[Ranking], nodes: &[usize]) -> bool {
    let Some((first, rest)) = rankings.split_first() else {
        return true;
    };
    nodes.iter().enumerate().all(|(x, &a)| {
        nodes[x + 1..].iter().all(|&b| {
            let want = first.level[a].cmp(&first.level[b]);
            rest.iter().all(|r| r.level[a].cmp(&r.level[b]) == want)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Measure;
    use proptest::prelude::*;

    /// Direct pair enumeration with the same tie conventions.
    fn brute_tau(a: &[f64], b: &[f64]) -> f64 {
        let la = Ranking::from_scores(a).level;
        let lb = Ranking::from_scores(b).level;
        let n = a.len();
        let (mut s, mut ta, mut tb, mut pairs) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                pairs += 1;
                let x = (la[i] as i64 - la[j] as i64).signum();
                let y = (lb[i] as i64 - lb[j] as i64).signum();
                s += x * y;
                ta += (x == 0) as i64;
                tb += (y == 0) as i64;
            }
        }
        s as f64 / (((pairs - ta) as f64).sqrt() * ((pairs - tb) as f64).sqrt())
    }

    fn cv(scores: &[f64]) -> CentralityVector {
        CentralityVector::normalized(Measure::PiHat, scores.to_vec()).unwrap()
    }

    #[test]
    fn calibration() {
        let a = [5.0, 4.0, 3.0, 2.0, 1.0];
        let r = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(kendall_tau(&a, &a).unwrap(), Tau { value: 1.0, variant: TauVariant::A });
        assert_eq!(kendall_tau(&a, &r).unwrap().value, -1.0);
    }

    #[test]
    fn three_pairs() {
        let t = kendall_tau(&[3.0, 2.0, 1.0], &[3.0, 1.0, 2.0]).unwrap();
        assert!((t.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.variant, TauVariant::A);
    }

    #[test]
    fn ties_use_tau_b() {
        // concordant 2, discordant 0, one tie in a: 2 / sqrt(2 * 3)
        let t = kendall_tau(&[2.0, 1.0, 1.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.variant, TauVariant::B);
        assert!((t.value - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn near_equal_scores_tie() {
        let r = Ranking::from_scores(&[0.5, 0.5 + 1e-14, 0.1]);
        assert_eq!(r.groups.len(), 2);
        assert_eq!(r.competition_ranks(), vec![1, 1, 3]);
        assert_eq!(r.untied(), vec![2]);
    }

    #[test]
    fn errors() {
        assert!(matches!(kendall_tau(&[1.0, 2.0], &[1.0]), Err(Error::DomainMismatch { .. })));
        assert!(matches!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::DegenerateRanking)));
        assert!(matches!(kendall_tau(&[1.0], &[1.0]), Err(Error::DegenerateRanking)));
    }

    #[test]
    fn table_of_copies_is_all_ones() {
        let v = cv(&[0.4, 0.3, 0.2, 0.1]);
        let m = tau_table(&[&v, &v, &v, &v]).unwrap();
        assert!(m.values.iter().flatten().all(|&x| x == 1.0));
    }

    #[test]
    fn constant_vector_gives_nan_entries() {
        let a = cv(&[0.4, 0.3, 0.2, 0.1]);
        let flat = cv(&[1.0, 1.0, 1.0, 1.0]);
        let m = tau_table(&[&a, &flat]).unwrap();
        assert!(m.values[0][1].is_nan());
        assert_eq!(m.values[0][0], 1.0);
    }

    #[test]
    fn table_is_symmetric() {
        let a = cv(&[0.4, 0.3, 0.2, 0.1]);
        let b = cv(&[0.1, 0.3, 0.2, 0.4]);
        let c = cv(&[0.3, 0.4, 0.1, 0.2]);
        let m = tau_table(&[&a, &b, &c]).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
        assert_eq!(m.get("pi_hat", "pi_hat"), Some(1.0));
    }

    #[test]
    fn divergence_of_identical_vectors_is_empty() {
        let v = cv(&[0.4, 0.3, 0.2, 0.1]);
        let r = divergence_report(&v, &v, 2).unwrap();
        assert!(r.rows.iter().all(|row| row.delta == 0));
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn divergence_flags_risers_and_clamps() {
        let pr = cv(&[0.4, 0.3, 0.2, 0.1]);
        let qs = cv(&[0.1, 0.2, 0.3, 0.4]);
        let r = divergence_report(&pr, &qs, 10).unwrap();
        assert_eq!(r.rows[0], DivergenceRow { node: 3, rank_pr: 4, rank_qs: 1, delta: 3 });
        assert_eq!(r.flagged, vec![3, 2]);
    }

    #[test]
    fn pairwise_order() {
        let a = Ranking::from_scores(&[3.0, 2.0, 1.0, 0.0]);
        let b = Ranking::from_scores(&[9.0, 5.0, 7.0, 0.0]);
        assert!(same_pairwise_order(&[a.clone(), b.clone()], &[0, 1, 3]));
        assert!(!same_pairwise_order(&[a, b], &[1, 2]));
    }

    proptest! {
        #[test]
        fn merge_sort_matches_brute_force(pairs in prop::collection::vec((0u8..12, 0u8..12), 2..200)) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match kendall_tau(&a, &b) {
                Ok(t) => prop_assert!((t.value - brute_tau(&a, &b)).abs() < 1e-12),
                Err(Error::DegenerateRanking) => {
                    let la = Ranking::from_scores(&a);
                    let lb = Ranking::from_scores(&b);
                    prop_assert!(la.groups.len() == 1 || lb.groups.len() == 1);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn tie_free_is_exact(perm in Just((0..150usize).collect::<Vec<_>>()).prop_shuffle()) {
            let a: Vec<f64> = (0..150).map(|v| v as f64).collect();
            let b: Vec<f64> = perm.iter().map(|&v| v as f64).collect();
            let t = kendall_tau(&a, &b).unwrap();
            prop_assert_eq!(t.variant, TauVariant::A);
            prop_assert!((t.value - brute_tau(&a, &b)).abs() < 1e-12);
            let rev: Vec<f64> = b.iter().map(|v| -v).collect();
            prop_assert!((kendall_tau(&a, &rev).unwrap().value + t.value).abs() < 1e-12);
            prop_assert_eq!(kendall_tau(&b, &a).unwrap().value, t.value);
        }
    }
}
