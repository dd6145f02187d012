mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use quasirank::decomposition::{split_escc_pout, Part};
use quasirank::fixtures;
use quasirank::graph::parse_edge_str;
use quasirank::rank::kendall_tau;
use quasirank::spectral::{pagerank, twisted_kernel};
use quasirank::walk::{conditioned_kernel, survival_vectors};
use quasirank::{EdgeList, QsMeasures, SolverOptions, WebGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OPTS: SolverOptions = SolverOptions { tol: 1e-12, max_iter: 10_000_000 };

fn small_graph() -> impl Strategy<Value = WebGraph> {
    (1usize..16).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |edges| fixtures::graph(n, &edges))
    })
}

/// `reach[a][b]`: a path of length ≥ 0 leads from `a` to `b` along real edges.
fn closure(g: &WebGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut reach = vec![vec![false; n]; n];
    for (a, row) in reach.iter_mut().enumerate() {
        row[a] = true;
        for &b in g.successors(a) {
            row[b] = true;
        }
    }
    for k in 0..n {
        for a in 0..n {
            if reach[a][k] {
                for b in 0..n {
                    reach[a][b] |= reach[k][b];
                }
            }
        }
    }
    reach
}

proptest! {
    #[test]
    fn escc_matches_reachability(g in small_graph()) {
        let n = g.node_count();
        let reach = closure(&g);
        let d = split_escc_pout(&g).unwrap();
        let dangling = g.dangling();
        let in_escc: Vec<bool> = (0..n).map(|v| d.part[v] == Part::Escc).collect();
        if dangling.is_empty() {
            let largest = (0..n).map(|a| (0..n).filter(|&b| reach[a][b] && reach[b][a]).count()).max().unwrap();
            prop_assert_eq!(d.escc.len(), largest);
            for &a in &d.escc {
                for &b in &d.escc {
                    prop_assert!(reach[a][b]);
                }
            }
        } else {
            for v in 0..n {
                prop_assert_eq!(in_escc[v], dangling.iter().any(|&x| reach[v][x]), "node {}", v);
            }
        }
        for v in 0..n {
            if !in_escc[v] {
                let reaches_core = d.escc.iter().any(|&x| reach[v][x]);
                prop_assert_eq!(d.part[v] == Part::Pout, !reaches_core, "node {}", v);
            }
        }
    }

    #[test]
    fn render_parse_round_trip(
        labels in prop::collection::hash_set("[a-z0-9_./-]{1,6}", 1..12),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..30),
    ) {
        let labels: Vec<String> = labels.into_iter().collect();
        let pairs: Vec<(usize, usize)> = picks.iter().map(|(a, b)| (a.index(labels.len()), b.index(labels.len()))).collect();
        let list = EdgeList::with_labels(labels, pairs).unwrap();
        let back = parse_edge_str(&list.render()).unwrap();
        prop_assert_eq!(back.edges().len(), list.edges().len());
        for (&(a, b), &(c, e)) in list.edges().iter().zip(back.edges()) {
            prop_assert_eq!(&list.labels()[a], &back.labels()[c]);
            prop_assert_eq!(&list.labels()[b], &back.labels()[e]);
        }
        prop_assert_eq!(parse_edge_str(&back.render()).unwrap(), back);
    }

    #[test]
    fn pagerank_matches_dense_solve(g in small_graph(), c in 0.05f64..0.95) {
        let n = g.node_count();
        let p = DMatrix::from_fn(n, n, |i, j| g.transition_prob(i, j).unwrap());
        let a = (DMatrix::identity(n, n) - p * c).transpose();
        let x = a.lu().solve(&DVector::from_element(n, (1.0 - c) / n as f64)).unwrap();
        let pr = pagerank(&g, c, OPTS).unwrap();
        for k in 0..n {
            prop_assert!((pr.scores[k] - x[k]).abs() < 1e-9, "{} vs {}", pr.scores[k], x[k]);
        }
    }

    #[test]
    fn survival_shrinks_and_kernels_are_stochastic(seed in 0u64..10_000, n in 1usize..12, horizon in 1usize..40) {
        let t = common::random_substochastic(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let s = survival_vectors(&t, horizon);
        for w in s.windows(2) {
            prop_assert!(w[1].iter().zip(&w[0]).all(|(a, b)| *a <= *b + 1e-15));
        }
        let k = conditioned_kernel(&t, horizon).unwrap();
        for sum in k.kernel.row_sums() {
            prop_assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pi_check_is_stationary_for_twisted_kernel(seed in 0u64..10_000, n in 1usize..12) {
        let t = common::random_substochastic(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let qs = QsMeasures::compute(&t, None, OPTS).unwrap();
        let tk = twisted_kernel(&t, &qs.right.u, qs.right.lambda1).unwrap();
        let mut out = vec![0.0; n];
        tk.kernel.left_mul(&qs.pi_check.scores, &mut out);
        prop_assert!(common::max_abs_diff(&out, &qs.pi_check.scores) < 1e-9);
    }

    #[test]
    fn tau_symmetric_and_reversible(xs in prop::collection::vec(-1e3f64..1e3, 2..60), ys in prop::collection::vec(-1e3f64..1e3, 60)) {
        let ys = &ys[..xs.len()];
        if let (Ok(a), Ok(b)) = (kendall_tau(&xs, ys), kendall_tau(ys, &xs)) {
            prop_assert!((a.value - b.value).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a.value));
        }
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        if let Ok(t) = kendall_tau(&xs, &neg) {
            prop_assert!((t.value + 1.0).abs() < 1e-12);
        }
    }
}
