//! Random instances and dense reference solutions shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use quasirank::fixtures;
use quasirank::{SparseBlock, WebGraph};
use rand::Rng;

/// Irreducible substochastic block: a ring plus random extra entries, with
/// row sums in `[0.6, 1]` and at least one row leaking 10% or more.
pub fn random_substochastic<R: Rng>(rng: &mut R, n: usize) -> SparseBlock {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % n] = rng.gen_range(0.1..1.0);
        for v in row.iter_mut() {
            if rng.gen_bool(0.35) {
                *v += rng.gen_range(0.1..1.0);
            }
        }
        let target = rng.gen_range(0.6..1.0);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v *= target / s);
    }
    let leaky = rng.gen_range(0..n);
    let s: f64 = rows[leaky].iter().sum();
    rows[leaky].iter_mut().for_each(|v| *v *= 0.9 / s.max(0.9));
    SparseBlock::from_dense(&rows).expect("valid block")
}

/// Random web graph with dangling nodes, self-loops and multi-edges removed
/// by the builder.
pub fn random_graph<R: Rng>(rng: &mut R, max_n: usize) -> WebGraph {
    let n = rng.gen_range(1..=max_n);
    let dangling_p = rng.gen_range(0.0..0.3);
    let mut edges = Vec::new();
    for i in 0..n {
        if rng.gen_bool(dangling_p) {
            continue;
        }
        for _ in 0..rng.gen_range(1..=4) {
            edges.push((i, rng.gen_range(0..n)));
        }
    }
    fixtures::graph(n, &edges)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn normalized(v: DVector<f64>) -> Vec<f64> {
    let s = v.sum();
    v.iter().map(|x| x / s).collect()
}

/// Unit vector spanning the (numerical) null space of `m`, sign-fixed to a
/// positive sum.
fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let k = svd.singular_values.imin();
    let v = v_t.row(k).transpose();
    if v.sum() < 0.0 {
        -v
    } else {
        v
    }
}

/// Dense reference for every ESCC measure of `t`.
pub struct DenseOracle {
    pub pi_hat: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub pi_tilde: Vec<f64>,
    /// Normalized to `1ᵀu = n`.
    pub u: Vec<f64>,
    pub pi_check: Vec<f64>,
    pub lambda1: f64,
}

impl DenseOracle {
    pub fn new(t: &SparseBlock) -> Self {
        let m = t.to_dense();
        let n = m.nrows();
        let eye = DMatrix::<f64>::identity(n, n);

        let occupation = (&eye - &m).transpose().lu().solve(&DVector::from_element(n, 1.0)).expect("I − T invertible");
        let pi_hat = normalized(occupation);

        let mut bar = m.clone();
        for i in 0..n {
            let s = bar.row(i).sum();
            bar.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let pi_bar = normalized(null_vector(&(bar.transpose() - &eye)));

        let lambda1 = m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let left = normalized(null_vector(&(m.transpose() - &eye * lambda1)));
        let right = null_vector(&(&m - &eye * lambda1));
        let u: Vec<f64> = right.iter().map(|x| x * n as f64 / right.sum()).collect();
        let weighted: f64 = left.iter().zip(&u).map(|(p, x)| p * x).sum();
        let pi_check: Vec<f64> = left.iter().zip(&u).map(|(p, x)| p * x / weighted).collect();
        DenseOracle { pi_hat, pi_bar, pi_tilde: left, u, pi_check, lambda1 }
    }
}
