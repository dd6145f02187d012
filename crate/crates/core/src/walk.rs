//! Survival-conditioned transition kernels and their Monte-Carlo check.
//!
//! `Ť⁽ᴺ⁾_ij = P(X₁ = j | X₀ = i, X₁..X_N ∈ ESCC) = T_ij s_{N−1,j} / s_{N,i}` with
//! survival vectors `s_k = Tᵏ1`. As `N → ∞` the kernel tends to the twisted
//! kernel `T_ij u_j / (λ₁ u_i)`.
//!
//! # Simulator randomness
//!
//! Walks are grouped in batches of [`BATCH`] consecutive walks. Batch `b` draws
//! from ChaCha8 (`rand_chacha` 0.3) seeded with `ChaCha8Rng::seed_from_u64(seed)`
//! and switched to stream `b` with `set_stream(b)`. Each step consumes one
//! `f64` from `Rng::gen::<f64>()` (53 high bits of a `u64`). Batches are
//! independent, so results are bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::block::SparseBlock;
use crate::error::{Error, Result};
use crate::spectral::{DiagonalTwist, TwistedKernel};

pub const BATCH: u64 = 1 << 16;

/// `[s_0, …, s_N]` with `s_0 = 1` and `s_{k+1} = T s_k`.
pub fn survival_vectors(t: &SparseBlock, horizon: usize) -> Vec<Vec<f64>> {
    let n = t.n_rows();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(vec![1.0; n]);
    for k in 0..horizon {
        let mut next = vec![0.0; n];
        t.right_mul(&out[k], &mut next);
        out.push(next);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ConditionedKernel<'a> {
    pub horizon: usize,
    pub kernel: DiagonalTwist<'a>,
}

/// `Ť⁽ᴺ⁾` built from `N` matrix-vector products. The survival vector is
/// rescaled at each step; the kernel only depends on the direction of
/// `s_{N−1}`, so this avoids underflow at long horizons.
pub fn conditioned_kernel(t: &SparseBlock, horizon: usize) -> Result<ConditionedKernel<'_>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if !t.is_square() {
        return Err(Error::DomainMismatch { left: t.n_rows(), right: t.n_cols() });
    }
    let n = t.n_rows();
    let mut prev = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 1..horizon {
        t.right_mul(&prev, &mut next);
        let scale = next.iter().copied().fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::DeadNode { node: 0 });
        }
        next.iter_mut().for_each(|v| *v /= scale);
        std::mem::swap(&mut prev, &mut next);
    }
    t.right_mul(&prev, &mut next);
    if let Some(node) = next.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DeadNode { node });
    }
    let row_scale = next.iter().map(|v| 1.0 / v).collect();
    Ok(ConditionedKernel { horizon, kernel: DiagonalTwist::new(t, row_scale, prev) })
}

/// `max_ij |Ť⁽ᴺ⁾_ij − Ť_ij|`.
pub fn kernel_limit_gap(t: &SparseBlock, horizon: usize, twisted: &TwistedKernel<'_>) -> Result<f64> {
    let k = conditioned_kernel(t, horizon)?;
    if twisted.kernel.n() != t.n_rows() {
        return Err(Error::DomainMismatch { left: t.n_rows(), right: twisted.kernel.n() });
    }
    let mut gap = 0.0f64;
    for i in 0..t.n_rows() {
        let (a, b) = (k.kernel.dense_row(i), twisted.kernel.dense_row(i));
        gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(gap, f64::max);
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub i: usize,
    pub j: usize,
    pub horizon: usize,
    pub samples: u64,
    pub hits: u64,
    pub survivors: u64,
    pub estimate: f64,
    /// Binomial standard error `sqrt(p̂(1 − p̂)/survivors)`.
    pub std_error: f64,
    pub seed: u64,
}

/// Per-row sampler: uniform part first, then explicit entries, remainder exits.
struct RowSampler {
    uniform_value: Vec<f64>,
    uniform_mass: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    cumulative: Vec<f64>,
}

impl RowSampler {
    fn new(t: &SparseBlock) -> Self {
        let n = t.n_rows();
        let (mut offsets, mut cols, mut cumulative) = (vec![0], Vec::new(), Vec::new());
        let mut uniform_value = Vec::with_capacity(n);
        let mut uniform_mass = Vec::with_capacity(n);
        for i in 0..n {
            let u = t.uniform_value(i);
            let mass = u * t.n_cols() as f64;
            uniform_value.push(u);
            uniform_mass.push(mass);
            let mut acc = mass;
            for (j, v) in t.explicit_row(i) {
                acc += v;
                cols.push(j);
                cumulative.push(acc);
            }
            offsets.push(cols.len());
        }
        RowSampler { uniform_value, uniform_mass, offsets, cols, cumulative }
    }

    fn step(&self, i: usize, u: f64, n: usize) -> Option<usize> {
        if u < self.uniform_mass[i] {
            return Some(((u / self.uniform_value[i]) as usize).min(n - 1));
        }
        let range = self.offsets[i]..self.offsets[i + 1];
        let k = self.cumulative[range.clone()].partition_point(|&c| c <= u);
        (k < range.len()).then(|| self.cols[range.start + k])
    }
}

/// Runs `samples` walks of `horizon` steps from `i`; a step leaving the block
/// ends the walk as absorbed. Returns one estimate per target `j`.
pub fn simulate_conditioned(
    t: &SparseBlock,
    i: usize,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<WalkEstimate>> {
    let n = t.n_rows();
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if i >= n {
        return Err(Error::NodeOutOfRange { index: i, n });
    }
    let sampler = RowSampler::new(t);
    let batches = samples.div_ceil(BATCH);
    let (survivors, hits) = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH.min(samples - b * BATCH);
            let mut hits = vec![0u64; n];
            let mut survivors = 0u64;
            'walk: for _ in 0..count {
                let mut x = i;
                let mut first = usize::MAX;
                for step in 0..horizon {
                    match sampler.step(x, rng.gen::<f64>(), n) {
                        Some(next) => {
                            if step == 0 {
                                first = next;
                            }
                            x = next;
                        }
                        None => continue 'walk,
                    }
                }
                survivors += 1;
                hits[first] += 1;
            }
            (survivors, hits)
        })
        .reduce(
            || (0, vec![0u64; n]),
            |(sa, mut ha), (sb, hb)| {
                ha.iter_mut().zip(&hb).for_each(|(a, b)| *a += b);
                (sa + sb, ha)
            },
        );
    if survivors == 0 {
        return Err(Error::NoSurvivors { samples, horizon });
    }
    Ok(hits
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let p = h as f64 / survivors as f64;
            WalkEstimate {
                i,
                j,
                horizon,
                samples,
                hits: h,
                survivors,
                estimate: p,
                std_error: (p * (1.0 - p) / survivors as f64).sqrt(),
                seed,
            }
        })
        .collect())
}

/// One row of the simulation-versus-formula table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkComparison {
    pub i: usize,
    pub j: usize,
    pub horizon: usize,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `(estimate − analytic)/std_error`; zero when both agree exactly.
    pub z_score: f64,
}

impl WalkComparison {
    /// Within `k` standard errors; a zero-variance estimate must match exactly.
    pub fn within(&self, k: f64) -> bool {
        if self.std_error == 0.0 {
            (self.estimate - self.analytic).abs() <= 1e-12
        } else {
            self.z_score.abs() <= k
        }
    }
}

pub fn compare_walks(t: &SparseBlock, i: usize, horizon: usize, samples: u64, seed: u64) -> Result<Vec<WalkComparison>> {
    let kernel = conditioned_kernel(t, horizon)?;
    let row = kernel.kernel.dense_row(i);
    Ok(simulate_conditioned(t, i, horizon, samples, seed)?
        .into_iter()
        .map(|e| {
            let analytic = row[e.j];
            let diff = e.estimate - analytic;
            let z_score = if e.std_error > 0.0 {
                diff / e.std_error
            } else if diff.abs() <= 1e-12 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            WalkComparison { i, j: e.j, horizon, analytic, estimate: e.estimate, std_error: e.std_error, z_score }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::split_escc_pout;
    use crate::fixtures;
    use crate::spectral::{quasi_stationary, twisted_kernel, SolverOptions};

    fn g3_t() -> SparseBlock {
        split_escc_pout(&fixtures::g3()).unwrap().t
    }

    fn g4_t() -> SparseBlock {
        split_escc_pout(&fixtures::g4()).unwrap().t
    }

    fn stochastic() -> SparseBlock {
        SparseBlock::from_dense(&[vec![0.2, 0.8, 0.0], vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn survival_g3() {
        let s = survival_vectors(&g3_t(), 2);
        assert_eq!(s[1], vec![1.0, 0.5]);
        assert_eq!(s[2], vec![0.5, 0.5]);
    }

    #[test]
    fn survival_is_monotone_and_flat_when_stochastic() {
        let s = survival_vectors(&g4_t(), 30);
        for w in s.windows(2) {
            assert!(w[1].iter().zip(&w[0]).all(|(a, b)| a <= b));
        }
        let s = survival_vectors(&stochastic(), 10);
        assert!(s.iter().all(|v| v.iter().all(|&x| (x - 1.0).abs() < 1e-15)));
    }

    #[test]
    fn scaled_survival_tracks_u_tilde() {
        let t = g4_t();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        let s = survival_vectors(&t, 200);
        let scaled: Vec<f64> = s[200].iter().map(|v| v / r.lambda1.powi(200)).collect();
        // ũ = u / (π̃u)
        let norm: f64 = r.pi_tilde.scores.iter().zip(&r.u).map(|(p, u)| p * u).sum();
        for (a, u) in scaled.iter().zip(&r.u) {
            assert!((a - u / norm).abs() < 1e-8, "{a} vs {}", u / norm);
        }
    }

    #[test]
    fn horizon_one_is_row_renormalization() {
        let t = g3_t();
        let k = conditioned_kernel(&t, 1).unwrap();
        assert_eq!(k.kernel.to_dense().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn stochastic_kernel_is_unchanged() {
        let t = stochastic();
        for n in [1, 5, 40] {
            let k = conditioned_kernel(&t, n).unwrap();
            assert!((k.kernel.to_dense() - t.to_dense()).amax() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let t = g4_t();
        for n in [1, 2, 3, 10, 64, 500] {
            let k = conditioned_kernel(&t, n).unwrap();
            assert!(k.kernel.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn dead_node_is_reported() {
        let t = SparseBlock::from_dense(&[vec![0.0, 0.5], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(conditioned_kernel(&t, 1), Err(Error::DeadNode { node: 1 })));
    }

    #[test]
    fn limit_gap_g3_and_stochastic() {
        let t = g3_t();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        let tw = twisted_kernel(&t, &r.u, r.lambda1).unwrap();
        assert!(kernel_limit_gap(&t, 1, &tw).unwrap() < 1e-9);
        assert!(kernel_limit_gap(&t, 50, &tw).unwrap() <= 1e-9);

        let s = stochastic();
        let tw = twisted_kernel(&s, &[1.0; 3], 1.0).unwrap();
        for n in [1, 7, 33] {
            assert!(kernel_limit_gap(&s, n, &tw).unwrap() < 1e-15);
        }
    }

    #[test]
    fn limit_gap_shrinks_on_g4() {
        let t = g4_t();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        let tw = twisted_kernel(&t, &r.u, r.lambda1).unwrap();
        let a = kernel_limit_gap(&t, 32, &tw).unwrap();
        let b = kernel_limit_gap(&t, 64, &tw).unwrap();
        assert!(b <= a);
    }

    #[test]
    fn simulation_is_deterministic() {
        let t = g4_t();
        let a = simulate_conditioned(&t, 1, 3, 200_000, 11).unwrap();
        let b = simulate_conditioned(&t, 1, 3, 200_000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_conditioned(&t, 1, 3, 200_000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simulation_matches_formula_on_g3() {
        let t = g3_t();
        for c in compare_walks(&t, 0, 3, 1_000_000, 7).unwrap() {
            assert!(c.within(3.0), "{c:?}");
        }
    }

    #[test]
    fn unconditioned_case_matches_rows() {
        let t = stochastic();
        for c in compare_walks(&t, 1, 4, 200_000, 3).unwrap() {
            assert!(c.within(3.0), "{c:?}");
            assert!((c.analytic - t.entry(1, c.j)).abs() < 1e-15);
        }
    }

    #[test]
    fn simulation_validates_inputs() {
        let t = g4_t();
        assert!(matches!(simulate_conditioned(&t, 0, 3, 0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(simulate_conditioned(&t, 9, 3, 10, 1), Err(Error::NodeOutOfRange { .. })));
        let leaky = SparseBlock::from_dense(&[vec![1e-9]]).unwrap();
        assert!(matches!(simulate_conditioned(&leaky, 0, 3, 100, 1), Err(Error::NoSurvivors { .. })));
    }
}
