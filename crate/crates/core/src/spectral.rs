//! PageRank and the four quasi-stationarity centrality measures of the
//! substochastic ESCC block `T`.
//!
//! | measure    | definition                                         |
//! |------------|----------------------------------------------------|
//! | `pi_hat`   | `1ᵀ[I−T]⁻¹`, normalized (occupation before exit)   |
//! | `pi_bar`   | stationary law of the row-renormalized `T̄`         |
//! | `pi_tilde` | left Perron vector of `T`, `π̃T = λ₁π̃`              |
//! | `pi_check` | `π̃ ⊙ ũ`, stationary law of the twisted kernel      |
//!
//! All iterations start from the uniform vector. Power iterations switch to
//! the half-damped update `x ← (x + xT)/‖x + xT‖₁` when the plain update
//! stops making progress (periodic blocks); it has the same fixed points.

use log::debug;
use serde::Serialize;

use crate::block::SparseBlock;
use crate::error::{Error, Result};
use crate::graph::{NodeId, WebGraph};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
const STALL_WINDOW: usize = 100;
const DENSE_HINT: &str = "; lambda1 is too close to 1 for the Neumann series, use the dense solver (n_T <= 2000)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Measure {
    Pagerank { c: f64 },
    PagerankEscc { c: f64 },
    PiHat,
    PiBar,
    PiTilde,
    PiCheck,
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Pagerank { .. } => "pagerank",
            Measure::PagerankEscc { .. } => "pagerank_escc",
            Measure::PiHat => "pi_hat",
            Measure::PiBar => "pi_bar",
            Measure::PiTilde => "pi_tilde",
            Measure::PiCheck => "pi_check",
        }
    }

    /// Whether the scores range over the whole graph rather than the ESCC.
    pub fn is_full_graph(&self) -> bool {
        matches!(self, Measure::Pagerank { .. })
    }
}

/// Nonnegative scores summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector {
    pub measure: Measure,
    pub scores: Vec<f64>,
}

impl CentralityVector {
    /// Normalizes `raw` to unit sum.
    pub fn normalized(measure: Measure, mut raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || raw.iter().any(|&v| v < 0.0) {
            return Err(Error::Inconsistent(format!("{} has no positive finite mass", measure.name())));
        }
        raw.iter_mut().for_each(|v| *v /= sum);
        Ok(CentralityVector { measure, scores: raw })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Restriction to `nodes`, renormalized; used to compare full-graph
    /// PageRank against ESCC measures.
    pub fn restrict(&self, nodes: &[NodeId]) -> Result<Self> {
        Self::normalized(self.measure, nodes.iter().map(|&v| self.scores[v]).collect())
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Damped PageRank over the full graph with uniform teleportation.
pub fn pagerank(g: &WebGraph, c: f64, opts: SolverOptions) -> Result<CentralityVector> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("damping {c} outside (0, 1)")));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let teleport = (1.0 - c) / n as f64;
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        g.left_mul_p(&x, &mut y);
        y.iter_mut().for_each(|v| *v = c * *v + teleport);
        residual = l1_diff(&x, &y);
        std::mem::swap(&mut x, &mut y);
        if residual <= opts.tol {
            return CentralityVector::normalized(Measure::Pagerank { c }, x);
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual, hint: "" })
}

/// Blocks up to this size fall back to a dense LU solve when the Neumann
/// series would need more than `max_iter` terms.
pub const DENSE_FALLBACK: usize = 2000;

/// `Σ_k 1ᵀ(scale·T)^k`. Stops once the geometric tail estimate
/// `inc·ρ/(1−ρ)` is below `tol` of the sum, and gives up early when the
/// observed rate `ρ` predicts more than `max_iter` terms.
fn neumann_row_sum(t: &SparseBlock, scale: f64, opts: SolverOptions) -> Result<Vec<f64>> {
    const PROBE: usize = 1000;
    let n = t.n_rows();
    let mut v = vec![1.0; n];
    let mut acc = v.clone();
    let mut next = vec![0.0; n];
    let mut prev_inc = n as f64;
    let mut probe_inc = prev_inc;
    let mut total = prev_inc;
    let mut inc = prev_inc;
    for k in 1..=opts.max_iter {
        t.left_mul(&v, &mut next);
        if scale != 1.0 {
            next.iter_mut().for_each(|x| *x *= scale);
        }
        std::mem::swap(&mut v, &mut next);
        inc = v.iter().sum();
        acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
        total += inc;
        let rho = inc / prev_inc;
        prev_inc = inc;
        if inc == 0.0 || (rho < 1.0 && inc * rho / (1.0 - rho) <= opts.tol * total) {
            return Ok(acc);
        }
        if k % PROBE == 0 {
            let rate = (inc / probe_inc).powf(1.0 / PROBE as f64);
            probe_inc = inc;
            let needed = (opts.tol * total * (1.0 - rate) / inc).ln() / rate.ln();
            if rate >= 1.0 || k as f64 + needed > opts.max_iter as f64 {
                return Err(Error::NotConverged { iterations: k, residual: inc / total, hint: DENSE_HINT });
            }
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: inc / total, hint: DENSE_HINT })
}

/// Dense `1ᵀ[I − scale·T]⁻¹`.
fn dense_row_sum(t: &SparseBlock, scale: f64) -> Result<Vec<f64>> {
    let n = t.n_rows();
    let a = (nalgebra::DMatrix::identity(n, n) - t.to_dense() * scale).transpose();
    let x = a
        .lu()
        .solve(&nalgebra::DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::Singular("I − T".into()))?;
    Ok(x.iter().copied().collect())
}

fn row_sum_with_fallback(t: &SparseBlock, scale: f64, opts: SolverOptions) -> Result<Vec<f64>> {
    match neumann_row_sum(t, scale, opts) {
        Err(Error::NotConverged { iterations, .. }) if t.n_rows() <= DENSE_FALLBACK => {
            debug!("Neumann series stopped after {iterations} terms; solving densely");
            dense_row_sum(t, scale)
        }
        other => other,
    }
}

fn check_square(t: &SparseBlock) -> Result<()> {
    if !t.is_square() {
        return Err(Error::DomainMismatch { left: t.n_rows(), right: t.n_cols() });
    }
    if t.n_rows() == 0 {
        return Err(Error::NoRecurrentCore);
    }
    Ok(())
}

/// Pseudo-stationary distribution `π̂ = 1ᵀ[I−T]⁻¹ / 1ᵀ[I−T]⁻¹1`.
pub fn pseudo_stationary(t: &SparseBlock, opts: SolverOptions) -> Result<CentralityVector> {
    check_square(t)?;
    if t.row_sums().iter().all(|&s| s >= 1.0 - 1e-14) {
        return Err(Error::Precondition("T is stochastic, so 1ᵀ[I−T]⁻¹ diverges".into()));
    }
    CentralityVector::normalized(Measure::PiHat, neumann_row_sum(t, 1.0, opts)?)
}

/// Dense LU route to `π̂`, for blocks whose Perron root is too close to 1.
pub fn pseudo_stationary_dense(t: &SparseBlock) -> Result<CentralityVector> {
    check_square(t)?;
    CentralityVector::normalized(Measure::PiHat, dense_row_sum(t, 1.0)?)
}

/// [`pseudo_stationary`], switching to the dense solve for blocks of at most
/// [`DENSE_FALLBACK`] states when the series converges too slowly.
pub fn pseudo_stationary_auto(t: &SparseBlock, opts: SolverOptions) -> Result<CentralityVector> {
    check_square(t)?;
    if t.row_sums().iter().all(|&s| s >= 1.0 - 1e-14) {
        return Err(Error::Precondition("T is stochastic, so 1ᵀ[I−T]⁻¹ diverges".into()));
    }
    CentralityVector::normalized(Measure::PiHat, row_sum_with_fallback(t, 1.0, opts)?)
}

/// Normalized ESCC part of PageRank, `π̂_T(c) ∝ 1ᵀ[I − cT]⁻¹`.
pub fn pagerank_escc(t: &SparseBlock, c: f64, opts: SolverOptions) -> Result<CentralityVector> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("damping {c} outside (0, 1)")));
    }
    check_square(t)?;
    CentralityVector::normalized(Measure::PagerankEscc { c }, row_sum_with_fallback(t, c, opts)?)
}

/// `T̄_ij = T_ij / [T1]_i`.
pub fn bar_transition(t: &SparseBlock) -> Result<SparseBlock> {
    let sums = t.row_sums();
    if let Some(row) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroRowSum { row });
    }
    let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s).collect();
    Ok(t.scale_rows(&inv))
}

/// `T̄ − s(T̄ − T)`: every exit probability multiplied by `s`.
pub fn exit_scaled(t: &SparseBlock, s: f64) -> Result<SparseBlock> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("exit scale {s} outside [0, 1]")));
    }
    let sums = t.row_sums();
    if let Some(row) = sums.iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroRowSum { row });
    }
    let factor: Vec<f64> = sums.iter().map(|&rs| (1.0 - s) / rs + s).collect();
    Ok(t.scale_rows(&factor))
}

/// Outcome of a Perron power iteration.
#[derive(Debug, Clone)]
pub struct PerronVector {
    /// Unit-L1 nonnegative vector.
    pub vector: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// Final L1 change of the iterate.
    pub residual: f64,
    /// Whether the half-damped fallback was engaged.
    pub damped: bool,
}

/// Power iteration for the Perron pair of a nonnegative operator, starting
/// from uniform. `apply(x, y)` must write the image of `x` into `y`.
pub fn perron_iteration<F>(n: usize, apply: F, opts: SolverOptions) -> Result<PerronVector>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut damped = false;
    let mut checkpoint = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        apply(&x, &mut y);
        let image: f64 = y.iter().sum();
        if !(image > 0.0) || !image.is_finite() {
            return Err(Error::Precondition("operator annihilates the iterate (Perron root is zero)".into()));
        }
        if damped {
            let norm = 1.0 + image;
            y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi = (*yi + xi) / norm);
        } else {
            y.iter_mut().for_each(|v| *v /= image);
        }
        change = l1_diff(&x, &y);
        let lambda_change = (image - lambda).abs();
        std::mem::swap(&mut x, &mut y);
        lambda = image;
        if change <= opts.tol && lambda_change <= opts.tol {
            // One more application so that λ is the image norm of the final iterate.
            apply(&x, &mut y);
            let lambda: f64 = y.iter().sum();
            return Ok(PerronVector { vector: x, lambda, iterations: it, residual: change, damped });
        }
        if !damped && it % STALL_WINDOW == 0 {
            if change > 0.99 * checkpoint {
                damped = true;
            }
            checkpoint = change;
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: change, hint: "" })
}

/// Stationary distribution `π̄` of a stochastic block.
pub fn bar_stationary(t_bar: &SparseBlock, opts: SolverOptions) -> Result<CentralityVector> {
    check_square(t_bar)?;
    if t_bar.row_sums().iter().any(|&s| (s - 1.0).abs() > 1e-12) {
        return Err(Error::Precondition("T̄ is not row-stochastic".into()));
    }
    let p = perron_iteration(t_bar.n_rows(), |x, y| t_bar.left_mul(x, y), opts)?;
    CentralityVector::normalized(Measure::PiBar, p.vector)
}

/// Perron eigenvalue, quasi-stationary distribution and main-normalized right
/// eigenvector (`1ᵀu = n_T`).
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub pi_tilde: CentralityVector,
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSidecar {
    pub lambda1: f64,
    pub lambda1_from_exit: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Left Perron pair of `T`: `π̃T = λ₁π̃`, `π̃1 = 1`.
pub fn quasi_stationary(t: &SparseBlock, opts: SolverOptions) -> Result<SpectralResult> {
    check_square(t)?;
    let left = perron_iteration(t.n_rows(), |x, y| t.left_mul(x, y), opts)?;
    let right = perron_iteration(t.n_rows(), |x, y| t.right_mul(x, y), opts)?;
    let n_t = t.n_rows() as f64;
    Ok(SpectralResult {
        lambda1: left.lambda,
        pi_tilde: CentralityVector::normalized(Measure::PiTilde, left.vector)?,
        u: right.vector.iter().map(|v| v * n_t).collect(),
        iterations: left.iterations + right.iterations,
        residual: left.residual.max(right.residual),
    })
}

/// `λ₁ = 1 − π̃ R1`.
pub fn lambda_from_exit(pi_tilde: &[f64], exit: &[f64]) -> f64 {
    1.0 - pi_tilde.iter().zip(exit).map(|(p, e)| p * e).sum::<f64>()
}

/// Right Perron vector in its three normalizations.
#[derive(Debug, Clone)]
pub struct RightEigen {
    pub lambda1: f64,
    /// `1ᵀu = n_T`.
    pub u: Vec<f64>,
    /// `π̄ū = 1`.
    pub u_bar: Vec<f64>,
    /// `π̃ũ = 1`.
    pub u_tilde: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn right_eigenvector(
    t: &SparseBlock,
    pi_bar: &[f64],
    pi_tilde: &[f64],
    opts: SolverOptions,
) -> Result<RightEigen> {
    check_square(t)?;
    let n = t.n_rows();
    if pi_bar.len() != n || pi_tilde.len() != n {
        return Err(Error::DomainMismatch { left: n, right: pi_bar.len().min(pi_tilde.len()) });
    }
    let p = perron_iteration(n, |x, y| t.right_mul(x, y), opts)?;
    let u: Vec<f64> = p.vector.iter().map(|v| v * n as f64).collect();
    let (sb, st) = (dot(pi_bar, &u), dot(pi_tilde, &u));
    Ok(RightEigen {
        lambda1: p.lambda,
        u_bar: u.iter().map(|v| v / sb).collect(),
        u_tilde: u.iter().map(|v| v / st).collect(),
        u,
        iterations: p.iterations,
        residual: p.residual,
    })
}

/// Survival-conditioned kernel `K_ij = T_ij · col_j · row_i`; both the twisted
/// kernel and the finite-horizon conditioned kernels have this shape.
#[derive(Debug, Clone)]
pub struct DiagonalTwist<'a> {
    base: &'a SparseBlock,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl<'a> DiagonalTwist<'a> {
    pub fn new(base: &'a SparseBlock, row_scale: Vec<f64>, col_scale: Vec<f64>) -> Self {
        DiagonalTwist { base, row_scale, col_scale }
    }

    pub fn n(&self) -> usize {
        self.base.n_rows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.base.entry(i, j) * self.col_scale[j] * self.row_scale[i]
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut row = self.base.dense_row(i);
        row.iter_mut()
            .zip(&self.col_scale)
            .for_each(|(v, c)| *v *= c * self.row_scale[i]);
        row
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.base.right_mul(&self.col_scale, &mut out);
        out.iter_mut().zip(&self.row_scale).for_each(|(v, r)| *v *= r);
        out
    }

    /// `out = x · K`.
    pub fn left_mul(&self, x: &[f64], out: &mut [f64]) {
        let z: Vec<f64> = x.iter().zip(&self.row_scale).map(|(a, b)| a * b).collect();
        self.base.left_mul(&z, out);
        out.iter_mut().zip(&self.col_scale).for_each(|(v, c)| *v *= c);
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n(), self.n(), |i, j| self.entry(i, j))
    }
}

/// `Ť_ij = T_ij u_j / (λ₁ u_i)`.
#[derive(Debug, Clone)]
pub struct TwistedKernel<'a> {
    pub lambda1: f64,
    pub kernel: DiagonalTwist<'a>,
}

pub fn twisted_kernel<'a>(t: &'a SparseBlock, u: &[f64], lambda1: f64) -> Result<TwistedKernel<'a>> {
    check_square(t)?;
    if u.len() != t.n_rows() {
        return Err(Error::DomainMismatch { left: t.n_rows(), right: u.len() });
    }
    if let Some(i) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Precondition(format!("u[{i}] = {} is not positive", u[i])));
    }
    if !(lambda1 > 0.0 && lambda1 <= 1.0 + 1e-12) {
        return Err(Error::Precondition(format!("lambda1 = {lambda1} outside (0, 1]")));
    }
    let row_scale = u.iter().map(|&ui| 1.0 / (lambda1 * ui)).collect();
    Ok(TwistedKernel { lambda1, kernel: DiagonalTwist::new(t, row_scale, u.to_vec()) })
}

/// `π̌_i = π̃_i ũ_i`, the stationary law of the twisted kernel.
pub fn check_stationary(pi_tilde: &[f64], u_tilde: &[f64]) -> Result<CentralityVector> {
    if pi_tilde.len() != u_tilde.len() {
        return Err(Error::DomainMismatch { left: pi_tilde.len(), right: u_tilde.len() });
    }
    CentralityVector::normalized(
        Measure::PiCheck,
        pi_tilde.iter().zip(u_tilde).map(|(p, u)| p * u).collect(),
    )
}

/// Every ESCC measure of one block, computed once.
#[derive(Debug, Clone)]
pub struct QsMeasures {
    pub pi_hat: CentralityVector,
    pub pi_bar: CentralityVector,
    pub pi_tilde: CentralityVector,
    pub pi_check: CentralityVector,
    pub spectral: SpectralResult,
    pub right: RightEigen,
    pub lambda1_from_exit: f64,
}

impl QsMeasures {
    /// `exit` is `R·1`; pass `None` to use `1 − T·1`.
    pub fn compute(t: &SparseBlock, exit: Option<&[f64]>, opts: SolverOptions) -> Result<Self> {
        let pi_hat = pseudo_stationary_auto(t, opts)?;
        let pi_bar = bar_stationary(&bar_transition(t)?, opts)?;
        let spectral = quasi_stationary(t, opts)?;
        let right = right_eigenvector(t, &pi_bar.scores, &spectral.pi_tilde.scores, opts)?;
        let pi_check = check_stationary(&spectral.pi_tilde.scores, &right.u_tilde)?;
        let own_exit: Vec<f64>;
        let exit = match exit {
            Some(e) => e,
            None => {
                own_exit = t.row_sums().iter().map(|s| 1.0 - s).collect();
                &own_exit
            }
        };
        let lambda1_from_exit = lambda_from_exit(&spectral.pi_tilde.scores, exit);
        Ok(QsMeasures { pi_hat, pi_bar, pi_tilde: spectral.pi_tilde.clone(), pi_check, spectral, right, lambda1_from_exit })
    }

    pub fn sidecar(&self) -> SpectralSidecar {
        SpectralSidecar {
            lambda1: self.spectral.lambda1,
            lambda1_from_exit: self.lambda1_from_exit,
            iterations: self.spectral.iterations,
            residual: self.spectral.residual,
        }
    }

    /// The four measures in the order `pi_hat, pi_bar, pi_tilde, pi_check`.
    pub fn vectors(&self) -> [&CentralityVector; 4] {
        [&self.pi_hat, &self.pi_bar, &self.pi_tilde, &self.pi_check]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::split_escc_pout;
    use crate::fixtures;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn g3_t() -> SparseBlock {
        split_escc_pout(&fixtures::g3()).unwrap().t
    }

    fn g4_t() -> SparseBlock {
        split_escc_pout(&fixtures::g4()).unwrap().t
    }

    #[test]
    fn pagerank_two_cycle_is_uniform() {
        let g = fixtures::graph(2, &[(0, 1), (1, 0)]);
        for c in [0.1, 0.5, 0.85, 0.99] {
            let pr = pagerank(&g, c, SolverOptions::default()).unwrap();
            assert!(close(&pr.scores, &[0.5, 0.5], 1e-12));
        }
    }

    #[test]
    fn pagerank_tiny_damping_is_nearly_uniform() {
        let pr = pagerank(&fixtures::g4(), 1e-6, SolverOptions::default()).unwrap();
        assert!(pr.scores.iter().all(|&s| (s - 0.25).abs() < 1e-5));
    }

    #[test]
    fn pagerank_rejects_bad_damping() {
        assert!(pagerank(&fixtures::g3(), 1.0, SolverOptions::default()).is_err());
        assert!(pagerank(&fixtures::g3(), 0.0, SolverOptions::default()).is_err());
    }

    #[test]
    fn pagerank_reports_non_convergence() {
        let opts = SolverOptions { tol: 1e-14, max_iter: 3 };
        assert!(matches!(pagerank(&fixtures::g4(), 0.85, opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn pseudo_stationary_g3() {
        let p = pseudo_stationary(&g3_t(), SolverOptions::default()).unwrap();
        assert!(close(&p.scores, &[3.0 / 7.0, 4.0 / 7.0], 1e-9));
    }

    #[test]
    fn pseudo_stationary_rejects_stochastic_block() {
        let t = SparseBlock::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(pseudo_stationary(&t, SolverOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn pseudo_stationary_dense_matches_neumann() {
        let t = g4_t();
        let a = pseudo_stationary(&t, SolverOptions::default()).unwrap();
        let b = pseudo_stationary_dense(&t).unwrap();
        assert!(close(&a.scores, &b.scores, 1e-9));
    }

    #[test]
    fn bar_transition_fixtures() {
        assert_eq!(bar_transition(&g3_t()).unwrap().to_dense().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        let tb = bar_transition(&g4_t()).unwrap().to_dense();
        let third = 1.0 / 3.0;
        let expect = [[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [third, third, third]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((tb[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        let stoch = SparseBlock::from_dense(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert_eq!(bar_transition(&stoch).unwrap(), stoch);
    }

    #[test]
    fn bar_transition_zero_row_is_an_error() {
        let t = SparseBlock::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(bar_transition(&t), Err(Error::ZeroRowSum { row: 1 })));
    }

    #[test]
    fn bar_stationary_fixtures() {
        let opts = SolverOptions::default();
        let p = bar_stationary(&bar_transition(&g3_t()).unwrap(), opts).unwrap();
        assert!(close(&p.scores, &[0.5, 0.5], 1e-12));
        let p = bar_stationary(&bar_transition(&g4_t()).unwrap(), opts).unwrap();
        assert!(close(&p.scores, &[0.3, 0.4, 0.3], 1e-9));
        let ds = SparseBlock::from_dense(&[vec![0.2, 0.8, 0.0], vec![0.0, 0.2, 0.8], vec![0.8, 0.0, 0.2]]).unwrap();
        let p = bar_stationary(&ds, opts).unwrap();
        assert!(close(&p.scores, &[1.0 / 3.0; 3], 1e-9));
    }

    #[test]
    fn quasi_stationary_g3_needs_damping() {
        let t = g3_t();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        let lam = 0.5f64.sqrt();
        assert!((r.lambda1 - lam).abs() < 1e-9);
        assert!(close(&r.pi_tilde.scores, &[lam / (1.0 + lam), 1.0 / (1.0 + lam)], 1e-9));
        assert!(close(&r.u, &[2.0 / (1.0 + lam), 2.0 * lam / (1.0 + lam)], 1e-8));
        let p = perron_iteration(2, |x, y| t.left_mul(x, y), SolverOptions::default()).unwrap();
        assert!(p.damped);
    }

    #[test]
    fn quasi_stationary_g4() {
        let r = quasi_stationary(&g4_t(), SolverOptions::default()).unwrap();
        let lam = (0.25 + (1.0f64 / 16.0 + 5.0 / 3.0).sqrt()) / 2.0;
        assert!((r.lambda1 - lam).abs() < 1e-9);
        assert!((r.lambda1 - 0.7824886).abs() < 1e-6);
    }

    #[test]
    fn stochastic_block_has_unit_root() {
        let t = SparseBlock::from_dense(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        assert!((r.lambda1 - 1.0).abs() < 1e-10);
        assert!(close(&r.pi_tilde.scores, &[1.0 / 3.0, 2.0 / 3.0], 1e-9));
        assert!(close(&r.u, &[1.0, 1.0], 1e-9));
    }

    #[test]
    fn lambda_from_exit_cases() {
        let lam = 0.5f64.sqrt();
        let pt = [lam / (1.0 + lam), 1.0 / (1.0 + lam)];
        assert!((lambda_from_exit(&pt, &[0.0, 0.5]) - lam).abs() < 1e-12);
        assert_eq!(lambda_from_exit(&pt, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn twisted_kernel_g3_and_scale_invariance() {
        let t = g3_t();
        let r = quasi_stationary(&t, SolverOptions::default()).unwrap();
        let k = twisted_kernel(&t, &r.u, r.lambda1).unwrap();
        let d = k.kernel.to_dense();
        assert!(close(d.as_slice(), &[0.0, 1.0, 1.0, 0.0], 1e-9));
        let scaled: Vec<f64> = r.u.iter().map(|v| v * 7.0).collect();
        let k7 = twisted_kernel(&t, &scaled, r.lambda1).unwrap();
        assert!(close(k7.kernel.to_dense().as_slice(), d.as_slice(), 1e-14));
    }

    #[test]
    fn twisted_kernel_of_stochastic_block_is_itself() {
        let t = SparseBlock::from_dense(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let k = twisted_kernel(&t, &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(k.kernel.to_dense(), t.to_dense());
    }

    #[test]
    fn twisted_kernel_rejects_nonpositive_u() {
        let t = g3_t();
        assert!(twisted_kernel(&t, &[1.0, 0.0], 0.7).is_err());
    }

    #[test]
    fn check_stationary_g3_is_uniform() {
        let m = QsMeasures::compute(&g3_t(), Some(&[0.0, 0.5]), SolverOptions::default()).unwrap();
        assert!(close(&m.pi_check.scores, &[0.5, 0.5], 1e-9));
    }

    #[test]
    fn check_stationary_g4_is_twisted_fixed_point() {
        let t = g4_t();
        let m = QsMeasures::compute(&t, None, SolverOptions::default()).unwrap();
        let k = twisted_kernel(&t, &m.right.u, m.spectral.lambda1).unwrap();
        let mut y = vec![0.0; 3];
        k.kernel.left_mul(&m.pi_check.scores, &mut y);
        assert!(l1_diff(&y, &m.pi_check.scores) < 1e-8);
    }

    #[test]
    fn pagerank_escc_limits() {
        let t = g3_t();
        let p = pagerank_escc(&t, 1.0 - 1e-6, SolverOptions::default()).unwrap();
        assert!(l1_diff(&p.scores, &[3.0 / 7.0, 4.0 / 7.0]) < 1e-4);
        // 1ᵀ[I − T/2]⁻¹ for T = [[0,1],[1/2,0]]: det = 7/8, row sums (10/7, 12/7).
        let p = pagerank_escc(&t, 0.5, SolverOptions::default()).unwrap();
        assert!(close(&p.scores, &[10.0 / 22.0, 12.0 / 22.0], 1e-10));
        let zero = SparseBlock::from_dense(&[vec![0.0]]).unwrap();
        assert_eq!(pagerank_escc(&zero, 0.85, SolverOptions::default()).unwrap().scores, vec![1.0]);
    }

    #[test]
    fn exit_scaling_interpolates() {
        let t = g4_t();
        assert_eq!(exit_scaled(&t, 1.0).unwrap().to_dense(), t.to_dense());
        let tb = bar_transition(&t).unwrap().to_dense();
        assert!((exit_scaled(&t, 0.0).unwrap().to_dense() - &tb).abs().max() < 1e-15);
        let half = exit_scaled(&t, 0.5).unwrap().to_dense();
        assert!((half - (tb + t.to_dense()) * 0.5).abs().max() < 1e-15);
    }
}
