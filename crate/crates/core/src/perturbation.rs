//! Dense laboratory for the singular perturbation `T(ε) = T̄ − εD`.
//!
//! Builds the deviation matrix `H` of `T̄`, the leading Laurent terms of
//! `[I − T(ε)]⁻¹ = X₋₁/ε + X₀ + O(ε)`, and compares the first-order
//! expansions of `π̂`, `π̃`, `λ₁` and `ū` with exact dense solutions across an
//! ε grid. Limited to `n_T ≤ 2000`.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::block::SparseBlock;
use crate::error::{Error, Result};
use crate::spectral::{bar_transition, perron_iteration, SolverOptions};

pub const MAX_DIM: usize = 2000;
pub const DEFAULT_EPS_GRID: [f64; 7] = [1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4];
const REFERENCE_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub t_bar: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Strictly decreasing, every point keeping `T(ε)` substochastic.
    pub epsilons: Vec<f64>,
}

impl PerturbationFamily {
    /// User-supplied `T̄` and `D`; grid points that break substochasticity are dropped.
    pub fn new(t_bar: DMatrix<f64>, d: DMatrix<f64>, grid: &[f64]) -> Result<Self> {
        let n = t_bar.nrows();
        if n == 0 || !t_bar.is_square() || d.shape() != t_bar.shape() {
            return Err(Error::InvalidParameter("T̄ and D must be square of equal size".into()));
        }
        if n > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dense lab is capped at {MAX_DIM} states, got {n}")));
        }
        for i in 0..n {
            let row = t_bar.row(i);
            if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!("row {i} of T̄ is not a probability vector")));
            }
            if d.row(i).sum() < -1e-15 {
                return Err(Error::Precondition(format!("row {i} of D has negative mass")));
            }
        }
        let mut epsilons: Vec<f64> = grid.iter().copied().filter(|&e| e > 0.0).collect();
        epsilons.sort_by(|a, b| b.total_cmp(a));
        epsilons.dedup();
        let mut fam = PerturbationFamily { t_bar, d, epsilons: Vec::new() };
        epsilons.retain(|&e| fam.is_substochastic(e));
        fam.epsilons = epsilons;
        Ok(fam)
    }

    /// Family through a real block: `T̄` its row renormalization, `D = T̄ − T`,
    /// so that `T(1) = T`.
    pub fn from_block(t: &SparseBlock, grid: &[f64]) -> Result<Self> {
        if t.n_rows() > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dense lab is capped at {MAX_DIM} states")));
        }
        let t_bar = bar_transition(t)?.to_dense();
        let d = &t_bar - t.to_dense();
        Self::new(t_bar, d, grid)
    }

    pub fn n(&self) -> usize {
        self.t_bar.nrows()
    }

    pub fn t_at(&self, eps: f64) -> DMatrix<f64> {
        &self.t_bar - &self.d * eps
    }

    fn is_substochastic(&self, eps: f64) -> bool {
        let t = self.t_at(eps);
        t.iter().all(|&v| v >= -1e-15) && (0..self.n()).all(|i| t.row(i).sum() <= 1.0 + 1e-12)
    }

    /// `D·1`.
    pub fn exit_direction(&self) -> DVector<f64> {
        &self.d * DVector::from_element(self.n(), 1.0)
    }
}

/// Stationary row of an irreducible stochastic matrix, from
/// `π(I − T̄ + 11ᵀ) = 1ᵀ`.
pub fn dense_stationary(t_bar: &DMatrix<f64>) -> Result<RowDVector<f64>> {
    let n = t_bar.nrows();
    let a = DMatrix::identity(n, n) - t_bar + DMatrix::from_element(n, n, 1.0);
    let x = a
        .transpose()
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::Singular("I − T̄ + 11ᵀ (T̄ reducible?)".into()))?;
    Ok(x.transpose())
}

/// `H = (I − T̄ + 1π̄)⁻¹ − 1π̄`.
pub fn deviation_matrix(t_bar: &DMatrix<f64>, pi_bar: &RowDVector<f64>) -> Result<DMatrix<f64>> {
    let n = t_bar.nrows();
    let one_pi = DVector::from_element(n, 1.0) * pi_bar;
    let inv = (DMatrix::identity(n, n) - t_bar + &one_pi)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("I − T̄ + 1π̄".into()))?;
    if !inv.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("I − T̄ + 1π̄".into()));
    }
    let h = inv - one_pi;
    let row_gap = (&h * DVector::from_element(n, 1.0)).amax();
    let col_gap = (pi_bar * &h).amax();
    if row_gap > 1e-8 || col_gap > 1e-8 {
        return Err(Error::Precondition(format!(
            "deviation matrix identities fail (|H1| = {row_gap:e}, |π̄H| = {col_gap:e}); is π̄ stationary for T̄?"
        )));
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct LaurentTerms {
    pub x_minus1: DMatrix<f64>,
    pub x_0: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub pi_bar: RowDVector<f64>,
    pub d: DMatrix<f64>,
    /// `π̄D1`.
    pub exit_mean: f64,
    pub n_t: usize,
}

pub fn laurent_terms(family: &PerturbationFamily, pi_bar: &RowDVector<f64>, h: &DMatrix<f64>) -> Result<LaurentTerms> {
    let n = family.n();
    let exit_mean = (pi_bar * family.exit_direction())[0];
    if !(exit_mean > 0.0) {
        return Err(Error::NoExit(exit_mean));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let x_minus1 = DVector::from_element(n, 1.0) * pi_bar / exit_mean;
    let x_0 = (&eye - &x_minus1 * &family.d) * h * (&eye - &family.d * &x_minus1);
    Ok(LaurentTerms { x_minus1, x_0, h: h.clone(), pi_bar: pi_bar.clone(), d: family.d.clone(), exit_mean, n_t: n })
}

impl LaurentTerms {
    /// Max-abs residuals of `(I−T̄)X₋₁ = 0` and `(I−T̄)X₀ + DX₋₁ = I`.
    pub fn identity_residuals(&self, t_bar: &DMatrix<f64>) -> (f64, f64) {
        let eye = DMatrix::<f64>::identity(self.n_t, self.n_t);
        let a = &eye - t_bar;
        let r1 = (&a * &self.x_minus1).amax();
        let r2 = (&a * &self.x_0 + &self.d * &self.x_minus1 - eye).amax();
        (r1, r2)
    }

    /// `X₋₁/ε + X₀`.
    pub fn resolvent(&self, eps: f64) -> DMatrix<f64> {
        &self.x_minus1 / eps + &self.x_0
    }

    fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.n_t, 1.0)
    }
}

/// First-order `π̂` from the `X₀` form and from the `H`-only form, in that order.
pub fn first_order_pi_hat(terms: &LaurentTerms, family: &PerturbationFamily, eps: f64) -> (RowDVector<f64>, RowDVector<f64>) {
    let n_t = terms.n_t as f64;
    let ones = terms.ones();
    let pi = &terms.pi_bar;

    // π̄ − π̄ (1/n_T)(π̄εD1) 1ᵀX₀1 + 1ᵀX₀ (1/n_T)(π̄εD1)
    let eps_exit = (pi * (&family.d * &ones) * eps)[0];
    let one_x0 = ones.transpose() * &terms.x_0;
    let one_x0_one = (&one_x0 * &ones)[0];
    let via_x0 = pi - pi * (eps_exit * one_x0_one / n_t) + &one_x0 * (eps_exit / n_t);

    // π̄ − επ̄DH + ε (1/n_T)(π̄D1) 1ᵀH
    let exit = (pi * &family.d * &ones)[0];
    let via_h = pi - (pi * &family.d * &terms.h) * eps + (ones.transpose() * &terms.h) * (eps * exit / n_t);
    (via_x0, via_h)
}

/// First-order `π̃ = π̄ − επ̄DH` and `λ₁ = 1 − επ̄D1`.
pub fn first_order_pi_tilde(terms: &LaurentTerms, eps: f64) -> (RowDVector<f64>, f64) {
    let v = &terms.pi_bar - (&terms.pi_bar * &terms.d * &terms.h) * eps;
    (v, 1.0 - eps * terms.exit_mean)
}

/// First-order `ū = 1 − εHD1`.
pub fn first_order_u_bar(terms: &LaurentTerms, eps: f64) -> DVector<f64> {
    let ones = terms.ones();
    &ones - (&terms.h * &terms.d * &ones) * eps
}

/// Exact quantities of `T(ε)` from dense solves.
#[derive(Debug, Clone)]
pub struct ExactPoint {
    pub resolvent: DMatrix<f64>,
    pub pi_hat: RowDVector<f64>,
    pub pi_tilde: RowDVector<f64>,
    pub lambda1: f64,
    /// Right Perron vector normalized by `π̄ū = 1`.
    pub u_bar: DVector<f64>,
}

pub fn exact_point(family: &PerturbationFamily, pi_bar: &RowDVector<f64>, eps: f64) -> Result<ExactPoint> {
    let n = family.n();
    let t = family.t_at(eps);
    let resolvent = (DMatrix::identity(n, n) - &t)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("I − T({eps})")))?;
    let col = resolvent.row_sum();
    let pi_hat = &col / col.sum();

    let opts = SolverOptions { tol: REFERENCE_TOL, max_iter: 10_000_000 };
    let tt = t.transpose();
    let left = perron_iteration(
        n,
        |x, y| {
            let out = &tt * DVector::from_column_slice(x);
            y.copy_from_slice(out.as_slice());
        },
        opts,
    )?;
    let right = perron_iteration(
        n,
        |x, y| {
            let out = &t * DVector::from_column_slice(x);
            y.copy_from_slice(out.as_slice());
        },
        opts,
    )?;
    let u = DVector::from_vec(right.vector);
    let u_bar = &u / (pi_bar * &u)[0];
    Ok(ExactPoint {
        resolvent,
        pi_hat,
        pi_tilde: RowDVector::from_vec(left.vector),
        lambda1: left.lambda,
        u_bar,
    })
}

/// Residuals of every first-order formula at one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub eps: f64,
    /// `max|ε[I−T(ε)]⁻¹ − (X₋₁ + εX₀)|`, which is `O(ε²)`.
    pub resolvent: f64,
    /// `max|[I−T(ε)]⁻¹ − (X₋₁/ε + X₀)|`, which is `O(ε)`.
    pub resolvent_raw: f64,
    pub pi_hat_first_order_v1: f64,
    pub pi_hat_first_order_v2: f64,
    pub pi_tilde_first_order: f64,
    pub u_bar_first_order: f64,
    pub lambda1_first_order: f64,
    /// `max|v1 − v2|` between the two first-order `π̂` forms.
    pub pi_hat_form_gap: f64,
}

impl ExpansionRow {
    pub const NAMES: [&'static str; 7] = [
        "resolvent",
        "resolvent_raw",
        "pi_hat_first_order_v1",
        "pi_hat_first_order_v2",
        "pi_tilde_first_order",
        "u_bar_first_order",
        "lambda1_first_order",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.resolvent,
            self.resolvent_raw,
            self.pi_hat_first_order_v1,
            self.pi_hat_first_order_v2,
            self.pi_tilde_first_order,
            self.u_bar_first_order,
            self.lambda1_first_order,
        ]
    }
}

fn l1(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().map(f64::abs).sum()
}

pub fn expansion_row(family: &PerturbationFamily, terms: &LaurentTerms, eps: f64) -> Result<ExpansionRow> {
    let exact = exact_point(family, &terms.pi_bar, eps)?;
    let (v1, v2) = first_order_pi_hat(terms, family, eps);
    let (pt, lam) = first_order_pi_tilde(terms, eps);
    let ub = first_order_u_bar(terms, eps);
    let scaled = &exact.resolvent * eps - (&terms.x_minus1 + &terms.x_0 * eps);
    Ok(ExpansionRow {
        eps,
        resolvent: scaled.amax(),
        resolvent_raw: (&exact.resolvent - terms.resolvent(eps)).amax(),
        pi_hat_first_order_v1: l1((&exact.pi_hat - &v1).iter().copied()),
        pi_hat_first_order_v2: l1((&exact.pi_hat - &v2).iter().copied()),
        pi_tilde_first_order: l1((&exact.pi_tilde - &pt).iter().copied()),
        u_bar_first_order: l1((&exact.u_bar - &ub).iter().copied()),
        lambda1_first_order: (exact.lambda1 - lam).abs(),
        pi_hat_form_gap: (&v1 - &v2).amax(),
    })
}

/// Relative size below which a residual is indistinguishable from rounding.
const NOISE: f64 = 1e-10;

/// `residual(ε/2) / residual(ε)` for each expansion at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalvingCheck {
    pub eps: f64,
    pub ratios: [f64; 7],
    /// Expansions whose residual sits at rounding level at both ε and ε/2,
    /// i.e. the truncated series is exact for this family.
    pub exact: [bool; 7],
}

impl HalvingCheck {
    /// Whether expansion `k` decays by at least `bound` per halving (or is exact).
    pub fn passes(&self, k: usize, bound: f64) -> bool {
        self.exact[k] || self.ratios[k] <= bound
    }
}

fn noise_floor(terms: &LaurentTerms, k: usize, eps: f64) -> f64 {
    let scale = terms.x_minus1.amax() + terms.x_0.amax();
    NOISE
        * match ExpansionRow::NAMES[k] {
            "resolvent" => scale,
            "resolvent_raw" => scale / eps,
            _ => 1.0,
        }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub rows: Vec<ExpansionRow>,
    /// Halving ratios at the three smallest grid points.
    pub halving: Vec<HalvingCheck>,
    /// Least-squares slope of `log residual` against `log ε` over the grid.
    pub exponents: [f64; 7],
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, r)| r > 0.0)
        .map(|&(e, r)| (e.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), &(x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    num / den
}

/// Full sweep: one row per grid ε plus halving checks at the three smallest.
pub fn run_expansions(family: &PerturbationFamily) -> Result<ExpansionReport> {
    if family.epsilons.is_empty() {
        return Err(Error::InvalidParameter("ε grid is empty after filtering".into()));
    }
    let pi_bar = dense_stationary(&family.t_bar)?;
    let h = deviation_matrix(&family.t_bar, &pi_bar)?;
    let terms = laurent_terms(family, &pi_bar, &h)?;

    let rows = family
        .epsilons
        .iter()
        .map(|&e| expansion_row(family, &terms, e))
        .collect::<Result<Vec<_>>>()?;
    let mut halving = Vec::new();
    for row in rows.iter().rev().take(3).rev() {
        let half = expansion_row(family, &terms, row.eps / 2.0)?;
        let (a, b) = (row.values(), half.values());
        let mut ratios = [0.0; 7];
        let mut exact = [false; 7];
        for k in 0..7 {
            ratios[k] = b[k] / a[k];
            exact[k] = a[k] <= noise_floor(&terms, k, row.eps) && b[k] <= noise_floor(&terms, k, row.eps / 2.0);
        }
        halving.push(HalvingCheck { eps: row.eps, ratios, exact });
    }
    let mut exponents = [0.0; 7];
    for (k, slot) in exponents.iter_mut().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.values()[k])).collect();
        *slot = fit_slope(&pts);
    }
    Ok(ExpansionReport { rows, halving, exponents })
}
