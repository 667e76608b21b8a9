//! Conditioning of a dictionary and its interaction with the planted
//! low-rank subspaces: frame bounds, restricted isometry constants and the
//! incoherence quantities `μ`, `γ_UR`, `γ_V`, `ξ`.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kv::KvBlock;
use crate::linalg::{singular_values, symmetric_eigenvalues};
use crate::model::SupportSet;
use crate::{DemixError, DemixInstance, GroundTruth, Mat, Result};

/// Largest number of supports enumerated in exact RIC mode.
pub const RIC_EXACT_LIMIT: u128 = 1_000_000;
/// Samples used by [`full_report`] when exact enumeration is refused.
pub const REPORT_RIC_SAMPLES: usize = 20_000;
/// Relative floor on the spectrum of `NᵀN` below which a support is degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Which dictionary analysis applies: `d ≤ n` or `d > n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Thin,
    Fat,
}

impl Regime {
    pub fn of(n: usize, d: usize) -> Self {
        if d <= n {
            Regime::Thin
        } else {
            Regime::Fat
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Thin => "thin",
            Regime::Fat => "fat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    /// `false` when `d > n`, where the lower bound is forced to zero.
    pub lower_meaningful: bool,
}

/// Tightest `F_L, F_U` with `F_L‖v‖² ≤ ‖Rv‖² ≤ F_U‖v‖²`.
pub fn frame_bounds(dictionary: &Mat) -> Result<FrameBounds> {
    let (n, d) = dictionary.shape();
    if d == 0 {
        return Err(DemixError::invalid("dictionary has no columns"));
    }
    let sv = singular_values(dictionary)?;
    let upper = sv[0] * sv[0];
    if d > n {
        return Ok(FrameBounds { lower: 0.0, upper, lower_meaningful: false });
    }
    let smallest = sv[sv.len() - 1];
    Ok(FrameBounds { lower: smallest * smallest, upper, lower_meaningful: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RicMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RicEstimate {
    pub delta: f64,
    /// `false` for Monte Carlo estimates, which are lower bounds.
    pub exact: bool,
    pub order: usize,
    pub supports_checked: u128,
}

/// `C(d, k)`, saturating at `u128::MAX`.
pub fn binomial(d: usize, k: usize) -> u128 {
    if k > d {
        return 0;
    }
    let k = k.min(d - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((d - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn support_deviation(dictionary: &Mat, cols: &[usize]) -> Result<f64> {
    let sub = dictionary.select_columns(cols);
    let gram = sub.transpose() * &sub;
    let eig = symmetric_eigenvalues(&gram)?;
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    Ok((hi - 1.0).max(1.0 - lo).max(0.0))
}

/// Restricted isometry constant of order `k`: the largest deviation of the
/// squared singular values of any `k`-column submatrix from one.
pub fn estimate_ric(dictionary: &Mat, k: usize, mode: RicMode) -> Result<RicEstimate> {
    let d = dictionary.ncols();
    if k == 0 || k > d {
        return Err(DemixError::invalid(format!("RIP order must satisfy 1 <= k <= d = {d}, got {k}")));
    }
    match mode {
        RicMode::Exact => {
            let count = binomial(d, k);
            if count > RIC_EXACT_LIMIT {
                return Err(DemixError::TooManySupports { count, limit: RIC_EXACT_LIMIT });
            }
            let delta = (0..d)
                .combinations(k)
                .par_bridge()
                .map(|cols| support_deviation(dictionary, &cols))
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
            Ok(RicEstimate { delta, exact: true, order: k, supports_checked: count })
        }
        RicMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(DemixError::invalid("Monte Carlo RIC needs at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let supports: Vec<Vec<usize>> = (0..samples)
                .map(|_| {
                    let mut cols = rand::seq::index::sample(&mut rng, d, k).into_vec();
                    cols.sort_unstable();
                    cols
                })
                .collect();
            let delta = supports
                .par_iter()
                .map(|cols| support_deviation(dictionary, cols))
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
            Ok(RicEstimate { delta, exact: false, order: k, supports_checked: samples as u128 })
        }
    }
}

fn check_subspaces(dictionary: &Mat, u: &Mat, v: &Mat) -> Result<()> {
    if u.nrows() != dictionary.nrows() {
        return Err(DemixError::dims("incoherence", format!("U with {} rows", dictionary.nrows()), u.nrows()));
    }
    if u.ncols() != v.ncols() {
        return Err(DemixError::dims("incoherence", format!("V with {} columns", u.ncols()), v.ncols()));
    }
    Ok(())
}

/// Gram blocks of the maps `h ↦ vec(P_Φ(R·mat(h)))` (`M`) and
/// `h ↦ vec(R·mat(h))` (`N`) over the support coordinates, in support order.
///
/// `(MᵀM)_{(i,j),(a,b)} = W_ia δ_jb + (RᵀR)_ia (P_V)_jb − W_ia (P_V)_jb` with
/// `W = Rᵀ P_U R`, and `(NᵀN)_{(i,j),(a,b)} = (RᵀR)_ia δ_jb`.
pub fn support_grams(dictionary: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> Result<(Mat, Mat)> {
    check_subspaces(dictionary, u, v)?;
    let (d, m) = (dictionary.ncols(), v.nrows());
    if let Some((i, j)) = support.iter().find(|&(i, j)| i >= d || j >= m) {
        return Err(DemixError::invalid(format!("support entry ({i}, {j}) outside {d}x{m}")));
    }
    let rtr = dictionary.transpose() * dictionary;
    let utr = u.transpose() * dictionary;
    let w = utr.transpose() * &utr;
    let pv = v * v.transpose();
    let s = support.len();
    let entries = support.entries();
    let mut mtm = Mat::zeros(s, s);
    let mut ntn = Mat::zeros(s, s);
    for (p, &(i, j)) in entries.iter().enumerate() {
        for (q, &(a, b)) in entries.iter().enumerate().skip(p) {
            let same_col = if j == b { 1.0 } else { 0.0 };
            let val = w[(i, a)] * same_col + (rtr[(i, a)] - w[(i, a)]) * pv[(j, b)];
            mtm[(p, q)] = val;
            mtm[(q, p)] = val;
            ntn[(p, q)] = rtr[(i, a)] * same_col;
            ntn[(q, p)] = ntn[(p, q)];
        }
    }
    Ok((mtm, ntn))
}

/// Largest generalized eigenvalue of the symmetric pair `(A, B)` with `B`
/// positive definite, via `B = LLᵀ`.
fn generalized_max_eigenvalue(a: &Mat, b: &Mat) -> Result<f64> {
    let eig_b = symmetric_eigenvalues(b)?;
    let (lo, hi) = (eig_b[0], eig_b[eig_b.len() - 1]);
    if lo.is_nan() || lo <= DEGENERATE_TOL * hi.max(f64::MIN_POSITIVE) {
        return Err(DemixError::DegenerateSupport { min_eigenvalue: lo, max_eigenvalue: hi });
    }
    let chol = crate::linalg::cholesky(b)?;
    let l = chol.l();
    let l_inv_a = l.solve_lower_triangular(a).ok_or_else(|| DemixError::Numerical("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&l_inv_a.transpose())
        .ok_or_else(|| DemixError::Numerical("triangular solve failed".into()))?;
    let eig = symmetric_eigenvalues(&c)?;
    Ok(eig[eig.len() - 1])
}

/// `μ = max_{Z ∈ Ω_R, Z ≠ 0} ‖P_Φ(Z)‖_F / ‖Z‖_F`.
pub fn incoherence_mu(dictionary: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> Result<f64> {
    if support.is_empty() {
        return Err(DemixError::invalid("incoherence μ needs a non-empty support"));
    }
    let (mtm, ntn) = support_grams(dictionary, u, v, support)?;
    let mu_sq = generalized_max_eigenvalue(&mtm, &ntn)?;
    Ok(mu_sq.max(0.0).sqrt())
}

/// `γ_UR = max_i ‖P_U R e_i‖² / ‖R e_i‖²`.
pub fn gamma_ur(dictionary: &Mat, u: &Mat) -> Result<f64> {
    if u.nrows() != dictionary.nrows() {
        return Err(DemixError::dims("gamma_ur", format!("U with {} rows", dictionary.nrows()), u.nrows()));
    }
    let utr = u.transpose() * dictionary;
    let mut worst = 0.0_f64;
    for i in 0..dictionary.ncols() {
        let col_sq = dictionary.column(i).norm_squared();
        if col_sq == 0.0 {
            return Err(DemixError::invalid(format!("dictionary column {i} is zero")));
        }
        worst = worst.max(utr.column(i).norm_squared() / col_sq);
    }
    Ok(worst)
}

/// `γ_V = max_i ‖P_V e_i‖²`, the largest squared row norm of `V`.
pub fn gamma_v(v: &Mat) -> f64 {
    v.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max)
}

/// `ξ = ‖Rᵀ U Vᵀ‖_∞`.
pub fn xi_value(dictionary: &Mat, u: &Mat, v: &Mat) -> Result<f64> {
    check_subspaces(dictionary, u, v)?;
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let rtu = dictionary.transpose() * u;
    Ok(crate::linalg::max_abs(&(rtu * v.transpose())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncoherenceReport {
    pub regime: Regime,
    pub mu: f64,
    pub gamma_ur: f64,
    pub gamma_v: f64,
    pub xi: f64,
    /// Thin case only.
    pub frame: Option<FrameBounds>,
    /// Fat case only.
    pub ric: Option<RicEstimate>,
    /// RIP order used for `ric`.
    pub k: usize,
}

impl IncoherenceReport {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.push("regime", self.regime.as_str())
            .push("mu", self.mu)
            .push("gamma_ur", self.gamma_ur)
            .push("gamma_v", self.gamma_v)
            .push("xi", self.xi)
            .push("k", self.k);
        match &self.frame {
            Some(f) => kv.push("frame_lower", f.lower).push("frame_upper", f.upper),
            None => kv.push("frame_lower", "n/a").push("frame_upper", "n/a"),
        };
        match &self.ric {
            Some(r) => kv
                .push("ric_delta", r.delta)
                .push("ric_exact", r.exact)
                .push("ric_supports_checked", r.supports_checked),
            None => kv.push("ric_delta", "n/a").push("ric_exact", "n/a"),
        };
        kv
    }
}

/// Every incoherence quantity for one instance.
///
/// `k` defaults to the largest column count of the support (at least one).
/// The RIC is enumerated exactly when there are at most `RIC_EXACT_LIMIT`
/// supports and sampled otherwise. An empty support gives `μ = 0`.
pub fn full_report(instance: &DemixInstance, truth: &GroundTruth, k: Option<usize>) -> Result<IncoherenceReport> {
    let r = instance.dictionary();
    let (u, v) = (truth.u(), truth.v());
    if u.nrows() != instance.n() || v.nrows() != instance.m() || truth.a0().nrows() != instance.d() {
        return Err(DemixError::dims(
            "full_report",
            format!("truth for a {}x{} instance with d = {}", instance.n(), instance.m(), instance.d()),
            format!("{}x{} with d = {}", u.nrows(), v.nrows(), truth.a0().nrows()),
        ));
    }
    let regime = Regime::of(instance.n(), instance.d());
    let k = k.unwrap_or_else(|| truth.support().max_column_count().max(1)).min(instance.d());
    let mu = if truth.support().is_empty() { 0.0 } else { incoherence_mu(r, u, v, truth.support())? };
    let (frame, ric) = match regime {
        Regime::Thin => (Some(frame_bounds(r)?), None),
        Regime::Fat => {
            let mode = if binomial(instance.d(), k) <= RIC_EXACT_LIMIT {
                RicMode::Exact
            } else {
                RicMode::MonteCarlo { samples: REPORT_RIC_SAMPLES, seed: 0 }
            };
            (None, Some(estimate_ric(r, k, mode)?))
        }
    };
    Ok(IncoherenceReport {
        regime,
        mu,
        gamma_ur: gamma_ur(r, u)?,
        gamma_v: gamma_v(v),
        xi: xi_value(r, u, v)?,
        frame,
        ric,
        k,
    })
}
