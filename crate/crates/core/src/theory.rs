//! Recovery-theory quantities: the constants `c` and `C`, the interval
//! `[λ_min, λ_max]`, the sparsity ceiling `s_max`, the assumption checks and
//! the rank/sparsity curves.
//!
//! Everything here is a pure function of [`TheoryInputs`]. Inadmissible
//! parameters produce flagged reports, never errors.

use std::fmt;

use crate::kv::KvBlock;
use crate::measures::{IncoherenceReport, Regime};
use crate::{DemixError, Result};

pub const DEFAULT_ALPHA: f64 = 1.0 + 1e-9;
pub const DEFAULT_C1: f64 = 1.0;

/// Dictionary conditioning for the two regimes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DictionaryBounds {
    Frame { lower: f64, upper: f64 },
    Rip { delta: f64 },
}

impl DictionaryBounds {
    pub fn regime(&self) -> Regime {
        match self {
            DictionaryBounds::Frame { .. } => Regime::Thin,
            DictionaryBounds::Rip { .. } => Regime::Fat,
        }
    }

    /// `(F_L, F_U)` or `(1 − δ, 1 + δ)`.
    pub fn lower_upper(&self) -> (f64, f64) {
        match *self {
            DictionaryBounds::Frame { lower, upper } => (lower, upper),
            DictionaryBounds::Rip { delta } => (1.0 - delta, 1.0 + delta),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryInputs {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub k: usize,
    pub gamma_ur: f64,
    pub gamma_v: f64,
    pub mu: f64,
    pub xi: f64,
    pub bounds: DictionaryBounds,
    pub alpha: f64,
    pub c1: f64,
}

impl TheoryInputs {
    /// Inputs from measured incoherence quantities.
    pub fn from_report(report: &IncoherenceReport, n: usize, m: usize, d: usize, r: usize, s: usize) -> Result<Self> {
        let bounds = match (report.regime, &report.frame, &report.ric) {
            (Regime::Thin, Some(f), _) => DictionaryBounds::Frame { lower: f.lower, upper: f.upper },
            (Regime::Fat, _, Some(ric)) => DictionaryBounds::Rip { delta: ric.delta },
            _ => return Err(DemixError::invalid("incoherence report lacks dictionary bounds for its regime")),
        };
        Ok(TheoryInputs {
            n,
            m,
            d,
            r,
            s,
            k: report.k,
            gamma_ur: report.gamma_ur,
            gamma_v: report.gamma_v,
            mu: report.mu,
            xi: report.xi,
            bounds,
            alpha: DEFAULT_ALPHA,
            c1: DEFAULT_C1,
        })
    }

    pub fn regime(&self) -> Regime {
        self.bounds.regime()
    }

    pub fn with_s(&self, s: usize) -> Self {
        TheoryInputs { s, ..self.clone() }
    }

    /// `d` in the thin case, `k` in the fat case.
    fn support_cap(&self) -> usize {
        match self.regime() {
            Regime::Thin => self.d,
            Regime::Fat => self.k,
        }
    }
}

/// `c_t` (thin) or `c_f` (fat).
pub fn c_constant(inputs: &TheoryInputs) -> f64 {
    let (lo, hi) = inputs.bounds.lower_upper();
    let s = inputs.s as f64;
    let base = inputs.s.min(inputs.support_cap()) as f64 + s * inputs.gamma_v;
    hi / 2.0 * ((1.0 + 2.0 * inputs.gamma_ur) * base + 2.0 * s * inputs.gamma_v) - lo / 2.0 * base
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BigC {
    pub c: f64,
    pub big_c: f64,
    /// `+∞` when the denominator is not positive or `C ≥ 1`.
    pub lambda_min: f64,
    pub denominator_positive: bool,
}

/// `C = c / (lo (1 − μ)² − c)` and `λ_min = (1 + C)/(1 − C) ξ`.
pub fn big_c_and_lambda_min(inputs: &TheoryInputs) -> BigC {
    let c = c_constant(inputs);
    let (lo, _) = inputs.bounds.lower_upper();
    let denom = lo * (1.0 - inputs.mu).powi(2) - c;
    let denominator_positive = denom > 0.0;
    let big_c = c / denom;
    let lambda_min =
        if denominator_positive && big_c < 1.0 { (1.0 + big_c) / (1.0 - big_c) * inputs.xi } else { f64::INFINITY };
    BigC { c, big_c, lambda_min, denominator_positive }
}

/// `(√lo (1 − μ) − √(r hi) μ) / √s`; `+∞` when `s = 0`.
pub fn lambda_max(inputs: &TheoryInputs) -> f64 {
    if inputs.s == 0 {
        return f64::INFINITY;
    }
    let (lo, hi) = inputs.bounds.lower_upper();
    let mu = inputs.mu;
    (lo.max(0.0).sqrt() * (1.0 - mu) - (inputs.r as f64 * hi).sqrt() * mu) / (inputs.s as f64).sqrt()
}

/// `(1 − μ)²/2 · m/r`; `+∞` when `r = 0`.
pub fn s_max(inputs: &TheoryInputs) -> f64 {
    if inputs.r == 0 {
        return f64::INFINITY;
    }
    (1.0 - inputs.mu).powi(2) / 2.0 * inputs.m as f64 / inputs.r as f64
}

/// Right-hand side of the `γ_UR` assumption for the branch selected by `s`,
/// or `None` when `s > s_max` and no branch applies.
pub fn gamma_ur_ceiling(inputs: &TheoryInputs) -> Option<f64> {
    let s = inputs.s as f64;
    if s > s_max(inputs) {
        return None;
    }
    let cap = inputs.support_cap();
    let numer = (1.0 - inputs.mu).powi(2) - 2.0 * s * inputs.gamma_v;
    if inputs.s <= cap {
        Some(numer / (2.0 * s * (1.0 + inputs.gamma_v)))
    } else {
        Some(numer / (2.0 * (cap as f64 + s * inputs.gamma_v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Advisory {
    /// `s ≥ m`.
    SparsityAtLeastM,
    /// `d > m/(αr)`.
    DictionaryTooWide,
    /// Thin case: `F_L > 1/(1 − μ)²`.
    FrameSideCondition,
    /// Fat case: `n ≤ C₁ k ln d`.
    TooFewRows,
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Advisory::SparsityAtLeastM => "s_at_least_m",
            Advisory::DictionaryTooWide => "d_exceeds_m_over_alpha_r",
            Advisory::FrameSideCondition => "frame_lower_exceeds_inverse_square",
            Advisory::TooFewRows => "n_below_c1_k_log_d",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryReport {
    pub regime: Regime,
    pub c: f64,
    pub big_c: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub s_max: f64,
    /// `λ_min ≤ λ_max`.
    pub a1_holds: bool,
    /// The `γ_UR` assumption of the active regime.
    pub gamma_assumption_holds: bool,
    /// Frame bounds positive (thin) or `0 ≤ δ < 1` (fat).
    pub dictionary_ok: bool,
    pub denominator_positive: bool,
    pub admissible: bool,
    pub advisories: Vec<Advisory>,
}

impl TheoryReport {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        let assumption_key = match self.regime {
            Regime::Thin => "a2_holds",
            Regime::Fat => "a3_holds",
        };
        let advisories = if self.advisories.is_empty() {
            "none".to_string()
        } else {
            self.advisories.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
        };
        kv.push("regime", self.regime.as_str())
            .push("c", self.c)
            .push("big_c", self.big_c)
            .push("lambda_min", self.lambda_min)
            .push("lambda_max", self.lambda_max)
            .push("s_max", self.s_max)
            .push("a1_holds", self.a1_holds)
            .push(assumption_key, self.gamma_assumption_holds)
            .push("dictionary_ok", self.dictionary_ok)
            .push("denominator_positive", self.denominator_positive)
            .push("admissible", self.admissible)
            .push("advisories", advisories);
        kv
    }
}

pub fn check_assumptions(inputs: &TheoryInputs) -> TheoryReport {
    let regime = inputs.regime();
    let bc = big_c_and_lambda_min(inputs);
    let lmax = lambda_max(inputs);
    let smax = s_max(inputs);
    let a1_holds = bc.lambda_min <= lmax;
    let gamma_assumption_holds = gamma_ur_ceiling(inputs).is_some_and(|ceil| inputs.gamma_ur <= ceil);
    let dictionary_ok = match inputs.bounds {
        DictionaryBounds::Frame { lower, upper } => lower > 0.0 && lower <= upper,
        DictionaryBounds::Rip { delta } => (0.0..1.0).contains(&delta),
    };
    let c_ok = (0.0..1.0).contains(&bc.big_c);

    let mut advisories = Vec::new();
    if inputs.s >= inputs.m {
        advisories.push(Advisory::SparsityAtLeastM);
    }
    if inputs.r > 0 && inputs.d as f64 > inputs.m as f64 / (inputs.alpha * inputs.r as f64) {
        advisories.push(Advisory::DictionaryTooWide);
    }
    match inputs.bounds {
        DictionaryBounds::Frame { lower, .. } => {
            if lower > 1.0 / (1.0 - inputs.mu).powi(2) {
                advisories.push(Advisory::FrameSideCondition);
            }
        }
        DictionaryBounds::Rip { .. } => {
            if inputs.n as f64 <= inputs.c1 * inputs.k as f64 * (inputs.d as f64).ln() {
                advisories.push(Advisory::TooFewRows);
            }
        }
    }

    TheoryReport {
        regime,
        c: bc.c,
        big_c: bc.big_c,
        lambda_min: bc.lambda_min,
        lambda_max: lmax,
        s_max: smax,
        a1_holds,
        gamma_assumption_holds,
        dictionary_ok,
        denominator_positive: bc.denominator_positive,
        admissible: a1_holds && gamma_assumption_holds && dictionary_ok && bc.denominator_positive && c_ok,
        advisories,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub s: usize,
    /// Largest admissible rank; `+∞` when `μ = 0`.
    pub r_bound: f64,
    /// `√lo (1 − μ) ≥ ξ (1 + C)/(1 − C) √s` with `C` evaluated at this `s`.
    pub valid: bool,
}

/// Largest rank compatible with `λ_min ≤ λ_max` at each `s`, scaled by
/// `scale`. `C` is recomputed at every grid point.
pub fn rank_sparsity_curve(inputs: &TheoryInputs, s_grid: &[usize], scale: f64) -> Vec<CurvePoint> {
    s_grid.iter().map(|&s| curve_point(&inputs.with_s(s), scale)).collect()
}

fn curve_point(inputs: &TheoryInputs, scale: f64) -> CurvePoint {
    let (lo, hi) = inputs.bounds.lower_upper();
    let bc = big_c_and_lambda_min(inputs);
    let mu = inputs.mu;
    let s = inputs.s;
    if !bc.lambda_min.is_finite() {
        let r_bound = if mu == 0.0 { f64::INFINITY } else { 0.0 };
        return CurvePoint { s, r_bound, valid: false };
    }
    let k = (1.0 + bc.big_c) / (1.0 - bc.big_c);
    let head = lo.max(0.0).sqrt() * (1.0 - mu) - inputs.xi * k * (s as f64).sqrt();
    let valid = head >= 0.0;
    let r_bound = if mu == 0.0 {
        f64::INFINITY
    } else if valid {
        scale * (head / (hi.sqrt() * mu)).powi(2)
    } else {
        0.0
    };
    CurvePoint { s, r_bound, valid }
}

/// `valid && r ≤ r_bound`, the curve restatement of `λ_min ≤ λ_max`.
pub fn curve_admits(point: &CurvePoint, r: usize, slack: f64) -> bool {
    point.valid && r as f64 <= point.r_bound + slack
}
