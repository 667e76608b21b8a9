//! Dual-certificate construction for a planted pair and numerical checks of
//! the optimality conditions and the supporting norm bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kv::KvBlock;
use crate::linalg::{complement_projector, max_abs, spectral_norm, symmetric_eigenvalues};
use crate::measures::IncoherenceReport;
use crate::model::{project_omega, project_phi, project_phi_perp, SupportSet};
use crate::theory::{DictionaryBounds, TheoryReport};
use crate::{DemixError, GroundTruth, Mat, Result, Vector};

/// Residual ceiling for the two equality conditions.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Slack allowed on each norm bound.
pub const LEMMA_SLACK: f64 = 1e-9;
/// Relative floor on the Gram spectrum.
pub const SINGULAR_GRAM_TOL: f64 = 1e-12;
/// Above this many off-support rows, `‖Q‖_{∞,∞}` is estimated from a sample.
pub const Q_ROW_LIMIT: usize = 100_000;
const Q_SAMPLE_SEED: u64 = 0x5eed_0f0e_a11c_e55e;

/// `K = Rᵀ(I − P_U)R` and `I − P_V`, shared by every Gram entry.
#[derive(Clone, Debug)]
pub struct GramFactors {
    pub k: Mat,
    pub pv_perp: Mat,
}

impl GramFactors {
    pub fn new(dictionary: &Mat, u: &Mat, v: &Mat) -> Result<Self> {
        if u.nrows() != dictionary.nrows() || u.ncols() != v.ncols() {
            return Err(DemixError::dims(
                "gram factors",
                format!("U with {} rows and as many columns as V ({})", dictionary.nrows(), v.ncols()),
                format!("{}x{}", u.nrows(), u.ncols()),
            ));
        }
        let rtu = dictionary.transpose() * u;
        let k = dictionary.transpose() * dictionary - &rtu * rtu.transpose();
        Ok(GramFactors { k, pv_perp: complement_projector(v) })
    }

    fn entry(&self, (i, j): (usize, usize), (a, b): (usize, usize)) -> f64 {
        self.k[(i, a)] * self.pv_perp[(j, b)]
    }

    /// Rows indexed by `rows`, columns by `support`.
    pub fn cross(&self, rows: &[(usize, usize)], support: &SupportSet) -> Mat {
        let cols = support.entries();
        Mat::from_fn(rows.len(), cols.len(), |p, q| self.entry(rows[p], cols[q]))
    }
}

fn check_support(support: &SupportSet, d: usize, m: usize) -> Result<()> {
    match support.iter().find(|&(i, j)| i >= d || j >= m) {
        Some((i, j)) => Err(DemixError::invalid(format!("support entry ({i}, {j}) outside {d}x{m}"))),
        None => Ok(()),
    }
}

/// `Ã_Ω Ã_Ωᵀ` with `Ã = (I − P_V) ⊗ Rᵀ(I − P_U)`, rows restricted to the support.
pub fn gram_omega(dictionary: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> Result<Mat> {
    check_support(support, dictionary.ncols(), v.nrows())?;
    let f = GramFactors::new(dictionary, u, v)?;
    Ok(f.cross(support.entries(), support))
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub gamma: Mat,
    /// Coefficients of the Gram system, in support order.
    pub w: Vector,
    pub x_cert: Mat,
    pub b_omega: Vector,
}

fn b_omega(dictionary: &Mat, truth: &GroundTruth, lambda: f64) -> Vector {
    let cross = dictionary.transpose() * truth.u() * truth.v().transpose();
    let sign = truth.sign_a0();
    Vector::from_iterator(truth.sparsity(), truth.support().iter().map(|(i, j)| lambda * sign[(i, j)] - cross[(i, j)]))
}

fn check_truth(dictionary: &Mat, truth: &GroundTruth) -> Result<()> {
    if truth.u().nrows() != dictionary.nrows() || truth.a0().nrows() != dictionary.ncols() {
        return Err(DemixError::dims(
            "certificate",
            format!("truth with n = {} and d = {}", dictionary.nrows(), dictionary.ncols()),
            format!("n = {}, d = {}", truth.u().nrows(), truth.a0().nrows()),
        ));
    }
    Ok(())
}

fn gram_spectrum(gram: &Mat) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(gram)?;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo.is_nan() || lo <= SINGULAR_GRAM_TOL * hi.max(f64::MIN_POSITIVE) {
        return Err(DemixError::DegenerateSupport { min_eigenvalue: lo, max_eigenvalue: hi });
    }
    Ok((lo, hi))
}

fn spd_inverse(gram: &Mat) -> Result<(Mat, f64, f64)> {
    let (lo, hi) = gram_spectrum(gram)?;
    let chol = crate::linalg::cholesky(gram)?;
    Ok((chol.inverse(), lo, hi))
}

/// `Γ = UVᵀ + (I − P_U) R W (I − P_V)` where `W` carries the solution of
/// `Gram · w = b_Ω` on the support.
pub fn build_certificate(dictionary: &Mat, truth: &GroundTruth, lambda: f64) -> Result<Certificate> {
    check_truth(dictionary, truth)?;
    let (u, v) = (truth.u(), truth.v());
    let (n, m) = (dictionary.nrows(), v.nrows());
    let uv = u * v.transpose();
    let b = b_omega(dictionary, truth, lambda);
    if truth.sparsity() == 0 {
        return Ok(Certificate { gamma: uv, w: Vector::zeros(0), x_cert: Mat::zeros(n, m), b_omega: b });
    }
    let gram = gram_omega(dictionary, u, v, truth.support())?;
    gram_spectrum(&gram)?;
    let w = crate::linalg::cholesky(&gram)?.solve(&b);
    let mut coeffs = Mat::zeros(dictionary.ncols(), m);
    for ((i, j), &wij) in truth.support().iter().zip(w.iter()) {
        coeffs[(i, j)] = wij;
    }
    let left = dictionary * coeffs;
    let left = &left - u * (u.transpose() * &left);
    let x_cert = &left - (&left * v) * v.transpose();
    Ok(Certificate { gamma: uv + &x_cert, w, x_cert, b_omega: b })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QNorm {
    pub value: f64,
    /// `false` when only a sample of rows was scanned (a lower bound).
    pub exact: bool,
    pub rows: usize,
}

/// `‖Q‖_{∞,∞}` for `Q = Ã_{Ω⊥} Ã_Ωᵀ (Ã_Ω Ã_Ωᵀ)⁻¹`, scanning rows independently.
pub fn q_norm_inf_inf(factors: &GramFactors, support: &SupportSet, gram_inv: &Mat, d: usize, m: usize) -> QNorm {
    let mut rows = support.complement(d, m);
    let exact = rows.len() <= Q_ROW_LIMIT;
    if !exact {
        let mut rng = ChaCha8Rng::seed_from_u64(Q_SAMPLE_SEED);
        let mut picks = rand::seq::index::sample(&mut rng, rows.len(), Q_ROW_LIMIT).into_vec();
        picks.sort_unstable();
        rows = picks.into_iter().map(|p| rows[p]).collect();
    }
    let cols = support.entries();
    let value = rows
        .par_iter()
        .map(|&row| {
            let g = Vector::from_iterator(cols.len(), cols.iter().map(|&c| factors.entry(row, c)));
            (gram_inv * g).lp_norm(1)
        })
        .reduce(|| 0.0, f64::max);
    QNorm { value, exact, rows: rows.len() }
}

/// The full `Q` matrix over all off-support rows.
pub fn q_matrix(dictionary: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> Result<Mat> {
    let f = GramFactors::new(dictionary, u, v)?;
    check_support(support, dictionary.ncols(), v.nrows())?;
    let (inv, _, _) = spd_inverse(&f.cross(support.entries(), support))?;
    let rows = support.complement(dictionary.ncols(), v.nrows());
    Ok(f.cross(&rows, support) * inv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub lambda: f64,
    pub c1_residual: f64,
    pub c2_residual: f64,
    pub c3_value: f64,
    pub c4_value: f64,
    pub passes: bool,
    /// `None` on an empty support.
    pub sigma_min_a_omega: Option<f64>,
    pub gram_condition: Option<f64>,
    pub b_omega_norm2: f64,
    pub b_omega_norminf: f64,
    pub q_norm: Option<QNorm>,
    /// `‖P_Ω(RᵀUVᵀ)‖_∞`.
    pub omega_cross_inf: f64,
    /// `‖Q b_Ω‖_∞ + ‖P_Ω⊥(RᵀUVᵀ)‖_∞`, the bound that controls the fourth condition.
    pub c4_bound: f64,
}

impl CertificateReport {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:e}"));
        kv.push("lambda", self.lambda)
            .push("c1_residual", self.c1_residual)
            .push("c2_residual", self.c2_residual)
            .push("c3_value", self.c3_value)
            .push("c4_value", self.c4_value)
            .push("passes", self.passes)
            .push("sigma_min_a_omega", opt(self.sigma_min_a_omega))
            .push("gram_condition", opt(self.gram_condition))
            .push("b_omega_norm2", self.b_omega_norm2)
            .push("b_omega_norminf", self.b_omega_norminf)
            .push("q_norm_inf_inf", opt(self.q_norm.map(|q| q.value)))
            .push("q_norm_exact", self.q_norm.map_or_else(|| "n/a".to_string(), |q| q.exact.to_string()))
            .push("omega_cross_inf", self.omega_cross_inf)
            .push("c4_bound", self.c4_bound);
        kv
    }
}

fn off_support_max(m: &Mat, support: &SupportSet) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !support.contains(i, j) {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

pub fn verify_conditions(dictionary: &Mat, truth: &GroundTruth, lambda: f64, gamma: &Mat) -> Result<CertificateReport> {
    check_truth(dictionary, truth)?;
    let (u, v) = (truth.u(), truth.v());
    if gamma.shape() != (dictionary.nrows(), v.nrows()) {
        return Err(DemixError::dims(
            "verify_conditions",
            format!("{}x{} certificate", dictionary.nrows(), v.nrows()),
            format!("{}x{}", gamma.nrows(), gamma.ncols()),
        ));
    }
    let (d, m) = (dictionary.ncols(), v.nrows());
    let support = truth.support();
    let uv = u * v.transpose();
    let rt_gamma = dictionary.transpose() * gamma;
    let c1_residual = (project_phi(gamma, u, v)? - &uv).norm();
    let c2_residual = (project_omega(&rt_gamma, support)? - truth.sign_a0() * lambda).norm();
    let c3_value = spectral_norm(&project_phi_perp(gamma, u, v)?)?;
    let c4_value = off_support_max(&rt_gamma, support);

    let cross = dictionary.transpose() * &uv;
    let omega_cross_inf = max_abs(&project_omega(&cross, support)?);
    let off_cross_inf = off_support_max(&cross, support);
    let b = b_omega(dictionary, truth, lambda);

    let (sigma_min_a_omega, gram_condition, q_norm, qb_inf) = if support.is_empty() {
        (None, None, None, 0.0)
    } else {
        let f = GramFactors::new(dictionary, u, v)?;
        let gram = f.cross(support.entries(), support);
        let (inv, lo, hi) = spd_inverse(&gram)?;
        let q = q_norm_inf_inf(&f, support, &inv, d, m);
        let rows = support.complement(d, m);
        let qb = if rows.is_empty() { 0.0 } else { (f.cross(&rows, support) * (&inv * &b)).amax() };
        (Some(lo.sqrt()), Some(hi / lo), Some(q), qb)
    };

    let passes = c1_residual <= EQUALITY_TOL && c2_residual <= EQUALITY_TOL && c3_value < 1.0 && c4_value < lambda;
    Ok(CertificateReport {
        lambda,
        c1_residual,
        c2_residual,
        c3_value,
        c4_value,
        passes,
        sigma_min_a_omega,
        gram_condition,
        b_omega_norm2: b.norm(),
        b_omega_norminf: if b.is_empty() { 0.0 } else { b.amax() },
        q_norm,
        omega_cross_inf,
        c4_bound: qb_inf + off_cross_inf,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaStatus {
    Holds,
    Violated,
    /// Nothing to bound (empty support).
    Vacuous,
}

impl LemmaStatus {
    pub fn ok(self) -> bool {
        self != LemmaStatus::Violated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaStatus::Holds => "holds",
            LemmaStatus::Violated => "violated",
            LemmaStatus::Vacuous => "vacuous",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    pub status: LemmaStatus,
    /// Measured side; for the lower bound this is `σ_min(Ã_Ω)`.
    pub measured: f64,
    pub bound: f64,
}

impl LemmaCheck {
    fn upper(measured: f64, bound: f64) -> Self {
        let status = if bound - measured >= -LEMMA_SLACK { LemmaStatus::Holds } else { LemmaStatus::Violated };
        LemmaCheck { status, measured, bound }
    }

    fn lower(measured: f64, bound: f64) -> Self {
        let status = if measured - bound >= -LEMMA_SLACK { LemmaStatus::Holds } else { LemmaStatus::Violated };
        LemmaCheck { status, measured, bound }
    }

    fn vacuous() -> Self {
        LemmaCheck { status: LemmaStatus::Vacuous, measured: f64::NAN, bound: f64::NAN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaFlags {
    /// `σ_min(Ã_Ω) ≥ √lo (1 − μ)`.
    pub sigma_min: LemmaCheck,
    /// `‖b_Ω‖₂ ≤ λ√s + √(r hi) μ`.
    pub b_norm2: LemmaCheck,
    /// `‖b_Ω‖_∞ ≤ λ + ‖P_Ω(RᵀUVᵀ)‖_∞`.
    pub b_norminf: LemmaCheck,
    /// `‖Q‖_{∞,∞} ≤ C`.
    pub q_norm: LemmaCheck,
}

impl LemmaFlags {
    pub fn all_ok(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.status.ok())
    }

    pub fn checks(&self) -> [(&'static str, LemmaCheck); 4] {
        [
            ("lemma_sigma_min", self.sigma_min),
            ("lemma_b_norm2", self.b_norm2),
            ("lemma_b_norminf", self.b_norminf),
            ("lemma_q_norm", self.q_norm),
        ]
    }

    pub fn violations(&self) -> Vec<&'static str> {
        self.checks().into_iter().filter(|(_, c)| !c.status.ok()).map(|(n, _)| n).collect()
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        for (name, check) in self.checks() {
            kv.push(name, check.status.as_str())
                .push(format!("{name}_measured"), check.measured)
                .push(format!("{name}_bound"), check.bound);
        }
        kv
    }
}

pub fn verify_lemma_bounds(
    report: &CertificateReport,
    incoherence: &IncoherenceReport,
    theory: &TheoryReport,
    lambda: f64,
    r: usize,
    s: usize,
) -> Result<LemmaFlags> {
    let (lo, hi) = match (&incoherence.frame, &incoherence.ric) {
        (Some(f), _) => DictionaryBounds::Frame { lower: f.lower, upper: f.upper }.lower_upper(),
        (None, Some(ric)) => DictionaryBounds::Rip { delta: ric.delta }.lower_upper(),
        _ => return Err(DemixError::invalid("incoherence report lacks dictionary bounds")),
    };
    if s == 0 {
        return Ok(LemmaFlags {
            sigma_min: LemmaCheck::vacuous(),
            b_norm2: LemmaCheck::vacuous(),
            b_norminf: LemmaCheck::vacuous(),
            q_norm: LemmaCheck::vacuous(),
        });
    }
    let mu = incoherence.mu;
    let sigma_min = report
        .sigma_min_a_omega
        .ok_or_else(|| DemixError::invalid("certificate report has no Gram spectrum for a non-empty support"))?;
    let q_norm = match report.q_norm {
        Some(q) => LemmaCheck::upper(q.value, theory.big_c),
        None => LemmaCheck::vacuous(),
    };
    Ok(LemmaFlags {
        sigma_min: LemmaCheck::lower(sigma_min, lo.max(0.0).sqrt() * (1.0 - mu)),
        b_norm2: LemmaCheck::upper(report.b_omega_norm2, lambda * (s as f64).sqrt() + (r as f64 * hi).sqrt() * mu),
        b_norminf: LemmaCheck::upper(report.b_omega_norminf, lambda + report.omega_cross_inf),
        q_norm,
    })
}
