//! Synthetic instances, recovery evaluation and the phase-transition harness.

mod grid;

pub use grid::{
    emit_curve_csv, emit_grid_csv, emit_heatmap, emit_trials_csv, format_curve_csv, format_grid_csv, format_heatmap,
    format_trials_csv, reference_curve, row_inversions, run_phase_grid, CellStats, HeatmapQuantity, LambdaPolicy,
    PhaseGrid, PhaseGridSpec, TrialRecord, GRID_CSV_HEADER,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::thin_svd;
use crate::solver::SolveReport;
use crate::{DemixError, DemixInstance, GroundTruth, Mat, Result, Vector};

/// Relative-error threshold for declaring recovery.
pub const DEFAULT_SUCCESS_TOL: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return Err(DemixError::invalid(format!(
                "dimensions must be positive, got n = {}, m = {}, d = {}",
                self.n, self.m, self.d
            )));
        }
        if self.r > self.n.min(self.m) {
            return Err(DemixError::invalid(format!("rank {} exceeds min(n, m) = {}", self.r, self.n.min(self.m))));
        }
        if self.s > self.d * self.m {
            return Err(DemixError::invalid(format!("sparsity {} exceeds d*m = {}", self.s, self.d * self.m)));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn normalize_columns(mut r: Mat) -> Result<Mat> {
    for mut col in r.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(DemixError::Numerical("drew an all-zero dictionary column".into()));
        }
        col /= norm;
    }
    Ok(r)
}

/// `s` distinct cells of a `d × m` grid, sorted, from a uniform draw over
/// the row-major linear index.
fn draw_support(rng: &mut ChaCha8Rng, d: usize, m: usize, s: usize) -> Vec<(usize, usize)> {
    let mut picks = rand::seq::index::sample(rng, d * m, s).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|k| (k / m, k % m)).collect()
}

fn rademacher_on(rng: &mut ChaCha8Rng, support: &[(usize, usize)], d: usize, m: usize) -> Mat {
    let mut a0 = Mat::zeros(d, m);
    for &(i, j) in support {
        a0[(i, j)] = rademacher(rng);
    }
    a0
}

fn truth_from_product(x0: Mat, a0: Mat, r: usize) -> Result<GroundTruth> {
    let (n, m) = x0.shape();
    if r == 0 {
        return GroundTruth::with_low_rank(Mat::zeros(n, 0), Vector::zeros(0), Mat::zeros(m, 0), x0, a0);
    }
    let svd = thin_svd(&x0)?;
    let u = svd.u.columns(0, r).into_owned();
    let v = svd.v_t.rows(0, r).transpose();
    let sigma = svd.singular_values.rows(0, r).into_owned();
    GroundTruth::with_low_rank(u, sigma, v, x0, a0)
}

/// Planted instance: Gaussian dictionary with unit columns, `X₀` the product
/// of two Gaussian factors, `A₀` Rademacher on a uniform support.
///
/// Draw order from `ChaCha8Rng::seed_from_u64(seed)`: dictionary, left
/// factor, right factor (each column-major), support, signs.
pub fn generate_instance(spec: &GenSpec) -> Result<(DemixInstance, GroundTruth)> {
    spec.validate()?;
    let GenSpec { n, m, d, r, s, seed } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dictionary = normalize_columns(gaussian(&mut rng, n, d))?;
    let left = gaussian(&mut rng, n, r);
    let right = gaussian(&mut rng, m, r);
    let support = draw_support(&mut rng, d, m, s);
    let a0 = rademacher_on(&mut rng, &support, d, m);
    let x0 = &left * right.transpose();
    let y = &x0 + &dictionary * &a0;
    let truth = truth_from_product(x0, a0, r)?;
    Ok((DemixInstance::new(y, dictionary)?, truth))
}

/// Spec for [`generate_incoherent_thin`]. Rank and sparsity are drawn from
/// the seed when not given.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IncoherentSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// `1` or `2`.
    pub r: Option<usize>,
    pub s: Option<usize>,
    /// Upper end of the drawn sparsity range `1..=max_s`.
    pub max_s: usize,
    pub seed: u64,
}

impl IncoherentSpec {
    pub fn new(n: usize, m: usize, d: usize, seed: u64) -> Self {
        IncoherentSpec { n, m, d, r: None, s: None, max_s: 6, seed }
    }
}

/// Orthogonal matrix distributed uniformly on `O(n)`.
fn haar_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let qr = gaussian(rng, n, n).qr();
    let mut q = qr.q();
    let diag = qr.r().diagonal();
    for (mut col, &rii) in q.column_iter_mut().zip(diag.iter()) {
        if rii < 0.0 {
            col.neg_mut();
        }
    }
    q
}

fn orthonormalize(m: Mat) -> Mat {
    m.qr().q()
}

/// Thin instance built to be well inside the recovery regime: an
/// orthonormal dictionary, a column space nearly orthogonal to it and a row
/// space with flat leverage (`γ_V = r/m`).
///
/// `R` is the first `d` columns of a Haar orthogonal `Q`; `U` spans the next
/// `r` columns of `Q` tilted towards the dictionary by a uniform `ε < 0.05`;
/// `V` is a random sign vector (`r = 1`) or a permuted, sign-flipped
/// cosine/sine pair (`r = 2`). Singular values are uniform on `[1, 10]`.
pub fn generate_incoherent_thin(spec: &IncoherentSpec) -> Result<(DemixInstance, GroundTruth)> {
    let IncoherentSpec { n, m, d, seed, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = match spec.r {
        Some(r) => r,
        None => rng.random_range(1..=2),
    };
    if !(1..=2).contains(&r) {
        return Err(DemixError::invalid(format!("incoherent generator supports rank 1 or 2, got {r}")));
    }
    if d + r > n || m < 4 {
        return Err(DemixError::invalid(format!(
            "incoherent generator needs d + r <= n and m >= 4, got n = {n}, m = {m}, d = {d}, r = {r}"
        )));
    }
    let s = match spec.s {
        Some(s) => s,
        None => rng.random_range(1..=spec.max_s.max(1)),
    };
    if s > d * m {
        return Err(DemixError::invalid(format!("sparsity {s} exceeds d*m = {}", d * m)));
    }

    let q = haar_orthogonal(&mut rng, n);
    let dictionary = q.columns(0, d).into_owned();
    let tilt: f64 = rng.random_range(0.0..0.05);
    let u = orthonormalize(q.columns(d, r) + q.columns(0, r) * tilt);

    let v = if r == 1 {
        Mat::from_fn(m, 1, |_, _| rademacher(&mut rng) / (m as f64).sqrt())
    } else {
        let f = rng.random_range(1..m / 2) as f64;
        let scale = (2.0 / m as f64).sqrt();
        let base = Mat::from_fn(m, 2, |j, c| {
            let phase = 2.0 * std::f64::consts::PI * f * j as f64 / m as f64;
            scale * if c == 0 { phase.cos() } else { phase.sin() }
        });
        let mut perm: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let mut shuffled = Mat::from_fn(m, 2, |j, c| base[(perm[j], c)]);
        for mut row in shuffled.row_iter_mut() {
            if !rng.random_bool(0.5) {
                row.neg_mut();
            }
        }
        orthonormalize(shuffled)
    };

    let support = draw_support(&mut rng, d, m, s);
    let a0 = rademacher_on(&mut rng, &support, d, m);
    let mut sigma: Vec<f64> = (0..r).map(|_| rng.random_range(1.0..10.0)).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let sigma = Vector::from_vec(sigma);
    let truth = GroundTruth::from_factors(u, sigma, v, a0)?;
    let y = truth.low_rank() + &dictionary * truth.a0();
    Ok((DemixInstance::new(y, dictionary)?, truth))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessOutcome {
    pub rel_err_x: f64,
    pub rel_err_a: f64,
    pub x_ok: bool,
    pub a_ok: bool,
    pub both: bool,
}

/// `‖E − Ê‖_F / ‖E‖_F`, or the absolute error when `E = 0`.
pub fn relative_error(truth: &Mat, estimate: &Mat) -> f64 {
    let err = (truth - estimate).norm();
    let scale = truth.norm();
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub fn evaluate_estimates(truth: &GroundTruth, x_hat: &Mat, a_hat: &Mat, tol: f64) -> SuccessOutcome {
    let rel_err_x = relative_error(truth.low_rank(), x_hat);
    let rel_err_a = relative_error(truth.a0(), a_hat);
    let x_ok = rel_err_x <= tol;
    let a_ok = rel_err_a <= tol;
    SuccessOutcome { rel_err_x, rel_err_a, x_ok, a_ok, both: x_ok && a_ok }
}

pub fn evaluate_success(truth: &GroundTruth, report: &SolveReport, tol: f64) -> SuccessOutcome {
    evaluate_estimates(truth, &report.x_hat, &report.a_hat, tol)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trial seed: `h ← splitmix64(master)`, then `h ← splitmix64(h ⊕ x)` for
/// `x = r, s, t` in turn.
pub fn mix_seed(master: u64, r: usize, s: usize, t: usize) -> u64 {
    [r as u64, s as u64, t as u64].into_iter().fold(splitmix64(master), |h, x| splitmix64(h ^ x))
}
