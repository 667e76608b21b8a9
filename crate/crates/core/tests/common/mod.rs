//! Reference implementations used as oracles. Each one takes a different
//! route from the library code it checks.
#![allow(dead_code)]

use demix::{Mat, SupportSet};
use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn unit_columns(mut m: Mat) -> Mat {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    m
}

pub fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    gaussian(rng, rows, cols).qr().q()
}

pub fn random_support(rng: &mut ChaCha8Rng, d: usize, m: usize, s: usize) -> SupportSet {
    let picks = rand::seq::index::sample(rng, d * m, s).into_vec();
    SupportSet::new(picks.into_iter().map(|k| (k % d, k / d)).collect(), d, m).unwrap()
}

/// Full SVD, shrink, reassemble.
pub fn svt_oracle(m: &Mat, tau: f64) -> Mat {
    let mut svd = SVD::new(m.clone(), true, true);
    for s in svd.singular_values.iter_mut() {
        *s = (*s - tau).max(0.0);
    }
    svd.recompose().unwrap()
}

pub fn shrink_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Extreme eigenvalues of `RᵀR` by the symmetric eigensolver.
pub fn frame_oracle(r: &Mat) -> (f64, f64) {
    let ev = (r.transpose() * r).symmetric_eigenvalues();
    (ev.min(), ev.max())
}

pub fn spectral_oracle(m: &Mat) -> f64 {
    (m.transpose() * m).symmetric_eigenvalues().max().sqrt()
}

fn projectors(u: &Mat, v: &Mat) -> (Mat, Mat) {
    (u * u.transpose(), v * v.transpose())
}

fn p_phi_direct(z: &Mat, pu: &Mat, pv: &Mat) -> Mat {
    pu * z + z * pv - pu * z * pv
}

fn vec_col_major(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Rows `vec(...)` of `Ã = (I − P_V) ⊗ Rᵀ(I − P_U)` restricted to the
/// support, built through the Kronecker product, then `Ã_Ω Ã_Ωᵀ`.
pub fn gram_brute_force(r: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> Mat {
    let (n, d) = r.shape();
    let m = v.nrows();
    let (pu, pv) = projectors(u, v);
    let left = DMatrix::<f64>::identity(m, m) - pv;
    let right = r.transpose() * (DMatrix::<f64>::identity(n, n) - pu);
    let full = left.kronecker(&right);
    let rows: Vec<usize> = support.iter().map(|(i, j)| j * d + i).collect();
    let a = full.select_rows(&rows);
    &a * a.transpose()
}

/// `μ = σ_max(M R_N⁻¹)` where `N` maps support coefficients to `vec(RH)`,
/// `M` to `vec(P_Φ(RH))` and `N = Q_N R_N`.
pub fn mu_oracle(r: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> f64 {
    let (mm, nn) = mu_operators(r, u, v, support);
    let rn = nn.qr().r();
    let inv = rn.try_inverse().unwrap();
    spectral_oracle(&(mm * inv))
}

pub fn mu_operators(r: &Mat, u: &Mat, v: &Mat, support: &SupportSet) -> (Mat, Mat) {
    let (n, d) = r.shape();
    let m = v.nrows();
    let (pu, pv) = projectors(u, v);
    let s = support.len();
    let mut mm = DMatrix::zeros(n * m, s);
    let mut nn = DMatrix::zeros(n * m, s);
    for (col, (i, j)) in support.iter().enumerate() {
        let mut h = DMatrix::zeros(d, m);
        h[(i, j)] = 1.0;
        let z = r * h;
        mm.set_column(col, &vec_col_major(&p_phi_direct(&z, &pu, &pv)));
        nn.set_column(col, &vec_col_major(&z));
    }
    (mm, nn)
}

/// Largest `‖P_Φ(RH)‖_F / ‖RH‖_F` over `samples` Gaussian directions.
pub fn mu_random_search(r: &Mat, u: &Mat, v: &Mat, support: &SupportSet, samples: usize, seed: u64) -> f64 {
    let (mm, nn) = mu_operators(r, u, v, support);
    let mut g = rng(seed);
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let h = DVector::from_fn(support.len(), |_, _| g.sample(StandardNormal));
        best = best.max((&mm * &h).norm() / (&nn * &h).norm());
    }
    best
}

/// Hand-expanded evaluator for the recovery constants.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub thin: bool,
    pub m: f64,
    pub d: f64,
    pub k: f64,
    pub r: f64,
    pub s: f64,
    pub gur: f64,
    pub gv: f64,
    pub mu: f64,
    pub xi: f64,
    pub fl: f64,
    pub fu: f64,
    pub delta: f64,
}

pub struct Evaluated {
    pub c: f64,
    pub big_c: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub s_max: f64,
}

pub fn evaluate(p: &Params) -> Evaluated {
    let (lower, upper, cap) = if p.thin { (p.fl, p.fu, p.d) } else { (1.0 - p.delta, 1.0 + p.delta, p.k) };
    let t = if p.s < cap { p.s } else { cap };
    let inner = t + p.s * p.gv;
    let c = 0.5 * upper * ((1.0 + 2.0 * p.gur) * inner + 2.0 * p.s * p.gv) - 0.5 * lower * inner;
    let one_minus = 1.0 - p.mu;
    let denominator = lower * one_minus * one_minus - c;
    let big_c = c / denominator;
    let lambda_min =
        if denominator > 0.0 && big_c < 1.0 { p.xi * (1.0 + big_c) / (1.0 - big_c) } else { f64::INFINITY };
    let lambda_max = (lower.sqrt() * one_minus - (p.r * upper).sqrt() * p.mu) / p.s.sqrt();
    let s_max = one_minus * one_minus * p.m / (2.0 * p.r);
    Evaluated { c, big_c, lambda_min, lambda_max, s_max }
}

/// Rank bound of the rank/sparsity curve and its side condition.
pub fn curve_oracle(p: &Params) -> (f64, bool) {
    let e = evaluate(p);
    let (lower, upper) = if p.thin { (p.fl, p.fu) } else { (1.0 - p.delta, 1.0 + p.delta) };
    if !e.lambda_min.is_finite() {
        return (0.0, false);
    }
    let ratio = (1.0 + e.big_c) / (1.0 - e.big_c);
    let valid = p.s.sqrt() <= lower.sqrt() * (1.0 - p.mu) / (p.xi * ratio);
    let bound =
        ((lower / upper).sqrt() * (1.0 - p.mu) / p.mu - p.xi / (upper.sqrt() * p.mu) * ratio * p.s.sqrt()).powi(2);
    (bound, valid)
}
