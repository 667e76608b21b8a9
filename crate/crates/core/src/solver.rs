//! Accelerated proximal gradient for
//! `min ‖X‖* + λ‖A‖₁  s.t.  Y = X + R A`.
//!
//! The equality constraint is replaced by the penalty `(1/2μ̄)‖Y − X − RA‖²_F`
//! and `μ̄` is driven geometrically from `mu0_factor · σ_max(Y)` down to
//! `mu_min_factor · σ_max(Y)`, one decay every `inner_iters` iterations. Each
//! iteration takes a Nesterov-extrapolated proximal gradient step with step
//! size `1/L`, `L = 1 + σ_max(R)²`. If the extrapolated step raises the smoothed
//! objective at the current `μ̄`, the momentum is reset and a plain proximal
//! gradient step from the last iterate is taken instead, so the smoothed
//! objective never increases within an iteration.

use crate::linalg::spectral_norm;
use crate::prox::{shrink, svt};
use crate::{DemixError, DemixInstance, Mat, Result};

/// Objective increase tolerated before the momentum is reset, relative to
/// `max(1, |F|)`.
pub const RESTART_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu0_factor: f64,
    pub eta: f64,
    pub mu_min_factor: f64,
    /// APG iterations per smoothing level.
    pub inner_iters: usize,
    pub max_iters: usize,
    pub tol_feas: f64,
    pub tol_step: f64,
    /// Keep a per-iteration trace in the report.
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            mu0_factor: 0.99,
            eta: 0.9,
            mu_min_factor: 1e-9,
            inner_iters: 2,
            max_iters: 2000,
            tol_feas: 1e-7,
            tol_step: 1e-8,
            record_trace: false,
        }
    }

    /// Defaults with `λ = 1/√max(n, m)`.
    pub fn for_shape(n: usize, m: usize) -> Self {
        Self::new(default_lambda(n, m))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.lambda) {
            return Err(DemixError::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(DemixError::invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !positive(self.mu0_factor) || !positive(self.mu_min_factor) {
            return Err(DemixError::invalid("smoothing factors must be positive"));
        }
        if !positive(self.tol_feas) || !positive(self.tol_step) {
            return Err(DemixError::invalid("tolerances must be positive"));
        }
        if self.max_iters == 0 || self.inner_iters == 0 {
            return Err(DemixError::invalid("max_iters and inner_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `1/√max(n, m)`.
pub fn default_lambda(n: usize, m: usize) -> f64 {
    1.0 / (n.max(m).max(1) as f64).sqrt()
}

/// One iteration of the solver, recorded when `record_trace` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub mu: f64,
    /// Smoothed objective at `mu` of the iterate entering the iteration.
    pub objective_before: f64,
    /// Smoothed objective at `mu` of the iterate leaving the iteration.
    pub objective_after: f64,
    pub restarted: bool,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x_hat: Mat,
    pub a_hat: Mat,
    pub iterations: usize,
    /// `‖Y − X̂ − RÂ‖_F / ‖Y‖_F`.
    pub feas_residual: f64,
    /// `‖X̂‖* + λ‖Â‖₁`.
    pub objective: f64,
    pub converged: bool,
    pub restarts: usize,
    pub final_mu: f64,
    pub trace: Vec<IterationRecord>,
}

/// `1 + σ_max(R)²`, the Lipschitz constant of `(X, A) ↦ X + RA` squared.
pub fn lipschitz_constant(dictionary: &Mat) -> Result<f64> {
    if dictionary.is_empty() {
        return Err(DemixError::invalid("dictionary must be non-empty"));
    }
    let s = spectral_norm(dictionary)?;
    Ok(1.0 + s * s)
}

struct Iterate {
    x: Mat,
    a: Mat,
    nuclear: f64,
    l1: f64,
    residual_sq: f64,
}

impl Iterate {
    fn smoothed(&self, lambda: f64, mu: f64) -> f64 {
        self.nuclear + lambda * self.l1 + self.residual_sq / (2.0 * mu)
    }
}

struct Problem<'a> {
    y: &'a Mat,
    r: &'a Mat,
    r_t: Mat,
    lipschitz: f64,
    lambda: f64,
}

impl Problem<'_> {
    /// Proximal gradient step from `(x, a)` at smoothing level `mu`.
    fn step(&self, x: &Mat, a: &Mat, mu: f64) -> Result<Iterate> {
        // residual = X + RA − Y
        let residual = x + self.r * a - self.y;
        let inv_l = 1.0 / self.lipschitz;
        let gx = x - &residual * inv_l;
        let ga = a - (&self.r_t * &residual) * inv_l;
        let tau = mu * inv_l;
        let low = svt(&gx, tau)?;
        let thresh = self.lambda * tau;
        let a_new = ga.map(|v| shrink(v, thresh));
        let l1 = a_new.iter().map(|v| v.abs()).sum();
        if !low.matrix.iter().chain(a_new.iter()).all(|v| v.is_finite()) {
            return Err(DemixError::Numerical("non-finite iterate".into()));
        }
        let residual_sq = (self.y - &low.matrix - self.r * &a_new).norm_squared();
        Ok(Iterate { x: low.matrix, a: a_new, nuclear: low.nuclear_norm, l1, residual_sq })
    }
}

pub fn solve_demix(instance: &DemixInstance, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let y = instance.y();
    let r = instance.dictionary();
    let (n, m, d) = (instance.n(), instance.m(), instance.d());
    let y_norm = y.norm();
    let sigma_y = spectral_norm(y)?;
    if sigma_y == 0.0 {
        return Ok(SolveReport {
            x_hat: Mat::zeros(n, m),
            a_hat: Mat::zeros(d, m),
            iterations: 0,
            feas_residual: 0.0,
            objective: 0.0,
            converged: true,
            restarts: 0,
            final_mu: 0.0,
            trace: Vec::new(),
        });
    }
    let problem = Problem { y, r, r_t: r.transpose(), lipschitz: lipschitz_constant(r)?, lambda: config.lambda };
    let mut mu = config.mu0_factor * sigma_y;
    let mu_min = config.mu_min_factor * sigma_y;

    let mut current =
        Iterate { x: Mat::zeros(n, m), a: Mat::zeros(d, m), nuclear: 0.0, l1: 0.0, residual_sq: y_norm * y_norm };
    let mut prev_x = current.x.clone();
    let mut prev_a = current.a.clone();
    let (mut t, mut t_prev) = (1.0_f64, 1.0_f64);
    let mut restarts = 0;
    let mut trace = Vec::new();
    let mut feas = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    for k in 1..=config.max_iters {
        iterations = k;
        let beta = (t_prev - 1.0) / t;
        let before = current.smoothed(config.lambda, mu);
        let mut next = if beta > 0.0 {
            let x_ex = &current.x + (&current.x - &prev_x) * beta;
            let a_ex = &current.a + (&current.a - &prev_a) * beta;
            problem.step(&x_ex, &a_ex, mu)?
        } else {
            problem.step(&current.x, &current.a, mu)?
        };
        let mut restarted = false;
        if beta > 0.0 && next.smoothed(config.lambda, mu) > before + RESTART_TOL * before.abs().max(1.0) {
            next = problem.step(&current.x, &current.a, mu)?;
            restarted = true;
            restarts += 1;
        }
        if restarted {
            t = 1.0;
            t_prev = 1.0;
        } else {
            t_prev = t;
            t = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        }
        if config.record_trace {
            trace.push(IterationRecord {
                mu,
                objective_before: before,
                objective_after: next.smoothed(config.lambda, mu),
                restarted,
            });
        }

        let dx = (&next.x - &current.x).norm_squared() + (&next.a - &current.a).norm_squared();
        let size = next.x.norm_squared() + next.a.norm_squared();
        let rel_step = if size > 0.0 { (dx / size).sqrt() } else { dx.sqrt() };
        feas = next.residual_sq.sqrt() / y_norm;

        prev_x = std::mem::replace(&mut current.x, next.x);
        prev_a = std::mem::replace(&mut current.a, next.a);
        current.nuclear = next.nuclear;
        current.l1 = next.l1;
        current.residual_sq = next.residual_sq;

        if feas <= config.tol_feas && rel_step <= config.tol_step {
            converged = true;
            break;
        }
        if k % config.inner_iters == 0 {
            mu = (config.eta * mu).max(mu_min);
        }
    }

    Ok(SolveReport {
        objective: current.nuclear + config.lambda * current.l1,
        x_hat: current.x,
        a_hat: current.a,
        iterations,
        feas_residual: feas,
        converged,
        restarts,
        final_mu: mu,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_examples() {
        assert!((lipschitz_constant(&Mat::identity(4, 4)).unwrap() - 2.0).abs() < 1e-14);
        assert!((lipschitz_constant(&(Mat::identity(3, 3) * 2.0)).unwrap() - 5.0).abs() < 1e-13);
        assert!(lipschitz_constant(&Mat::zeros(0, 0)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.1).validate().is_ok());
        assert!(SolverConfig::new(0.0).validate().is_err());
        let mut c = SolverConfig::new(0.1);
        c.eta = 1.0;
        assert!(c.validate().is_err());
        c = SolverConfig::new(0.1);
        c.max_iters = 0;
        assert!(c.validate().is_err());
        assert!((default_lambda(50, 20) - 1.0 / 50f64.sqrt()).abs() < 1e-15);
    }

    fn single_entry(lambda: f64) -> SolveReport {
        let y = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let inst = DemixInstance::new(y, Mat::identity(2, 2)).unwrap();
        solve_demix(&inst, &SolverConfig::new(lambda)).unwrap()
    }

    #[test]
    fn cheaper_regularizer_wins() {
        let y = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sparse = single_entry(0.5);
        assert!(sparse.x_hat.amax() < 1e-4, "{}", sparse.x_hat);
        assert!((&sparse.a_hat - &y).amax() < 1e-4);
        let low = single_entry(2.0);
        assert!((&low.x_hat - &y).amax() < 1e-4);
        assert!(low.a_hat.amax() < 1e-4);
        assert!(low.converged && low.feas_residual <= 1e-7);
    }

    #[test]
    fn zero_observation() {
        let inst = DemixInstance::new(Mat::zeros(3, 3), Mat::identity(3, 3)).unwrap();
        let rep = solve_demix(&inst, &SolverConfig::new(0.3)).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.x_hat, Mat::zeros(3, 3));
    }

    #[test]
    fn iteration_cap_is_not_an_error() {
        let y = Mat::from_fn(6, 5, |i, j| ((i * 5 + j) as f64).sin());
        let inst = DemixInstance::new(y, Mat::identity(6, 6)).unwrap();
        let mut cfg = SolverConfig::new(0.4);
        cfg.max_iters = 3;
        let rep = solve_demix(&inst, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(rep.feas_residual > 0.0);
    }
}
