use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{evaluate_success, generate_instance, mix_seed, GenSpec, DEFAULT_SUCCESS_TOL};
use crate::measures::full_report;
use crate::solver::{default_lambda, solve_demix, SolverConfig};
use crate::theory::{rank_sparsity_curve, CurvePoint, TheoryInputs};
use crate::{DemixError, Result};

pub const GRID_CSV_HEADER: &str =
    "d,r,s,trials,successes_x,successes_a,successes_both,frac_both,mean_rel_err_x,mean_rel_err_a,lambda";
const TRIALS_CSV_HEADER: &str = "d,r,s,trial,seed,lambda,rel_err_x,rel_err_a,x_ok,a_ok,converged,iterations,error";
const CURVE_CSV_HEADER: &str = "s,r_bound,valid";

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    /// `1/√max(n, m)`.
    Default,
    /// Every trial is solved at each value; each cell reports the value with
    /// the most joint successes (the first such value on ties).
    Sweep(Vec<f64>),
}

impl LambdaPolicy {
    fn candidates(&self, n: usize, m: usize) -> Vec<f64> {
        match self {
            LambdaPolicy::Fixed(l) => vec![*l],
            LambdaPolicy::Default => vec![default_lambda(n, m)],
            LambdaPolicy::Sweep(ls) => ls.clone(),
        }
    }

    /// `count` log-spaced values from `lo` to `hi`.
    pub fn log_sweep(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && count >= 1) {
            return Err(DemixError::invalid(format!("bad sweep range [{lo}, {hi}] with {count} points")));
        }
        if count == 1 {
            return Ok(LambdaPolicy::Sweep(vec![lo]));
        }
        let step = (hi / lo).ln() / (count - 1) as f64;
        Ok(LambdaPolicy::Sweep((0..count).map(|i| lo * (step * i as f64).exp()).collect()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGridSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub r_values: Vec<usize>,
    pub s_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub lambda: LambdaPolicy,
    pub success_tol: f64,
    /// Template for every solve; its `lambda` is overwritten per trial.
    pub solver: SolverConfig,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl PhaseGridSpec {
    pub fn new(n: usize, m: usize, d: usize, r_values: Vec<usize>, s_values: Vec<usize>, trials: usize) -> Self {
        PhaseGridSpec {
            n,
            m,
            d,
            r_values,
            s_values,
            trials,
            master_seed: 0,
            lambda: LambdaPolicy::Default,
            success_tol: DEFAULT_SUCCESS_TOL,
            solver: SolverConfig::for_shape(n, m),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty() || self.s_values.is_empty() {
            return Err(DemixError::invalid("rank and sparsity grids must be non-empty"));
        }
        if self.trials == 0 {
            return Err(DemixError::invalid("trials must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(DemixError::invalid("threads must be at least 1"));
        }
        if self.success_tol.is_nan() || self.success_tol <= 0.0 {
            return Err(DemixError::invalid(format!("success tolerance must be positive, got {}", self.success_tol)));
        }
        let lambdas = self.lambda.candidates(self.n, self.m);
        if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(DemixError::invalid(format!("lambda values must be positive and finite, got {lambdas:?}")));
        }
        for &r in &self.r_values {
            for &s in &self.s_values {
                GenSpec { n: self.n, m: self.m, d: self.d, r, s, seed: 0 }.validate()?;
            }
        }
        let mut cfg = self.solver.clone();
        cfg.lambda = lambdas[0];
        cfg.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub r: usize,
    pub s: usize,
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    pub rel_err_x: f64,
    pub rel_err_a: f64,
    pub x_ok: bool,
    pub a_ok: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the solve failed; the trial then counts as a failure.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn both(&self) -> bool {
        self.x_ok && self.a_ok
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    pub r: usize,
    pub s: usize,
    pub trials: usize,
    pub successes_x: usize,
    pub successes_a: usize,
    pub successes_both: usize,
    /// Means over trials whose solve did not fail; NaN if none did.
    pub mean_rel_err_x: f64,
    pub mean_rel_err_a: f64,
    pub lambda: f64,
}

impl CellStats {
    pub fn frac_both(&self) -> f64 {
        self.successes_both as f64 / self.trials as f64
    }

    pub fn frac_x(&self) -> f64 {
        self.successes_x as f64 / self.trials as f64
    }

    pub fn frac_a(&self) -> f64 {
        self.successes_a as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub d: usize,
    pub r_values: Vec<usize>,
    pub s_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub lambda: LambdaPolicy,
    /// Row-major over `(r, s)` in grid order.
    pub cells: Vec<CellStats>,
    /// Reporting-λ trials only, ordered like `cells` then by trial.
    pub trial_records: Vec<TrialRecord>,
}

impl PhaseGrid {
    pub fn cell(&self, r: usize, s: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.r == r && c.s == s)
    }
}

fn run_trial(spec: &PhaseGridSpec, r: usize, s: usize, t: usize, lambda: f64) -> TrialRecord {
    let seed = mix_seed(spec.master_seed, r, s, t);
    let mut record = TrialRecord {
        r,
        s,
        trial: t,
        seed,
        lambda,
        rel_err_x: f64::NAN,
        rel_err_a: f64::NAN,
        x_ok: false,
        a_ok: false,
        converged: false,
        iterations: 0,
        error: None,
    };
    let gen = GenSpec { n: spec.n, m: spec.m, d: spec.d, r, s, seed };
    let outcome = generate_instance(&gen).and_then(|(inst, truth)| {
        let cfg = SolverConfig { lambda, ..spec.solver.clone() };
        solve_demix(&inst, &cfg).map(|rep| (evaluate_success(&truth, &rep, spec.success_tol), rep))
    });
    match outcome {
        Ok((ok, rep)) => {
            record.rel_err_x = ok.rel_err_x;
            record.rel_err_a = ok.rel_err_a;
            record.x_ok = ok.x_ok;
            record.a_ok = ok.a_ok;
            record.converged = rep.converged;
            record.iterations = rep.iterations;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn aggregate(r: usize, s: usize, records: &[TrialRecord]) -> CellStats {
    let solved = || records.iter().filter(|t| t.error.is_none());
    CellStats {
        r,
        s,
        trials: records.len(),
        successes_x: records.iter().filter(|t| t.x_ok).count(),
        successes_a: records.iter().filter(|t| t.a_ok).count(),
        successes_both: records.iter().filter(|t| t.both()).count(),
        mean_rel_err_x: mean(solved().map(|t| t.rel_err_x)),
        mean_rel_err_a: mean(solved().map(|t| t.rel_err_a)),
        lambda: records.first().map_or(f64::NAN, |t| t.lambda),
    }
}

/// Runs every `(r, s, trial, λ)` task and aggregates by cell. Results do
/// not depend on the thread count or scheduling.
pub fn run_phase_grid(spec: &PhaseGridSpec) -> Result<PhaseGrid> {
    spec.validate()?;
    let lambdas = spec.lambda.candidates(spec.n, spec.m);
    let mut tasks = Vec::new();
    for &r in &spec.r_values {
        for &s in &spec.s_values {
            for (li, &lambda) in lambdas.iter().enumerate() {
                for t in 0..spec.trials {
                    tasks.push((r, s, li, t, lambda));
                }
            }
        }
    }
    let work = || -> Vec<TrialRecord> {
        tasks.par_iter().map(|&(r, s, _, t, lambda)| run_trial(spec, r, s, t, lambda)).collect()
    };
    let records = match spec.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| DemixError::invalid(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let per_cell = lambdas.len() * spec.trials;
    let mut cells = Vec::with_capacity(spec.r_values.len() * spec.s_values.len());
    let mut trial_records = Vec::with_capacity(cells.capacity() * spec.trials);
    for chunk in records.chunks(per_cell) {
        let best = chunk
            .chunks(spec.trials)
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                let sa = a.iter().filter(|t| t.both()).count();
                let sb = b.iter().filter(|t| t.both()).count();
                sa.cmp(&sb).then(ib.cmp(ia))
            })
            .map(|(_, trials)| trials)
            .expect("at least one lambda");
        cells.push(aggregate(best[0].r, best[0].s, best));
        trial_records.extend_from_slice(best);
    }
    Ok(PhaseGrid {
        d: spec.d,
        r_values: spec.r_values.clone(),
        s_values: spec.s_values.clone(),
        trials: spec.trials,
        master_seed: spec.master_seed,
        lambda: spec.lambda.clone(),
        cells,
        trial_records,
    })
}

/// Adjacent increases of the joint success fraction along `s`, per rank.
pub fn row_inversions(grid: &PhaseGrid) -> Vec<(usize, usize)> {
    grid.r_values
        .iter()
        .map(|&r| {
            let fracs: Vec<f64> = grid.cells.iter().filter(|c| c.r == r).map(CellStats::frac_both).collect();
            (r, fracs.windows(2).filter(|w| w[1] > w[0]).count())
        })
        .collect()
}

pub fn format_grid_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for c in &grid.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            grid.d,
            c.r,
            c.s,
            c.trials,
            c.successes_x,
            c.successes_a,
            c.successes_both,
            c.frac_both(),
            c.mean_rel_err_x,
            c.mean_rel_err_a,
            c.lambda
        );
    }
    out
}

pub fn format_trials_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for t in &grid.trial_records {
        let error = t.error.as_deref().map(|e| e.replace([',', '\n'], ";")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            grid.d,
            t.r,
            t.s,
            t.trial,
            t.seed,
            t.lambda,
            t.rel_err_x,
            t.rel_err_a,
            t.x_ok,
            t.a_ok,
            t.converged,
            t.iterations,
            error
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatmapQuantity {
    Both,
    X,
    A,
}

fn to_pixel(frac: f64) -> u8 {
    (frac * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Plain graymap, one pixel per cell: rows are ranks from largest to
/// smallest, columns are sparsities in grid order.
pub fn format_heatmap(grid: &PhaseGrid, quantity: HeatmapQuantity) -> String {
    let mut ranks = grid.r_values.clone();
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    let mut sparsities = grid.s_values.clone();
    sparsities.sort_unstable();
    let mut out = format!("P2\n{} {}\n255\n", sparsities.len(), ranks.len());
    for r in ranks {
        let row: Vec<String> = sparsities
            .iter()
            .map(|&s| {
                let c = grid.cell(r, s).expect("cell exists for each grid point");
                let frac = match quantity {
                    HeatmapQuantity::Both => c.frac_both(),
                    HeatmapQuantity::X => c.frac_x(),
                    HeatmapQuantity::A => c.frac_a(),
                };
                to_pixel(frac).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in curve {
        let _ = writeln!(out, "{},{},{}", p.s, p.r_bound, p.valid);
    }
    out
}

/// Theory curve over `spec.s_values`, measured on one reference instance per
/// sparsity level at the smallest rank of the grid. The reference seed for
/// level `s` is `mix_seed(master_seed, 0, s, 0)`, which no trial uses while
/// every rank in the grid is positive.
pub fn reference_curve(spec: &PhaseGridSpec, k: Option<usize>, scale: f64) -> Result<Vec<CurvePoint>> {
    let r = spec.r_values.iter().copied().min().ok_or_else(|| DemixError::invalid("rank grid must be non-empty"))?;
    let mut curve = Vec::with_capacity(spec.s_values.len());
    for &s in &spec.s_values {
        let gen = GenSpec { n: spec.n, m: spec.m, d: spec.d, r, s, seed: mix_seed(spec.master_seed, 0, s, 0) };
        let (instance, truth) = generate_instance(&gen)?;
        let report = full_report(&instance, &truth, k)?;
        let inputs = TheoryInputs::from_report(&report, spec.n, spec.m, spec.d, r, s)?;
        curve.extend(rank_sparsity_curve(&inputs, &[s], scale));
    }
    Ok(curve)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| DemixError::Io { path: path.to_path_buf(), source })
}

pub fn emit_grid_csv(grid: &PhaseGrid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_grid_csv(grid))
}

pub fn emit_trials_csv(grid: &PhaseGrid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_trials_csv(grid))
}

pub fn emit_heatmap(grid: &PhaseGrid, quantity: HeatmapQuantity, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_heatmap(grid, quantity))
}

pub fn emit_curve_csv(curve: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_curve_csv(curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(successes: usize, trials: usize) -> PhaseGrid {
        PhaseGrid {
            d: 3,
            r_values: vec![1],
            s_values: vec![0],
            trials,
            master_seed: 0,
            lambda: LambdaPolicy::Fixed(0.1),
            cells: vec![CellStats {
                r: 1,
                s: 0,
                trials,
                successes_x: successes,
                successes_a: successes,
                successes_both: successes,
                mean_rel_err_x: 0.0,
                mean_rel_err_a: 0.0,
                lambda: 0.1,
            }],
            trial_records: vec![],
        }
    }

    #[test]
    fn heatmap_pixels() {
        assert_eq!(format_heatmap(&one_cell(4, 4), HeatmapQuantity::Both), "P2\n1 1\n255\n255\n");
        assert_eq!(format_heatmap(&one_cell(1, 2), HeatmapQuantity::Both), "P2\n1 1\n255\n128\n");
        assert_eq!(format_heatmap(&one_cell(0, 2), HeatmapQuantity::A), "P2\n1 1\n255\n0\n");
    }

    #[test]
    fn log_sweep_endpoints() {
        let LambdaPolicy::Sweep(v) = LambdaPolicy::log_sweep(0.01, 1.0, 3).unwrap() else { panic!() };
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[1] - 0.1).abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
        assert!(LambdaPolicy::log_sweep(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn csv_header_is_exact() {
        let csv = format_grid_csv(&one_cell(1, 1));
        assert!(csv.starts_with(
            "d,r,s,trials,successes_x,successes_a,successes_both,frac_both,mean_rel_err_x,mean_rel_err_a,lambda\n"
        ));
        assert_eq!(csv.lines().nth(1), Some("3,1,0,1,1,1,1,1,0,0,0.1"));
    }
}
