//! `demix` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, bad config files,
//! invalid parameter values), 2 on runtime failures (I/O, malformed matrix
//! files, numerical failures).

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use demix::certificate::{build_certificate, verify_conditions, verify_lemma_bounds};
use demix::experiments::{
    emit_curve_csv, emit_grid_csv, emit_heatmap, emit_trials_csv, evaluate_success, generate_incoherent_thin,
    generate_instance, reference_curve, run_phase_grid, GenSpec, HeatmapQuantity, IncoherentSpec, LambdaPolicy,
    PhaseGridSpec, DEFAULT_SUCCESS_TOL,
};
use demix::kv::KvBlock;
use demix::measures::full_report;
use demix::model::{read_matrix, write_matrix};
use demix::solver::{default_lambda, solve_demix, SolverConfig};
use demix::theory::{check_assumptions, gamma_ur_ceiling, rank_sparsity_curve, DictionaryBounds, TheoryInputs};
use demix::{DemixError, DemixInstance, GroundTruth};

const REPORT_SEP: &str = " = ";
const META_SEP: &str = "=";

#[derive(Parser)]
#[command(name = "demix", version, about = "Low-rank plus dictionary-sparse demixing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted instance and write its matrices.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Solve the convex demixing program for an observation.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Incoherence measures of a generated instance.
    #[command(args_override_self = true)]
    Measure(MeasureArgs),
    /// Recovery-theory quantities and the rank-sparsity curve.
    #[command(args_override_self = true)]
    Theory(TheoryArgs),
    /// Build and verify the dual certificate of a generated instance.
    #[command(args_override_self = true)]
    Certify(CertifyArgs),
    /// Phase-transition grid over rank and sparsity.
    #[command(args_override_self = true)]
    Phase(PhaseArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Defaults to `n`.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: usize,
    /// Required unless `--incoherent`.
    #[arg(long)]
    r: Option<usize>,
    /// Required unless `--incoherent`.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Thin instance with a near-orthonormal dictionary and spread-out
    /// subspaces; rank and sparsity are drawn from the seed when not given.
    #[arg(long)]
    incoherent: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Defaults to `1/√max(n, m)`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Relative feasibility tolerance for stopping.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 2)]
    inner_iters: usize,
}

impl SolverArgs {
    fn config(&self, n: usize, m: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.lambda.unwrap_or_else(|| default_lambda(n, m)));
        cfg.max_iters = self.max_iters;
        cfg.tol_feas = self.tol;
        cfg.inner_iters = self.inner_iters;
        cfg
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Observation matrix; defaults to `DIR/Y.txt`.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Dictionary matrix; defaults to `DIR/R.txt`.
    #[arg(long)]
    r_mat: Option<PathBuf>,
    /// Instance directory written by `gen`. When it holds `X0.txt` and
    /// `A0.txt` the report includes recovery errors.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_SUCCESS_TOL)]
    success_tol: f64,
    /// Defaults to the instance directory, or the directory of `--y`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    dir: PathBuf,
    /// RIP order; defaults to the largest column count of the support.
    #[arg(long)]
    k: Option<usize>,
    /// Defaults to `--dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// Largest sparsity on the curve; defaults to `m`.
    #[arg(long)]
    s_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    s_step: usize,
    #[arg(long, default_value_t = 1.0)]
    curve_scale: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    dir: PathBuf,
    /// Defaults to `1/√max(n, m)`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: usize,
    /// Ranks 1..=r-max; defaults to `min(10, n, m)`.
    #[arg(long)]
    r_max: Option<usize>,
    /// Defaults to `m`, or `min(4m, dm)` with `--extended`.
    #[arg(long)]
    s_max: Option<usize>,
    /// Sparsities s-step, 2·s-step, … up to s-max; defaults to
    /// `max(1, s-max/10)`.
    #[arg(long)]
    s_step: Option<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated values, or `lo:hi:count` for a log-spaced sweep.
    #[arg(long, conflicts_with = "lambda")]
    lambda_sweep: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SUCCESS_TOL)]
    success_tol: f64,
    #[arg(long)]
    threads: Option<usize>,
    /// Allow sparsity beyond `m`.
    #[arg(long)]
    extended: bool,
    #[arg(long, default_value_t = 1.0)]
    curve_scale: f64,
    /// RIP order for the curve; defaults per reference instance.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<DemixError> for CliError {
    fn from(e: DemixError) -> Self {
        match e {
            DemixError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn write_kv(block: &KvBlock, path: &Path, sep: &str) -> CliResult {
    block.write(path, sep)?;
    Ok(())
}

fn input_file(path: &Path) -> CliResult<PathBuf> {
    if !path.is_file() {
        return Err(CliError::Runtime(format!("{}: no such file", path.display())));
    }
    Ok(path.to_path_buf())
}

fn load_instance(dir: &Path) -> CliResult<(DemixInstance, GroundTruth)> {
    let y = read_matrix(input_file(&dir.join("Y.txt"))?)?;
    let r = read_matrix(input_file(&dir.join("R.txt"))?)?;
    let x0 = read_matrix(input_file(&dir.join("X0.txt"))?)?;
    let a0 = read_matrix(input_file(&dir.join("A0.txt"))?)?;
    Ok((DemixInstance::new(y, r)?, GroundTruth::from_matrices(x0, a0, None)?))
}

fn lambda_policy(args: &PhaseArgs) -> CliResult<LambdaPolicy> {
    if let Some(l) = args.solver.lambda {
        return Ok(LambdaPolicy::Fixed(l));
    }
    let Some(text) = &args.lambda_sweep else {
        return Ok(LambdaPolicy::Default);
    };
    let bad = || usage(format!("--lambda-sweep: cannot parse '{text}' (use v1,v2,... or lo:hi:count)"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(LambdaPolicy::log_sweep(lo, hi, count)?);
    }
    let values: Vec<f64> = text.split(',').map(|v| v.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
    Ok(LambdaPolicy::Sweep(values))
}

fn policy_text(policy: &LambdaPolicy, n: usize, m: usize) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    match policy {
        LambdaPolicy::Fixed(l) => format!("fixed:{l}"),
        LambdaPolicy::Default => format!("default:{}", default_lambda(n, m)),
        LambdaPolicy::Sweep(v) => format!("sweep:{}", join(v)),
    }
}

fn solver_meta(kv: &mut KvBlock, cfg: &SolverConfig) {
    kv.push("mu0_factor", cfg.mu0_factor)
        .push("eta", cfg.eta)
        .push("mu_min_factor", cfg.mu_min_factor)
        .push("inner_iters", cfg.inner_iters)
        .push("max_iters", cfg.max_iters)
        .push("tol_feas", cfg.tol_feas)
        .push("tol_step", cfg.tol_step);
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn cmd_gen(args: &GenArgs) -> CliResult {
    let m = args.m.unwrap_or(args.n);
    let mut meta = KvBlock::new();
    meta.push("command", "gen").push("version", env!("CARGO_PKG_VERSION"));
    let (instance, truth) = if args.incoherent {
        let mut spec = IncoherentSpec::new(args.n, m, args.d, args.seed);
        spec.r = args.r;
        spec.s = args.s;
        let out = generate_incoherent_thin(&spec)?;
        meta.push("generator", "incoherent_thin").push("max_s", spec.max_s);
        out
    } else {
        let (Some(r), Some(s)) = (args.r, args.s) else {
            return Err(usage("gen needs --r and --s unless --incoherent is given"));
        };
        meta.push("generator", "gaussian");
        generate_instance(&GenSpec { n: args.n, m, d: args.d, r, s, seed: args.seed })?
    };
    meta.push("n", args.n)
        .push("m", m)
        .push("d", args.d)
        .push("r", truth.u().ncols())
        .push("s", truth.support().len())
        .push("seed", args.seed);
    create_dir(&args.out_dir)?;
    write_matrix(instance.y(), args.out_dir.join("Y.txt"))?;
    write_matrix(instance.dictionary(), args.out_dir.join("R.txt"))?;
    write_matrix(truth.low_rank(), args.out_dir.join("X0.txt"))?;
    write_matrix(truth.a0(), args.out_dir.join("A0.txt"))?;
    write_kv(&meta, &args.out_dir.join("meta.txt"), META_SEP)?;
    println!("wrote Y.txt, R.txt, X0.txt, A0.txt, meta.txt to {}", args.out_dir.display());
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> CliResult {
    let y_path = match (&args.y, &args.dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join("Y.txt"),
        (None, None) => return Err(usage("solve needs --y and --r-mat, or --dir")),
    };
    let r_path = match (&args.r_mat, &args.dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join("R.txt"),
        (None, None) => return Err(usage("solve needs --r-mat when --dir is not given")),
    };
    let y = read_matrix(input_file(&y_path)?)?;
    let r = read_matrix(input_file(&r_path)?)?;
    let instance = DemixInstance::new(y, r)?;
    let cfg = args.solver.config(instance.n(), instance.m());
    let report = solve_demix(&instance, &cfg)?;

    let out_dir = match (&args.out_dir, &args.dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => y_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let mut kv = KvBlock::new();
    kv.push("lambda", cfg.lambda)
        .push("iterations", report.iterations)
        .push("converged", report.converged)
        .push("feas_residual", report.feas_residual)
        .push("objective", report.objective)
        .push("restarts", report.restarts)
        .push("final_mu", report.final_mu);
    solver_meta(&mut kv, &cfg);
    if let Some(dir) = &args.dir {
        let (x0, a0) = (dir.join("X0.txt"), dir.join("A0.txt"));
        if x0.is_file() && a0.is_file() {
            let truth = GroundTruth::from_matrices(read_matrix(&x0)?, read_matrix(&a0)?, None)?;
            let outcome = evaluate_success(&truth, &report, args.success_tol);
            kv.push("success_tol", args.success_tol)
                .push("rel_err_x", outcome.rel_err_x)
                .push("rel_err_a", outcome.rel_err_a)
                .push("x_ok", outcome.x_ok)
                .push("a_ok", outcome.a_ok)
                .push("success", outcome.both);
        }
    }
    create_dir(&out_dir)?;
    write_matrix(&report.x_hat, out_dir.join("Xhat.txt"))?;
    write_matrix(&report.a_hat, out_dir.join("Ahat.txt"))?;
    write_kv(&kv, &out_dir.join("report.txt"), REPORT_SEP)?;
    print!("{}", kv.render(REPORT_SEP));
    Ok(())
}

fn cmd_measure(args: &MeasureArgs) -> CliResult {
    let (instance, truth) = load_instance(&args.dir)?;
    let report = full_report(&instance, &truth, args.k)?;
    let kv = report.to_kv();
    let out_dir = args.out_dir.clone().unwrap_or_else(|| args.dir.clone());
    create_dir(&out_dir)?;
    write_kv(&kv, &out_dir.join("measure.txt"), REPORT_SEP)?;
    print!("{}", kv.render(REPORT_SEP));
    Ok(())
}

fn theory_inputs(instance: &DemixInstance, truth: &GroundTruth, k: Option<usize>) -> CliResult<TheoryInputs> {
    let report = full_report(instance, truth, k)?;
    Ok(TheoryInputs::from_report(
        &report,
        instance.n(),
        instance.m(),
        instance.d(),
        truth.u().ncols(),
        truth.support().len(),
    )?)
}

fn inputs_kv(inputs: &TheoryInputs) -> KvBlock {
    let mut kv = KvBlock::new();
    kv.push("n", inputs.n)
        .push("m", inputs.m)
        .push("d", inputs.d)
        .push("r", inputs.r)
        .push("s", inputs.s)
        .push("k", inputs.k)
        .push("gamma_ur", inputs.gamma_ur)
        .push("gamma_v", inputs.gamma_v)
        .push("mu", inputs.mu)
        .push("xi", inputs.xi);
    match inputs.bounds {
        DictionaryBounds::Frame { lower, upper } => kv.push("frame_lower", lower).push("frame_upper", upper),
        DictionaryBounds::Rip { delta } => kv.push("ric_delta", delta),
    };
    kv.push("alpha", inputs.alpha).push("c1", inputs.c1);
    kv
}

fn cmd_theory(args: &TheoryArgs) -> CliResult {
    if args.s_step == 0 {
        return Err(usage("--s-step must be at least 1"));
    }
    let (instance, truth) = load_instance(&args.dir)?;
    let inputs = theory_inputs(&instance, &truth, args.k)?;
    let report = check_assumptions(&inputs);
    let mut kv = inputs_kv(&inputs);
    kv.extend(&report.to_kv());
    match gamma_ur_ceiling(&inputs) {
        Some(c) => kv.push("gamma_ur_ceiling", c),
        None => kv.push("gamma_ur_ceiling", "n/a"),
    };
    let s_max = args.s_max.unwrap_or(instance.m());
    let s_grid: Vec<usize> = (1..).map(|i| i * args.s_step).take_while(|&s| s <= s_max).collect();
    let curve = rank_sparsity_curve(&inputs, &s_grid, args.curve_scale);
    let out_dir = args.out_dir.clone().unwrap_or_else(|| args.dir.clone());
    create_dir(&out_dir)?;
    write_kv(&kv, &out_dir.join("theory.txt"), REPORT_SEP)?;
    emit_curve_csv(&curve, out_dir.join("curve.csv"))?;
    print!("{}", kv.render(REPORT_SEP));
    Ok(())
}

fn cmd_certify(args: &CertifyArgs) -> CliResult {
    let (instance, truth) = load_instance(&args.dir)?;
    let lambda = args.lambda.unwrap_or_else(|| default_lambda(instance.n(), instance.m()));
    let incoherence = full_report(&instance, &truth, args.k)?;
    let (r, s) = (truth.u().ncols(), truth.support().len());
    let inputs = TheoryInputs::from_report(&incoherence, instance.n(), instance.m(), instance.d(), r, s)?;
    let theory = check_assumptions(&inputs);
    let cert = build_certificate(instance.dictionary(), &truth, lambda)?;
    let report = verify_conditions(instance.dictionary(), &truth, lambda, &cert.gamma)?;
    let lemmas = verify_lemma_bounds(&report, &incoherence, &theory, lambda, r, s)?;
    let mut kv = report.to_kv();
    kv.extend(&lemmas.to_kv());
    kv.push("lemmas_ok", lemmas.all_ok()).push("assumptions_admissible", theory.admissible);
    let out_dir = args.out_dir.clone().unwrap_or_else(|| args.dir.clone());
    create_dir(&out_dir)?;
    write_matrix(&cert.gamma, out_dir.join("Gamma.txt"))?;
    write_kv(&kv, &out_dir.join("certificate.txt"), REPORT_SEP)?;
    print!("{}", kv.render(REPORT_SEP));
    Ok(())
}

fn cmd_phase(args: &PhaseArgs) -> CliResult {
    let m = args.m.unwrap_or(args.n);
    let r_max = args.r_max.unwrap_or(10.min(args.n).min(m));
    let s_max = args.s_max.unwrap_or(if args.extended { (4 * m).min(args.d * m) } else { m });
    if s_max > m && !args.extended {
        return Err(usage(format!("--s-max {s_max} exceeds m = {m}; pass --extended to go beyond")));
    }
    let s_step = args.s_step.unwrap_or((s_max / 10).max(1));
    if s_step == 0 {
        return Err(usage("--s-step must be at least 1"));
    }
    if r_max == 0 {
        return Err(usage("--r-max must be at least 1"));
    }
    let r_values: Vec<usize> = (1..=r_max).collect();
    let s_values: Vec<usize> = (1..).map(|i| i * s_step).take_while(|&s| s <= s_max).collect();
    if s_values.is_empty() {
        return Err(usage(format!("no sparsity levels: --s-step {s_step} exceeds --s-max {s_max}")));
    }
    let mut spec = PhaseGridSpec::new(args.n, m, args.d, r_values, s_values, args.trials);
    spec.master_seed = args.seed;
    spec.lambda = lambda_policy(args)?;
    spec.success_tol = args.success_tol;
    spec.solver = args.solver.config(args.n, m);
    spec.threads = args.threads;
    spec.validate()?;

    let mut meta = KvBlock::new();
    meta.push("command", "phase")
        .push("version", env!("CARGO_PKG_VERSION"))
        .push("n", spec.n)
        .push("m", spec.m)
        .push("d", spec.d)
        .push("r_values", join_usize(&spec.r_values))
        .push("s_values", join_usize(&spec.s_values))
        .push("trials", spec.trials)
        .push("master_seed", spec.master_seed)
        .push("seed_mixing", "splitmix64 chain over master_seed, r, s, trial")
        .push("lambda_policy", policy_text(&spec.lambda, spec.n, spec.m))
        .push("success_tol", spec.success_tol);
    solver_meta(&mut meta, &spec.solver);
    meta.push("threads", spec.threads.map_or("all".to_string(), |t| t.to_string()))
        .push("extended", args.extended)
        .push("curve_scale", args.curve_scale)
        .push("curve_k", args.k.map_or("support_max_column_count".to_string(), |k| k.to_string()))
        .push("curve_reference_rank", spec.r_values[0]);

    let grid = run_phase_grid(&spec)?;
    for cell in &grid.cells {
        eprintln!(
            "d={} r={} s={} both={}/{} x={}/{} a={}/{}",
            grid.d,
            cell.r,
            cell.s,
            cell.successes_both,
            cell.trials,
            cell.successes_x,
            cell.trials,
            cell.successes_a,
            cell.trials
        );
    }
    let curve = reference_curve(&spec, args.k, args.curve_scale)?;
    let out = &args.out_dir;
    create_dir(out)?;
    emit_grid_csv(&grid, out.join("grid.csv"))?;
    emit_trials_csv(&grid, out.join("trials.csv"))?;
    emit_heatmap(&grid, HeatmapQuantity::Both, out.join("heatmap_both.pgm"))?;
    emit_heatmap(&grid, HeatmapQuantity::X, out.join("heatmap_x.pgm"))?;
    emit_heatmap(&grid, HeatmapQuantity::A, out.join("heatmap_a.pgm"))?;
    emit_curve_csv(&curve, out.join("curve.csv"))?;
    write_kv(&meta, &out.join("meta.txt"), META_SEP)?;
    println!(
        "wrote grid.csv, trials.csv, heatmap_both.pgm, heatmap_x.pgm, heatmap_a.pgm, curve.csv, meta.txt to {}",
        out.display()
    );
    Ok(())
}

fn run(args: Vec<OsString>) -> CliResult {
    let args = config::expand(&Cli::command(), args).map_err(|e| usage(e.0))?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(usage(e.render().to_string())),
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Phase(a) => cmd_phase(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {}", msg.trim_end().trim_start_matches("error: "));
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
