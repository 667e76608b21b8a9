use demix::experiments::*;
use demix::theory::{rank_sparsity_curve, DictionaryBounds, TheoryInputs};

fn small_grid(trials: usize) -> PhaseGridSpec {
    let mut spec = PhaseGridSpec::new(12, 12, 4, vec![1, 2], vec![0, 6, 12], trials);
    spec.master_seed = 99;
    spec
}

#[test]
fn generation_is_deterministic() {
    let spec = GenSpec { n: 9, m: 8, d: 5, r: 2, s: 7, seed: 42 };
    let (i1, t1) = generate_instance(&spec).unwrap();
    let (i2, t2) = generate_instance(&spec).unwrap();
    assert_eq!(i1.y(), i2.y());
    assert_eq!(i1.dictionary(), i2.dictionary());
    assert_eq!(t1.a0(), t2.a0());
    let (_, t3) = generate_instance(&GenSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(t1.support(), t3.support());
}

#[test]
fn trivial_cells_always_succeed() {
    for d in [1, 5, 90] {
        let spec = PhaseGridSpec::new(60, 60, d, vec![1], vec![0], 3);
        let grid = run_phase_grid(&spec).unwrap();
        assert_eq!(grid.cells[0].successes_both, 3, "d = {d}");
    }
}

#[test]
fn grids_are_reproducible_and_seed_isolated() {
    let a = run_phase_grid(&small_grid(3)).unwrap();
    let b = run_phase_grid(&PhaseGridSpec { threads: Some(2), ..small_grid(3) }).unwrap();
    assert_eq!(format_grid_csv(&a), format_grid_csv(&b));
    assert_eq!(format_trials_csv(&a), format_trials_csv(&b));
    let c = run_phase_grid(&small_grid(5)).unwrap();
    for r in [1, 2] {
        for s in [0, 6, 12] {
            let first: Vec<_> = a.trial_records.iter().filter(|t| t.r == r && t.s == s).collect();
            let longer: Vec<_> = c.trial_records.iter().filter(|t| t.r == r && t.s == s).take(3).collect();
            assert_eq!(first, longer);
        }
    }
    for cell in &c.cells {
        assert!(cell.successes_both <= cell.successes_x.min(cell.successes_a));
        assert!((0.0..=1.0).contains(&cell.frac_both()));
    }
}

#[test]
fn sweep_reports_best_lambda() {
    let mut spec = small_grid(2);
    spec.lambda = LambdaPolicy::Sweep(vec![5.0, 1.0 / 12f64.sqrt()]);
    let grid = run_phase_grid(&spec).unwrap();
    let cell = grid.cell(1, 6).unwrap();
    assert!((cell.lambda - 1.0 / 12f64.sqrt()).abs() < 1e-15, "{cell:?}");
    assert_eq!(grid.trial_records.len(), grid.cells.len() * 2);
}

#[test]
fn thin_corner_recovers_at_full_size() {
    let mut spec = PhaseGridSpec::new(100, 100, 5, vec![1, 2], vec![10, 20], 2);
    spec.master_seed = 3;
    let grid = run_phase_grid(&spec).unwrap();
    for c in &grid.cells {
        assert_eq!(c.frac_both(), 1.0, "{c:?}");
    }
}

#[test]
fn scaled_grid_is_nearly_monotone() {
    let mut spec = PhaseGridSpec::new(40, 40, 5, vec![1, 4, 8], (0..=40).step_by(8).collect(), 3);
    spec.master_seed = 17;
    let grid = run_phase_grid(&spec).unwrap();
    for (r, inversions) in row_inversions(&grid) {
        assert!(inversions <= 1, "rank {r} has {inversions} inversions");
    }
}

#[test]
fn heatmap_orders_ranks_descending() {
    let mut spec = PhaseGridSpec::new(10, 10, 3, vec![1, 9], vec![0, 30], 1);
    spec.solver.max_iters = 50;
    let grid = run_phase_grid(&spec).unwrap();
    let text = format_heatmap(&grid, HeatmapQuantity::Both);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(&lines[..3], &["P2", "2 2", "255"]);
    let px = |r, s| if grid.cell(r, s).unwrap().successes_both == 1 { "255" } else { "0" };
    assert_eq!(lines[3], format!("{} {}", px(9, 0), px(9, 30)));
    assert_eq!(lines[4], format!("{} {}", px(1, 0), px(1, 30)));
}

#[test]
fn curve_csv_mirrors_theory_output() {
    let inputs = TheoryInputs {
        n: 100,
        m: 100,
        d: 5,
        r: 1,
        s: 1,
        k: 1,
        gamma_ur: 0.02,
        gamma_v: 0.03,
        mu: 0.15,
        xi: 0.05,
        bounds: DictionaryBounds::Frame { lower: 0.8, upper: 1.2 },
        alpha: 1.0 + 1e-9,
        c1: 1.0,
    };
    let curve = rank_sparsity_curve(&inputs, &[1, 2, 4, 8, 16], 1.0);
    let csv = format_curve_csv(&curve);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,r_bound,valid"));
    for (line, p) in lines.zip(&curve) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), p.s);
        assert_eq!(fields[1].parse::<f64>().unwrap(), p.r_bound);
        assert_eq!(fields[2].parse::<bool>().unwrap(), p.valid);
    }
}

#[test]
fn emitters_write_files() {
    let grid = run_phase_grid(&PhaseGridSpec::new(6, 6, 2, vec![1], vec![0, 2], 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_grid_csv(&grid, dir.path().join("g.csv")).unwrap();
    emit_trials_csv(&grid, dir.path().join("t.csv")).unwrap();
    emit_heatmap(&grid, HeatmapQuantity::X, dir.path().join("h.pgm")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(GRID_CSV_HEADER));
    assert_eq!(text.lines().count(), 3);
    assert!(emit_grid_csv(&grid, dir.path().join("missing/g.csv")).is_err());
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(run_phase_grid(&PhaseGridSpec::new(6, 6, 2, vec![7], vec![0], 1)).is_err());
    assert!(run_phase_grid(&PhaseGridSpec::new(6, 6, 2, vec![1], vec![13], 1)).is_err());
    assert!(run_phase_grid(&PhaseGridSpec::new(6, 6, 2, vec![1], vec![0], 0)).is_err());
    let mut spec = PhaseGridSpec::new(6, 6, 2, vec![1], vec![0], 1);
    spec.lambda = LambdaPolicy::Fixed(-1.0);
    assert!(run_phase_grid(&spec).is_err());
}
