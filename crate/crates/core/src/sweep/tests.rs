use super::*;

fn config(grid: Vec<f64>) -> SweepConfig {
    SweepConfig { lambda_grid: grid, bootstrap_b: 200, ..SweepConfig::default() }
}

#[test]
fn grids_print_as_decimals() {
    let g = energy_grid();
    assert_eq!(g.len(), 11);
    let printed: Vec<String> = g.iter().map(|l| l.to_string()).collect();
    assert_eq!(printed[3], "0.6");
    assert_eq!(printed[10], "2");
    let e = entropy_grid_chi2();
    assert_eq!((e[0], e[9], e.len()), (0.2, 2.0, 10));
    assert_eq!(lambda_grid(1.0, 2.0, 1), vec![1.0]);
    assert!(lambda_grid(0.0, 1.0, 0).is_empty());
}

#[test]
fn config_validation() {
    assert!(config(energy_grid()).validate().is_ok());
    for bad in [
        config(vec![]),
        config(vec![1.0, 0.5]),
        config(vec![-0.1]),
        config(vec![f64::NAN]),
        SweepConfig { shots: 0, ..config(vec![1.0]) },
        SweepConfig { n_b: 3, ..config(vec![1.0]) },
        SweepConfig { burn_in_tol: 0.0, ..config(vec![1.0]) },
        SweepConfig { bootstrap_b: 10, ..config(vec![1.0]) },
        SweepConfig { noise: Some(NoiseModel { p2: 1.5, ..NoiseModel::noiseless() }), ..config(vec![1.0]) },
    ] {
        assert!(matches!(bad.validate(), Err(SweepError::Config(_))), "{bad:?}");
    }
}

#[test]
fn seeds_are_distinct_and_stable() {
    let a = derive_seed(7, 0, STREAM_BASE);
    assert_eq!(a, derive_seed(7, 0, STREAM_BASE));
    let mut all = vec![a, derive_seed(7, 0, STREAM_FOLDED), derive_seed(7, 1, STREAM_BASE), derive_seed(8, 0, STREAM_BASE)];
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 4);
}

#[test]
fn csv_layout() {
    let rows = vec![
        SweepRow { lambda: 0.2, chi: 2, e: Some(-1.0), e_sigma: Some(0.01), shots: 10, ..SweepRow::default() },
        SweepRow { lambda: 0.4, chi: 2, error: Some("bad, \"quoted\"".into()), ..SweepRow::default() },
    ];
    let csv = rows_to_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("lambda,chi,e,e_sigma,entropy,entropy_sigma,mitigated,retention,shots"));
    assert!(lines[1].starts_with("0.2,2,-1,0.01,,,false,,10,"));
    assert!(lines[2].ends_with(",\"bad, \"\"quoted\"\"\""));
    assert_eq!(lines[0].split(',').count(), CSV_COLUMNS.len());
    let back: Vec<SweepRow> = serde_json::from_str(&rows_to_json(&rows)).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn store_round_trips_through_json() {
    let store = ParamStore::bundled();
    assert!(!store.is_empty());
    let opt = store.get(1.2, 1, OptimizeMode::Ansatz).expect("bundled point");
    let mut copy = ParamStore::empty();
    copy.extend(serde_json::from_str::<Vec<OptimizedRecord>>(&store.to_json()).unwrap());
    assert_eq!(copy.len(), store.len());
    assert_eq!(copy.get(1.2, 1, OptimizeMode::Ansatz).unwrap().energy.to_bits(), opt.energy.to_bits());
    // 1.2 and 1.2000000000001 share a key
    assert!(store.get(1.2 + 1e-13, 1, OptimizeMode::Ansatz).is_some());
    assert!(store.get(1.2, 1, OptimizeMode::FullUnitary).is_none());
}

#[test]
fn bundled_parameters_reproduce_the_optimizer() {
    let store = ParamStore::bundled();
    let fresh = ansatz::variational_optimize(0.6, 1, OptimizeMode::Ansatz, &OptimizerConfig::default()).unwrap();
    let stored = store.get(0.6, 1, OptimizeMode::Ansatz).unwrap();
    assert_eq!(fresh.angles, stored.angles);
}

#[test]
fn zero_field_energy_is_minus_one() {
    let mut store = ParamStore::bundled();
    let rows = run_energy_sweep(&config(vec![0.0]), &mut store).unwrap();
    let r = &rows[0];
    assert!(r.error.is_none(), "{:?}", r.error);
    assert!((r.e.unwrap() + 1.0).abs() <= 2.0 * r.e_sigma.unwrap() + 1e-12);
    assert!((r.oracle.unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn exact_mode_matches_classical_values() {
    let mut store = ParamStore::bundled();
    let grid = vec![0.6, 1.2];
    let exact = SweepConfig { exact: true, ..config(grid.clone()) };
    for row in run_energy_sweep(&exact, &mut store).unwrap() {
        assert!((row.e.unwrap() - row.mps_circuit.unwrap()).abs() < 1e-10, "{row:?}");
        assert!((row.e.unwrap() - row.mps_bulk.unwrap()).abs() < 1e-3);
        assert_eq!(row.e_sigma, Some(0.0));
    }
    for row in run_entropy_sweep(&exact, &mut store).unwrap() {
        assert!((row.entropy.unwrap() - row.mps_circuit.unwrap()).abs() < 1e-8, "{row:?}");
        let total: f64 = row.schmidt_spectrum.as_ref().unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn noiseless_zne_is_a_no_op_in_exact_mode() {
    let mut store = ParamStore::bundled();
    let cfg = SweepConfig { exact: true, zne: true, ..config(vec![1.2]) };
    let row = &run_energy_sweep(&cfg, &mut store).unwrap()[0];
    assert!(row.mitigated);
    assert!((row.e.unwrap() - row.raw.unwrap()).abs() < 1e-12);
    assert!((row.folded.unwrap() - row.raw.unwrap()).abs() < 1e-12);
}

#[test]
fn failed_points_are_flagged_without_aborting() {
    let mut store = ParamStore::bundled();
    // two shots per setting cannot support a bootstrap
    let cfg = SweepConfig { shots: 2, ..config(vec![0.6, 1.2]) };
    let rows = run_entropy_sweep(&cfg, &mut store).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.error.as_deref().is_some_and(|e| e.contains("shots"))));
    assert!(rows.iter().all(|r| r.entropy.is_none()));
}

#[test]
fn validation_suite() {
    let report = run_validation(7);
    assert!(report.passed, "{}", report.to_json());
    assert_eq!(report, run_validation(7));
    let broken = run_validation_with(7, Some(Fault::KrausConvention));
    assert!(!broken.passed);
    let failing: Vec<&str> = broken.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert_eq!(failing, ["channel_consistency"]);
}
