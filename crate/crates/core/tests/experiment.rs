use std::time::Duration;

use ris_mcrb_core::experiment::{
    compute_impedances, emit_csv, run, LinkModel, SweepKind, SweepMetadata, SweepRequest,
    SweepResult,
};
use ris_mcrb_core::{load_scenario, Scenario};

fn small_scenario() -> Scenario {
    load_scenario("ris_n1 = 2\nris_n2 = 3\nnum_transmissions = 24\nris_spacing_over_lambda = 0.05").unwrap()
}

fn read_back(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn empty_result_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let result = SweepResult {
        kind: SweepKind::BiasVsSpacing,
        with_rmse: false,
        rows: vec![],
        metadata: SweepMetadata {
            scenario_config: String::new(),
            seed: 0,
            code_version: "0",
            wall_clock: Duration::ZERO,
        },
    };
    emit_csv(&result, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "d_over_lambda,n1,n2,sqrt_tr_bias\n");
}

#[test]
fn csv_values_parse_back_exactly() {
    let mut request = SweepRequest::new(SweepKind::LbVsPower, small_scenario());
    request.power_grid = vec![-10.0, 35.5, 80.0];
    request.spacing_grid = vec![0.02, 0.5];
    request.trials = 5;
    let result = run(&request).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lb.csv");
    emit_csv(&result, &path).unwrap();
    let (header, rows) = read_back(&path);
    assert_eq!(header, ["p_t_dbm", "d_over_lambda", "tr_mcrb", "tr_bias", "lb", "crlb", "rmse"]);
    assert_eq!(rows.len(), 6);
    for (row, rec) in result.rows.iter().zip(&rows) {
        let parsed: Vec<f64> = rec.iter().map(|v| v.parse().unwrap()).collect();
        let r = row.report;
        let expected = [row.p_t_dbm, row.d_over_lambda, r.tr_mcrb, r.tr_bias, r.lb, r.crlb, r.rmse.unwrap()];
        for (a, b) in parsed.iter().zip(expected) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn rows_follow_grid_order() {
    let mut request = SweepRequest::new(SweepKind::LbVsPower, small_scenario());
    request.power_grid = vec![0.0, 10.0];
    request.spacing_grid = vec![0.1, 0.2, 0.5];
    let result = run(&request).unwrap();
    let order: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.p_t_dbm, r.d_over_lambda)).collect();
    assert_eq!(
        order,
        [(0.0, 0.1), (0.0, 0.2), (0.0, 0.5), (10.0, 0.1), (10.0, 0.2), (10.0, 0.5)]
    );

    let mut request = SweepRequest::new(SweepKind::BiasVsSpacing, small_scenario());
    request.spacing_grid = vec![0.1, 0.5];
    request.sizes = vec![(2, 2), (3, 2)];
    let result = run(&request).unwrap();
    let order: Vec<(usize, usize, f64)> = result.rows.iter().map(|r| (r.n1, r.n2, r.d_over_lambda)).collect();
    assert_eq!(order, [(2, 2, 0.1), (2, 2, 0.5), (3, 2, 0.1), (3, 2, 0.5)]);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut request = SweepRequest::new(SweepKind::McRmse, small_scenario());
    request.power_grid = vec![10.0, 50.0];
    request.trials = 40;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    emit_csv(&run(&request).unwrap(), &a).unwrap();
    emit_csv(&run(&request).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    request.scenario = request.scenario.with_seed(99);
    emit_csv(&run(&request).unwrap(), &c).unwrap();
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn removing_grid_points_leaves_other_rows_unchanged() {
    let mut full = SweepRequest::new(SweepKind::McRmse, small_scenario());
    full.power_grid = vec![0.0, 20.0, 40.0];
    full.spacing_grid = vec![0.05, 0.2];
    full.trials = 30;
    let mut reduced = full.clone();
    reduced.power_grid = vec![0.0, 40.0];
    reduced.spacing_grid = vec![0.2];
    let a = run(&full).unwrap();
    let b = run(&reduced).unwrap();
    for row in &b.rows {
        let twin = a
            .rows
            .iter()
            .find(|r| r.p_t_dbm == row.p_t_dbm && r.d_over_lambda == row.d_over_lambda)
            .unwrap();
        assert_eq!(twin, row);
    }

    let mut full = SweepRequest::new(SweepKind::CrlbVsSpacing, small_scenario());
    full.spacing_grid = vec![0.01, 0.1, 1.0];
    full.sizes = vec![(2, 2), (2, 3)];
    let mut reduced = full.clone();
    reduced.spacing_grid = vec![0.1];
    reduced.sizes = vec![(2, 3)];
    let a = run(&full).unwrap();
    let b = run(&reduced).unwrap();
    let twin = a.rows.iter().find(|r| r.n2 == 3 && r.d_over_lambda == 0.1).unwrap();
    assert_eq!(twin, &b.rows[0]);
}

#[test]
fn cached_impedances_match_direct_integration() {
    for d in [0.002, 0.05, 0.7] {
        let s = Scenario::default().with_spacing(d).unwrap();
        let cached = LinkModel::build(&s, true).unwrap();
        let direct = LinkModel::build(&s, false).unwrap();
        let scale = cached.impedances.z_ss().norm();
        assert!((cached.impedances.z_ss() - direct.impedances.z_ss()).norm() <= 1e-12 * scale);
        let a = cached.analysis(false).unwrap().report(1.0, s.sigma2()).unwrap();
        let b = direct.analysis(false).unwrap().report(1.0, s.sigma2()).unwrap();
        for (x, y) in [(a.lb, b.lb), (a.tr_bias, b.tr_bias), (a.crlb, b.crlb)] {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(f64::MIN_POSITIVE), "{x} vs {y} at {d}");
        }
    }
}

#[test]
fn noiseless_single_trial_equals_bias_norm() {
    let mut request = SweepRequest::new(SweepKind::McRmse, small_scenario());
    request.power_grid = vec![30.0];
    request.trials = 1;
    request.noiseless = true;
    let row = run(&request).unwrap().rows[0].report;
    let rel = (row.rmse.unwrap() - row.sqrt_tr_bias()).abs() / row.sqrt_tr_bias();
    assert!(rel < 1e-9, "{rel}");

    request.matched = true;
    let row = run(&request).unwrap().rows[0].report;
    assert!(row.rmse.unwrap() < 1e-9 * row.crlb.max(1e-30) || row.rmse.unwrap() == 0.0);
}

#[test]
fn lower_bound_saturates_only_with_dense_spacing() {
    let mut request = SweepRequest::new(SweepKind::LbVsPower, Scenario::default());
    request.power_grid = vec![-10.0, 30.0, 60.0, 80.0];
    request.spacing_grid = vec![0.02, 0.5];
    let rows = run(&request).unwrap().rows;
    let at = |p: f64, d: f64| rows.iter().find(|r| r.p_t_dbm == p && r.d_over_lambda == d).unwrap().report;

    // Dense spacing: the bound sits on its floor from about 30 dBm on.
    let r = at(30.0, 0.02);
    assert!(r.lb / r.sqrt_tr_bias() < 1.1);
    let r = at(-10.0, 0.02);
    assert!(r.lb / r.sqrt_tr_bias() > 10.0);
    // Half-wavelength spacing: still noise limited at 60 dBm.
    let r = at(60.0, 0.5);
    assert!(r.lb / r.sqrt_tr_bias() > 2.0);
    // The CRLB keeps its slope of -1/2 throughout.
    let slope = (at(80.0, 0.02).crlb / at(-10.0, 0.02).crlb).log10() / 9.0;
    assert!((slope + 0.5).abs() < 1e-12);
}

#[test]
fn mismatched_rmse_tracks_lower_bound_across_powers() {
    let mut request = SweepRequest::new(SweepKind::McRmse, Scenario::default());
    request.spacing_grid = vec![0.02];
    request.trials = 500;
    let result = run(&request).unwrap();
    assert_eq!(result.rows.len(), 10);
    for row in &result.rows {
        let ratio = row.report.rmse.unwrap() / row.report.lb;
        assert!((ratio - 1.0).abs() < 0.10, "{} dBm: {ratio}", row.p_t_dbm);
    }
}

#[test]
fn bias_grows_by_orders_of_magnitude_at_dense_spacing() {
    let mut request = SweepRequest::new(SweepKind::BiasVsSpacing, Scenario::default());
    request.spacing_grid = vec![0.02, 0.5];
    request.sizes = vec![(4, 4)];
    let rows = run(&request).unwrap().rows;
    assert!(rows[0].report.sqrt_tr_bias() > 100.0 * rows[1].report.sqrt_tr_bias());
}

#[test]
fn impedance_set_is_symmetric_with_zero_mutual_diagonal() {
    let s = small_scenario();
    let set = compute_impedances(&s, true).unwrap();
    assert_eq!(set.len(), 6);
    for i in 0..6 {
        assert_eq!(set.z_ss_mutual[(i, i)].norm(), 0.0);
        for j in 0..6 {
            assert_eq!(set.z_ss_mutual[(i, j)], set.z_ss_mutual[(j, i)]);
        }
    }
}
