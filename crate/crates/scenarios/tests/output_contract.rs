use std::fs;

use mtdiff_scenarios::config::{Mode, ScenarioConfig};
use mtdiff_scenarios::output::{case_csv, case_metadata, emit_csv};
use mtdiff_scenarios::presets::preset;
use mtdiff_scenarios::runner::{run_scenario, Activation};

fn illustrative(horizon: usize, runs: usize) -> ScenarioConfig {
    let mut cfg = preset("illustrative-30idle").unwrap().unwrap();
    cfg.run.horizon = horizon;
    cfg.run.runs = runs;
    cfg.run.steady_window = horizon;
    cfg
}

#[test]
fn illustrative_csv_matches_golden_file() {
    let bundle = run_scenario(&illustrative(5, 2)).unwrap();
    let case = bundle.case(Activation::Async, 1.0).unwrap();
    assert_eq!(case_csv(&bundle, case), include_str!("golden/illustrative-30idle_async-eta1.csv"));
    assert_eq!(case_metadata(&bundle, case), include_str!("golden/illustrative-30idle_async-eta1.meta"));
}

#[test]
fn header_and_row_count() {
    let bundle = run_scenario(&illustrative(2, 1)).unwrap();
    for case in &bundle.cases {
        let csv = case_csv(&bundle, case);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,msd_sim_db,msd_theory_db");
        assert_eq!(lines.len(), 4, "header plus three data rows");
        for (i, row) in lines[1..].iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 3);
            assert_eq!(cols[0], i.to_string());
        }
    }
}

#[test]
fn metadata_keys() {
    let bundle = run_scenario(&illustrative(3, 1)).unwrap();
    let meta = case_metadata(&bundle, &bundle.cases[0]);
    let keys: Vec<&str> = meta.lines().map(|l| l.split_once('=').unwrap().0).collect();
    for key in ["rho_B", "rho_F", "bound_mean", "bound_ms", "zeta_star_db", "seed", "runs"] {
        assert!(keys.contains(&key), "missing {key}");
    }
}

#[test]
fn per_cluster_columns() {
    let mut cfg = preset("benefit-eta1").unwrap().unwrap();
    cfg.run.horizon = 2;
    cfg.run.runs = 1;
    let bundle = run_scenario(&cfg).unwrap();
    let csv = case_csv(&bundle, &bundle.cases[0]);
    assert_eq!(
        csv.lines().next().unwrap(),
        "iteration,msd_sim_db,msd_theory_db,msd_sim_c1_db,msd_sim_c2_db,msd_sim_c3_db"
    );
    // simulation only: theory column is nan
    assert!(csv.lines().nth(1).unwrap().split(',').nth(2) == Some("nan"));
}

#[test]
fn identical_seed_gives_identical_files() {
    let cfg = illustrative(20, 3);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let written: Vec<_> = dirs
        .iter()
        .map(|d| emit_csv(&run_scenario(&cfg).unwrap(), d.path()).unwrap())
        .collect();
    assert_eq!(written[0].len(), written[1].len());
    for (a, b) in written[0].iter().zip(&written[1]) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}

#[test]
fn theory_only_leaves_simulation_column_empty() {
    let mut cfg = illustrative(2, 1);
    cfg.run.mode = Mode::Theory;
    let bundle = run_scenario(&cfg).unwrap();
    let csv = case_csv(&bundle, &bundle.cases[0]);
    for row in csv.lines().skip(1) {
        assert_eq!(row.split(',').nth(1), Some("nan"));
    }
}
