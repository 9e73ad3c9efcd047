//! Loading externally produced CPI cubes and running the pipeline on them.

use std::io::Write;

use bgvcf_stap::pipeline::{
    execute, load_cpi_file, write_cpi_file, Estimator, InputConfig, PipelineConfig, RunMode,
};
use bgvcf_stap::sim::{simulate, ScenarioConfig};

fn measured_like_scenario() -> ScenarioConfig {
    ScenarioConfig {
        num_elements: 14,
        num_pulses: 16,
        num_range_cells: 403,
        ..ScenarioConfig::default()
    }
}

#[test]
fn synthetic_403_cell_cube_loads_with_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = measured_like_scenario();
    let data = simulate(&scenario, &[]).unwrap();
    let path = dir.path().join("cube.bin");
    write_cpi_file(&path, &data.snapshots).unwrap();

    let bytes = std::fs::metadata(&path).unwrap().len();
    assert_eq!(bytes, 403 * 224 * 16);

    let loaded = load_cpi_file(&path, 14, 16).unwrap();
    assert_eq!(loaded.snapshots.len(), 403);
    assert!(loaded.snapshots.iter().all(|s| s.data.len() == 224));
    assert!(loaded.ideal_clutter_covariance.is_none());
    for (a, b) in loaded.snapshots.iter().zip(&data.snapshots) {
        assert_eq!(a.cell_index, b.cell_index);
        assert_eq!(a.data, b.data);
    }
}

#[test]
fn csv_and_binary_encodings_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = ScenarioConfig {
        num_range_cells: 6,
        ..measured_like_scenario()
    };
    let data = simulate(&scenario, &[]).unwrap();
    let bin = dir.path().join("cube.bin");
    let csv = dir.path().join("cube.csv");
    write_cpi_file(&bin, &data.snapshots).unwrap();
    write_cpi_file(&csv, &data.snapshots).unwrap();
    let a = load_cpi_file(&bin, 14, 16).unwrap();
    let b = load_cpi_file(&csv, 14, 16).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.data, y.data);
    }
}

#[test]
fn row_count_not_a_multiple_of_the_snapshot_length_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "re,im").unwrap();
    for i in 0..(224 + 5) {
        writeln!(f, "{i},0").unwrap();
    }
    drop(f);
    let err = load_cpi_file(&path, 14, 16).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn pipeline_runs_on_a_loaded_cube_without_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&measured_like_scenario(), &[]).unwrap();
    let path = dir.path().join("cube.bin");
    write_cpi_file(&path, &data.snapshots).unwrap();

    let mut cfg = PipelineConfig {
        scenario: measured_like_scenario(),
        input: Some(InputConfig { path }),
        ..PipelineConfig::default()
    };
    cfg.window.num_training = 10;
    cfg.window.cut = Some(150);
    cfg.estimators = vec![Estimator::Bgvcf, Estimator::Lsmi, Estimator::Optimal];
    cfg.metrics.capon = false;

    let out = execute(&cfg, RunMode::Full).unwrap();
    // No simulated ground truth, so the clairvoyant filter cannot be formed.
    assert_eq!(out.skipped, vec![Estimator::Optimal]);
    let cut = &out.cuts[0];
    assert_eq!(cut.cut, 150);
    assert_eq!(cut.training_cells.len(), 10);
    for e in &cut.estimates {
        assert_eq!(e.weights.w.len(), 224);
        assert!((e.weights.gain().re - 1.0).abs() < 1e-10);
    }
}
