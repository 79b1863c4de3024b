use kai_esprit::harness::table::{csv_string, read_csv_file};
use kai_esprit::harness::{run_experiment, run_sweep, write_outputs, Estimator, ExperimentConfig, RmseSources};
use kai_esprit::DoaError;

fn small_config(extra_scenario: &str, trials: usize) -> ExperimentConfig {
    let text = format!(
        r#"
        [geometry]
        num_sensors = 12

        [scenario]
        doas_deg = [-10.0, 5.0, 20.0]
        known_doas_deg = [20.0]
        num_snapshots = 8
        {extra_scenario}

        [sweep]
        snr_start_db = 0.0
        snr_stop_db = 10.0
        snr_step_db = 5.0
        trials = {trials}
        base_seed = 11
        "#
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

#[test]
fn noiseless_override_gives_exact_estimates() {
    let cfg = small_config("noise_variance = 1e-12", 1);
    let table = run_experiment(&cfg).unwrap();
    assert_eq!(table.rows.len(), 3 * 3);
    for row in &table.rows {
        assert!(row.rmse_deg < 1e-4, "{row:?}");
        assert_eq!(row.prob_resolution, 1.0);
    }
}

#[test]
fn one_row_per_snr_and_estimator_in_grid_order() {
    let cfg = small_config("", 3);
    let table = run_experiment(&cfg).unwrap();
    let keys: Vec<(f64, Estimator)> = table.rows.iter().map(|r| (r.snr_db, r.estimator)).collect();
    let expected: Vec<(f64, Estimator)> = [0.0, 5.0, 10.0]
        .iter()
        .flat_map(|&s| Estimator::ALL.iter().map(move |&e| (s, e)))
        .collect();
    assert_eq!(keys, expected);
    for row in table.rows_for(Estimator::Esprit) {
        assert!(row.mean_mu_opt.is_nan());
    }
    for row in table.rows_for(Estimator::TwoStepKai) {
        assert!((0.0..=1.0).contains(&row.mean_mu_opt));
        assert!((row.rmse_db - 20.0 * row.rmse_deg.log10()).abs() < 1e-12);
    }
}

#[test]
fn repeated_and_serial_runs_match() {
    let cfg = small_config("", 4);
    let a = csv_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = csv_string(&run_experiment(&cfg).unwrap()).unwrap();
    let serial = ExperimentConfig {
        parallel: false,
        ..cfg.clone()
    };
    let c = csv_string(&run_experiment(&serial).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);

    let reseeded = ExperimentConfig {
        base_seed: 12,
        ..cfg
    };
    assert_ne!(a, csv_string(&run_experiment(&reseeded).unwrap()).unwrap());
}

#[test]
fn estimators_share_batches() {
    // with identical estimators listed twice the per-trial records coincide
    let mut cfg = small_config("", 3);
    cfg.estimators = vec![Estimator::Esprit, Estimator::Esprit];
    let run = run_sweep(&cfg).unwrap();
    for point in &run.points {
        assert_eq!(point.per_estimator[0].trials, point.per_estimator[1].trials);
    }
}

#[test]
fn all_sources_mode_scores_every_angle() {
    let mut cfg = small_config("noise_variance = 1e-12", 1);
    cfg.rmse_sources = RmseSources::All;
    let run = run_sweep(&cfg).unwrap();
    for et in &run.points[0].per_estimator {
        assert_eq!(et.trials[0].outcome.errors_deg.len(), 3);
    }
}

#[test]
fn writes_csv_and_three_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config("", 2);
    let table = run_experiment(&cfg).unwrap();
    let files = write_outputs(&table, &dir.path().join("nested"), "smoke").unwrap();
    for path in files.all() {
        assert!(path.exists(), "{}", path.display());
    }
    assert_eq!(files.resolution_svg.file_name().unwrap(), "smoke.svg");
    let back = read_csv_file(&files.csv).unwrap();
    assert_eq!(csv_string(&back).unwrap(), std::fs::read_to_string(&files.csv).unwrap());
}

#[test]
fn unwritable_path_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let table = run_experiment(&small_config("", 1)).unwrap();
    let err = write_outputs(&table, &blocker.join("sub"), "x").unwrap_err();
    assert!(matches!(err, DoaError::Io(_)));
}

#[test]
fn config_rejects_bad_inputs() {
    let base = |scenario: &str, sweep: &str| {
        format!(
            "[geometry]\nnum_sensors = 8\n[scenario]\n{scenario}\nnum_snapshots = 4\n[sweep]\n{sweep}\n"
        )
    };
    let cases = [
        base("doas_deg = [0.0, 10.0]\nknown_doas_deg = [5.0]", "trials = 1"),
        base("doas_deg = [0.0, 10.0]", "trials = 0"),
        base("doas_deg = [0.0, 10.0]", "trials = 1\nestimators = [\"music\"]"),
        base("doas_deg = [0.0, 10.0]", "trials = 1\nsnr_start_db = 5.0\nsnr_stop_db = 0.0"),
        base("doas_deg = [10.0, 0.0]", "trials = 1"),
        base("doas_deg = [0.0, 10.0]\nunknown_key = 1", "trials = 1"),
        base("doas_deg = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]", "trials = 1"),
    ];
    for text in cases {
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(DoaError::Config(_))), "{text}");
    }
}

#[test]
fn bundled_config_matches_the_reference_scenario() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_fig1.toml");
    let cfg = ExperimentConfig::from_path(&path).unwrap();
    assert_eq!(cfg.geometry.num_sensors(), 40);
    assert_eq!(cfg.geometry.spacing_ratio(), 0.5);
    assert_eq!(cfg.num_snapshots, 10);
    assert_eq!(cfg.doas_deg, vec![13.0, 15.0, 17.0, 19.0]);
    assert_eq!(cfg.known_doas_deg, vec![17.0, 19.0]);
    assert_eq!(cfg.trials, 100);
    assert_eq!(cfg.estimators, Estimator::ALL.to_vec());
    assert_eq!(cfg.output_name, "fig1");
}
