use std::path::{Path, PathBuf};

use dam_isac::experiments::{
    dbm_to_watts, mean_and_stderr, noise_variance, run_crb_rmse, run_sse_vs_power, to_csv, trial_rng, write_results,
    ExperimentConfig, RunManifest, CSV_HEADER,
};
use dam_isac::DamError;
use rand::Rng;

fn default_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&default_path()).unwrap();
    cfg.trials = 3;
    cfg.power_dbm = vec![10.0, 30.0];
    cfg
}

#[test]
fn thermal_noise_examples() {
    // -174 dBm/Hz + 9 dB over 128 MHz is about -83.9 dBm
    let v = noise_variance(-174.0, 9.0, 128e6).unwrap();
    assert!((v - 4.05e-12).abs() / 4.05e-12 < 2e-3, "{v}");
    let one_hz = noise_variance(-174.0, 0.0, 1.0).unwrap();
    assert!((one_hz - 3.981e-21).abs() / 3.981e-21 < 1e-3);
    assert!(matches!(noise_variance(-174.0, 9.0, 0.0), Err(DamError::Config(_))));
    assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
    assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-15);
}

#[test]
fn shipped_config_resolves_thermal_noise() {
    let cfg = ExperimentConfig::load(&default_path()).unwrap();
    let expected = noise_variance(-174.0, 9.0, cfg.scenario.bandwidth_hz).unwrap();
    for v in [cfg.scenario.noise.stage1, cfg.scenario.noise.stage2, cfg.scenario.noise.ue, cfg.scenario.noise.eve] {
        assert_eq!(v, expected);
    }
}

#[test]
fn config_errors_name_the_problem() {
    let text = std::fs::read_to_string(default_path()).unwrap();
    let bad = |from: &str, to: &str| {
        let t = text.replacen(from, to, 1);
        assert_ne!(t, text, "pattern {from} not found");
        ExperimentConfig::from_toml_str(&t)
    };
    assert!(matches!(bad("trials = 100", "trials = 0"), Err(DamError::Config(m)) if m.contains("trials")));
    assert!(matches!(
        bad("power_dbm = [0.0, 5.0,", "power_dbm = [5.0, 0.0,"),
        Err(DamError::Config(m)) if m.contains("increasing")
    ));
    assert!(matches!(bad("crb_antennas = [30, 100]", "crb_antennas = [0]"), Err(DamError::Config(_))));
    assert!(matches!(bad("snapshots = 256", "snapshots = 0"), Err(DamError::Config(_))));
    assert!(matches!(bad("tol = 1e-4", "tol = -1.0"), Err(DamError::Config(_))));
    assert!(matches!(bad("schemes = [\"optimized\", \"mrt\", \"sp\"]", "schemes = [\"magic\"]"), Err(DamError::Config(_))));

    let missing = Path::new("/no/such/dir/cfg.toml");
    match ExperimentConfig::load(missing) {
        Err(DamError::Config(m)) => assert!(m.contains("/no/such/dir/cfg.toml"), "{m}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn mean_and_stderr_examples() {
    assert_eq!(mean_and_stderr(&[2.0]), (2.0, 0.0));
    let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    // sample sd sqrt(5/3), over sqrt(4)
    assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    assert!(mean_and_stderr(&[]).0.is_nan());
}

#[test]
fn trial_streams_are_independent_and_repeatable() {
    let a: Vec<u64> = (0..4).map(|_| trial_rng(5, 1).gen()).collect();
    let b: Vec<u64> = (0..4).map(|_| trial_rng(5, 1).gen()).collect();
    assert_eq!(a, b);
    let mut r1 = trial_rng(5, 1);
    let mut r2 = trial_rng(5, 2);
    assert_ne!(r1.gen::<u64>(), r2.gen::<u64>());
}

#[test]
fn crb_sweep_is_a_pure_function_of_config_and_seed() {
    let cfg = small_config();
    let a = run_crb_rmse(&cfg, 9).unwrap();
    let b = run_crb_rmse(&cfg, 9).unwrap();
    assert_eq!(to_csv(&a), to_csv(&b));
    let c = run_crb_rmse(&cfg, 10).unwrap();
    assert_ne!(to_csv(&a), to_csv(&c));

    let csv = to_csv(&a);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(CSV_HEADER, "scheme,power_dbm,metric,value,trials,stderr");
    for line in lines {
        assert_eq!(line.split(',').count(), 6, "{line}");
    }
    for n in ["n30", "n100"] {
        for m in ["crb", "sqrt_crb", "crb_mrt", "rmse", "rmse_over_sqrt_crb"] {
            assert!(a.iter().any(|r| r.scheme == n && r.metric == m), "{n} {m}");
        }
    }
}

#[test]
fn matched_beam_crb_scales_inversely_with_antennas() {
    // gains carry sqrt(N) and the matched beam puts all power on the unit-norm
    // LoS steering, so the echo SNR and the inverse CRB grow linearly in N
    let cfg = small_config();
    let rows = run_crb_rmse(&cfg, 9).unwrap();
    for p in &cfg.power_dbm {
        let get = |n: &str| rows.iter().find(|r| r.scheme == n && r.power_dbm == *p && r.metric == "crb_mrt").unwrap().value;
        let ratio = get("n100") / get("n30");
        assert!((ratio - 0.3).abs() < 1e-9, "{p} dBm: {ratio}");
    }
}

#[test]
fn sse_sweep_rows_and_written_files() {
    let cfg = small_config();
    let rows = run_sse_vs_power(&cfg, 4).unwrap();
    for s in ["optimized", "mrt", "sp"] {
        for p in &cfg.power_dbm {
            let r = rows
                .iter()
                .find(|r| r.scheme == s && r.power_dbm == *p && r.metric == "worst_sse")
                .unwrap();
            assert!(r.value >= 0.0 && r.trials <= cfg.trials);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let csv = write_results(&rows, dir.path(), "sse_vs_power", &cfg, 4).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), to_csv(&rows));
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sse_vs_power.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 4);
    assert_eq!(manifest.trials, 3);
    assert_eq!(manifest.config_sha256, cfg.digest());
    assert_eq!(manifest.outputs, vec!["sse_vs_power.csv".to_string()]);
}

#[test]
fn digest_ignores_the_output_directory_only() {
    let cfg = small_config();
    let mut moved = cfg.clone();
    moved.output = PathBuf::from("/elsewhere");
    assert_eq!(cfg.digest(), moved.digest());
    let mut more = cfg.clone();
    more.trials += 1;
    assert_ne!(cfg.digest(), more.digest());
}
