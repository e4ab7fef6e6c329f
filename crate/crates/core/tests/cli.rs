use std::path::{Path, PathBuf};
use std::process::Command;

use vslq::cli::{main_with_args, parse_config, validate, Severity, EXIT_CONFIG, EXIT_OK};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn vslq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vslq")).args(args).output().expect("binary runs")
}

#[test]
fn checked_in_configs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&std::fs::read_to_string(&path).unwrap(), &[]).unwrap();
            let errors: Vec<_> = validate(&cfg).into_iter().filter(|d| d.severity == Severity::Error).collect();
            assert!(errors.is_empty(), "{}: {errors:?}", path.display());
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn schema_error_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"sweep\"\n\n[params]\nt1p = 8.0\nwidth = 3\n").unwrap();
    let out = vslq(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("width") && err.contains("line 5"), "{err}");
}

#[test]
fn negative_t1p_override_is_rejected() {
    let cfg = configs_dir().join("measure.toml");
    let out = vslq(&["validate", cfg.to_str().unwrap(), "--set", "params.t1p=-1"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn defaults_round_trip_through_validate() {
    let out = vslq(&["defaults", "--experiment", "noise-lifetime"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = parse_config(&text, &[]).unwrap();
    assert!(validate(&cfg).iter().all(|d| d.severity != Severity::Error));
    assert_eq!(cfg.to_toml().unwrap(), text);
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["vslq".to_string(), "run".into(), config.display().to_string(), "--out".into(), out.display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

#[test]
fn measure_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("measure.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &[]), EXIT_OK);
    assert_eq!(run(&cfg, &b, &[]), EXIT_OK);
    for f in ["report.json", "pointer.csv", "config.resolved.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("pointer.csv")).unwrap();
    assert!(csv.starts_with("t_ns,intact,intact_minus,lost\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn idle_sweep_emits_grid_rows_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("idle.toml");
    std::fs::write(
        &cfg,
        "experiment = \"sweep\"\n[bench]\ngate = \"idle\"\nn_cycles = 1\nequilibration_cycles = 1\nt1p_grid = [8.0, 16.0, 32.0, 64.0]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &["--set", "run.svg=false"]), EXIT_OK);
    let rows = std::fs::read_to_string(out.join("gate_errors.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5, "{rows}");
    let fit = std::fs::read_to_string(out.join("fit.csv")).unwrap();
    assert!(fit.starts_with("gate,a,b,residual_rms\n"), "{fit}");
    let baselines = std::fs::read_to_string(out.join("baselines.csv")).unwrap();
    assert!(baselines.lines().count() > 4);
    assert!(!out.join("error_vs_t1p.svg").exists());
}

#[test]
fn numerical_failure_exits_3_and_persists_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sat.toml");
    // A strong readout drive saturates a three-level resonator.
    std::fs::write(&cfg, "experiment = \"measure\"\n[measure]\nresonator_dim = 3\nm_peak = 20.0\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &[]), vslq::cli::EXIT_NUMERICAL);
    assert!(out.join("failure.json").exists());
}
