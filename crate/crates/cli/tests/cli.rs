use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optcmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optcmd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn default_track_writes_one_csv_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = optcmd(&["track", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = csv_files(dir.path());
    let per_model = files.iter().filter(|f| f.starts_with("optdcmd_minus_dmd_")).count();
    assert!(per_model >= 5, "{files:?}");
    let m = manifest(dir.path());
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["config"]["track"]["horizon"], 1000);
    assert_eq!(m["config"]["track"]["repetitions"], 100);
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = optcmd(&["track", "--out", dir.path().to_str().unwrap(), "--set", r#"models=["perfect","oracle"]"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
    let out = optcmd(&["track", "--out", dir.path().to_str().unwrap(), "--set", "track.horizn=5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["11", "11", "12"]) {
        let out = optcmd(&[
            "track", "--out", d.path().to_str().unwrap(), "--seed", seed, "--set", "horizon=80", "--set", "repetitions=4",
        ]);
        assert!(out.status.success());
    }
    let files = csv_files(dirs[0].path());
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert!(files.iter().all(|f| read(dirs[0].path(), f) == read(dirs[1].path(), f)));
    assert!(files.iter().any(|f| read(dirs[0].path(), f) != read(dirs[2].path(), f)));
}

#[test]
fn manifest_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = optcmd(&["portfolio", "--synthetic", "4", "120", "3", "--out", a.path().to_str().unwrap(), "--set", "repetitions=2"]);
    assert!(out.status.success());
    let m = a.path().join("manifest.json");
    let out = optcmd(&["portfolio", "--config", m.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(out.status.success());
    for f in csv_files(a.path()) {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn synthetic_portfolio_completes_with_default_beta() {
    let dir = tempfile::tempdir().unwrap();
    let out = optcmd(&["portfolio", "--synthetic", "5", "200", "0", "--out", dir.path().to_str().unwrap(), "--emit-plot-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = csv_files(dir.path());
    for f in ["cup.csv", "optmd_noisy.csv", "optmd_ma_5.csv", "optmd_recursive_ls_3.csv", "plot_data.csv"] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    let m = manifest(dir.path());
    assert_eq!(m["config"]["portfolio"]["beta"], 9.0);
    assert_eq!(m["inputs"]["synthetic"]["assets"], 5);
    assert_eq!(m["inputs"]["synthetic"]["horizon"], 200);
}

#[test]
fn malformed_dataset_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("market.csv");
    fs::write(&data, "asset_1,asset_2\n1.01,0.99\n1.02,0.98\n1.00,abc\n").unwrap();
    let out = optcmd(&["portfolio", "--dataset", data.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    let out = optcmd(&["portfolio", "--dataset", "/nonexistent.csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_selection_runs_only_matching_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = optcmd(&["verify", "lemma2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["suites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["lemma2"]);
    assert_eq!(report["passed"], true);
    let out = optcmd(&["verify", "no_such_suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_timings() {
    let dir = tempfile::tempdir().unwrap();
    let out = optcmd(&["bench", "--set", "rounds=50", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    assert!(report["ns_per_call"]["optdcmd"].as_f64().unwrap() > 0.0);
}
