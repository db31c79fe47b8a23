mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use common::scenario_dir;
use passloc::harness::{load_scenario, parse_scenario, ScenarioFile};

fn passloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passloc"))
        .args(args)
        .env("PASSLOC_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    scenario_dir().join(format!("{name}.toml")).display().to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap()).collect()
}

#[test]
fn missing_scenario_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = passloc(&["mse", "--scenario", "/nonexistent/nope.toml", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
    assert!(!out.exists());
}

#[test]
fn invalid_scenario_names_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("tiny")).unwrap().replace("num_samples = 4", "num_samples = 0");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let o = passloc(&["synth", "--scenario", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_samples"));
}

#[test]
fn bundled_scenarios_round_trip() {
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        let loaded = load_scenario(&path).unwrap();
        let text = loaded.file.to_toml().unwrap();
        let again = parse_scenario(&text, "round trip").unwrap();
        assert_eq!(again.file, loaded.file, "{}", path.display());
        assert_eq!(again.scenario, loaded.scenario, "{}", path.display());
        let rebuilt = ScenarioFile::from_scenario(&loaded.scenario).to_scenario("rebuilt").unwrap();
        assert_eq!(rebuilt, loaded.scenario, "{}", path.display());
    }
}

#[test]
fn synth_writes_snapshots_and_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let o = passloc(&["synth", "--scenario", &scenario("tiny"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = load_scenario(Path::new(&scenario("tiny"))).unwrap().scenario;
    let rows = csv_rows(&dir.path().join("snapshots.csv"));
    assert_eq!(rows.len(), s.num_samples * s.num_nodes() * s.num_antennas());
    let cov = passloc::covariance::read_binary(std::fs::File::open(dir.path().join("scm.bin")).unwrap()).unwrap();
    assert_eq!(cov.nrows(), s.num_nodes() * s.num_antennas());
    let echoed = load_scenario(&dir.path().join("scenario.toml")).unwrap().scenario;
    assert_eq!(echoed, s);
}

#[test]
fn spectrum_writes_one_csv_per_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let o = passloc(&["spectrum", "--scenario", &scenario("line_close_pair"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for est in ["mvdr", "bs", "isr"] {
        let rows = csv_rows(&dir.path().join(format!("spectrum_{est}.csv")));
        assert_eq!(rows.len(), 201);
        assert!(rows.iter().all(|r| &r[4] == est));
        assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() > 0.0));
    }
    let svg = std::fs::read_to_string(dir.path().join("spectrum.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn sweep_has_one_row_per_estimator_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = passloc(&["sweep", "--scenario", &scenario("tiny"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 15);
    for est in ["mvdr", "bs", "isr"] {
        let values: Vec<&str> = rows.iter().filter(|r| &r[0] == est).map(|r| r.get(2).unwrap()).collect();
        assert_eq!(values, ["1", "2", "4", "8", "16"], "{est}");
    }
    assert!(dir.path().join("sweep.svg").exists());
}

#[test]
fn sweep_requires_a_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = passloc(&["sweep", "--scenario", &scenario("line_close_pair"), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn mse_is_reproducible_and_seed_sensitive() {
    let run = |seed: &str, workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_passloc"))
            .args(["mse", "--scenario", &scenario("tiny"), "--seed", seed, "--trials", "6"])
            .args(["--out", dir.path().to_str().unwrap()])
            .env("PASSLOC_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join("mse.csv")).unwrap()
    };
    let a = run("11", "1");
    assert_eq!(a, run("11", "3"));
    assert_ne!(a, run("12", "1"));
}

#[test]
fn single_trial_on_tiny_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = passloc(&["mse", "--scenario", &scenario("tiny"), "--trials", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let rows = csv_rows(&dir.path().join("mse.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[3] == "1"));
}

#[test]
fn estimator_flag_selects_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = passloc(&[
        "mse", "--scenario", &scenario("tiny"), "--estimator", "isr", "--isr-max-iter", "3", "--isr-tol", "1e-6",
        "--trials", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("mse.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "isr");
}

#[test]
fn trials_and_paper_scale_conflict() {
    let o = passloc(&["mse", "--scenario", &scenario("tiny"), "--trials", "2", "--paper-scale"]);
    assert!(!o.status.success());
}
