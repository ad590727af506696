use std::path::Path;
use std::process::Command;

fn tomolab(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tomolab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn identical_runs_write_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = tomolab(&["risk", "--quick", "--seed", "11"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["risk-random-basis.csv", "risk-pauli.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"][0]["seed"], 11);
    assert!(report["metadata"]["wall_clock_s"]["risk-pauli"].is_number());
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.toml");
    std::fs::write(&cfg, "seed = 5\n[tables]\nd = [32, 64, 128]\neps = [0.05]\n").unwrap();
    let out = tomolab(&["tables", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tables.csv")).unwrap();
    assert!(csv.starts_with("claim_id,anchor,params,empirical,theory,std,se,verdict\n"));
    assert!(csv.contains("eps=0.05;d=32"));
    assert!(!csv.contains("d=16"));
}

#[test]
fn bad_config_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[shadows]\nobservable = 3\n").unwrap();
    let out = tomolab(&["shadows", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observable"));
}

#[test]
fn config_subcommand_prints_parseable_toml() {
    let dir = tempfile::tempdir().unwrap();
    let out = tomolab(&["config"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = tomolab::experiments::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, tomolab::experiments::ExperimentConfig::default());
}
