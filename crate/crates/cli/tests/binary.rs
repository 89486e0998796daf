use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
master_seed = 3
trials = 2
checks = ["decoupling_identity", "singular_values"]

[model]
kind = "gaussian"

[matrix]
n = 6
m = 400
"#;

fn embedlab(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_embedlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let out = embedlab(dir.path(), &["--config", "exp.toml", "--out", "r.csv", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["checks"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let again = embedlab(dir.path(), &["--config", "exp.toml", "--out", "r2.csv", "--jobs", "1", "run"]);
    assert!(again.status.success());
    assert_eq!(report, std::fs::read_to_string(dir.path().join("r2.csv")).unwrap());

    let reseeded = embedlab(dir.path(), &["--config", "exp.toml", "--seed", "4", "run"]);
    assert_ne!(reseeded.stdout, report.as_bytes());

    let agg = embedlab(dir.path(), &["aggregate", "r.csv", "r2.csv"]);
    assert!(agg.status.success());
    let text = String::from_utf8(agg.stdout).unwrap();
    assert!(text.starts_with("check,rows,passed"));
    assert!(text.contains("decoupling_identity,4,4,0,0,1"));
}

#[test]
fn subcommands() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let sample = embedlab(dir.path(), &["--config", "exp.toml", "sample", "--count", "4"]);
    assert!(sample.status.success());
    let text = String::from_utf8(sample.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split(',').count() == 400));

    let distort = embedlab(dir.path(), &["--config", "exp.toml", "--format", "json", "distort"]);
    assert!(distort.status.success(), "{}", String::from_utf8_lossy(&distort.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&distort.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["check"], "singular_values");

    let decouple = embedlab(dir.path(), &["--config", "exp.toml", "decouple"]);
    assert!(decouple.status.success());
    let verify = embedlab(dir.path(), &["verify", "rearrangement"]);
    assert!(verify.status.success());
    assert!(String::from_utf8_lossy(&verify.stderr).contains("[PASS] criterion 6"));
}

#[test]
fn failures_and_errors_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let strict = format!("{CONFIG}\n[constants]\nslack = 0.0\n");
    std::fs::write(dir.path().join("strict.toml"), strict).unwrap();
    let out = embedlab(dir.path(), &["--config", "strict.toml", "run"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("bad.toml"), CONFIG.replace("singular_values", "nope")).unwrap();
    let out = embedlab(dir.path(), &["--config", "bad.toml", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checks[1]"));

    assert_eq!(embedlab(dir.path(), &["verify", "criterion-13"]).status.code(), Some(2));
    assert_eq!(embedlab(dir.path(), &["run"]).status.code(), Some(2));
}
