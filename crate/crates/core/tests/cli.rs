use std::fs;
use std::process::Command;

fn pmnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmnn"))
}

const CONFIG: &str = r#"
name = "cli-tiny"

[problem]
operator = "laplacian-plus-constant"
constant = 100.0
dim = 1
boundary = { kind = "dirichlet" }

[architecture]
layer_sizes = [1, 8, 1]

[training]
method = "pmnn"
n_samples = 100
epochs = 500

[exact]
kind = "sine-product"
modes = [1]

[outputs]
density_points = 1000
heldout_points = 50

[profiles.desk]
epochs = 10
"#;

#[test]
fn list_shows_registry() {
    let out = pmnn().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 17);
    assert!(text.contains("interior-a81"));
}

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let runs = tmp.path().join("runs");
    let out = pmnn()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--profile",
            "desk",
            "--seed",
            "4",
            "--out",
        ])
        .arg(&runs)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = runs.join("cli-tiny");
    let iters = fs::read_to_string(dir.join("iterations.csv")).unwrap();
    assert_eq!(iters.lines().count(), 1 + 1 + 1);
    let echoed = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(echoed.contains("seed = 4"));

    let rep = pmnn().arg("report").arg(&dir).output().unwrap();
    assert!(rep.status.success());
    assert!(String::from_utf8(rep.stdout).unwrap().starts_with("cli-tiny: lambda"));
}

#[test]
fn errors_are_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        CONFIG
            .replace("[1, 8, 1]", "[3, 8, 1]")
            .replace("epochs = 500", "epochs = 0"),
    )
    .unwrap();
    let out = pmnn()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["details"].as_array().unwrap().len(), 2);

    let out = pmnn().args(["run", "missing-experiment"]).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "unknown_experiment");

    let out = pmnn().arg("report").arg(tmp.path().join("nowhere")).output().unwrap();
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn sweep_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.toml");
    fs::write(&cfg, "name = \"s\"\ngrid = [3]\nlayer_sizes = [2, 4, 1]\nepochs = 5\n").unwrap();
    let out = pmnn()
        .arg("sweep-fdm")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("s").join("sweep.csv")).unwrap();
    assert!(csv.starts_with("n_h,nn_lambda"));
    assert_eq!(csv.lines().count(), 2);
}
