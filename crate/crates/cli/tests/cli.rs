use std::path::Path;
use std::process::{Command, Output};

fn bandsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandsel")).args(args).output().unwrap()
}

fn generate(dir: &Path) -> String {
    let out = dir.join("data");
    let status = bandsel(&["generate", "--n-validation", "200", "--out-dir", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out.to_string_lossy().into_owned()
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let out = bandsel(&["fit", "--train", "/nonexistent.csv", "--gamma", "1", "--out", "/tmp/x.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let train = format!("{data}/train.csv");
    for bad in [
        vec!["sweep", "--train", &train, "--risk", "nope", "--out", "c.csv"],
        vec!["sweep", "--train", &train, "--risk", "validation", "--out", "c.csv"],
        vec!["sweep", "--train", &train, "--risk", "sv", "--grid", "1:2", "--out", "c.csv"],
        vec!["fit", "--train", &train, "--gamma", "-1", "--out", "m.json"],
        vec!["fit", "--train", &train, "--gamma", "1", "--nu", "1.5", "--out", "m.json"],
    ] {
        let out = bandsel(&bad);
        assert!(!out.status.success(), "{bad:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn generate_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    for name in ["train.csv", "anomalies.csv", "validation.csv", "manifest.json"] {
        assert!(Path::new(&data).join(name).is_file(), "{name}");
    }
    let train = std::fs::read_to_string(format!("{data}/train.csv")).unwrap();
    assert_eq!(train.lines().next(), Some("f1,f2,f3,f4,f5"));
    assert_eq!(train.lines().count(), 101);
    let validation = std::fs::read_to_string(format!("{data}/validation.csv")).unwrap();
    assert_eq!(validation.lines().count(), 401);
}

#[test]
fn sweep_then_select_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let curve = dir.path().join("sv.csv");
    let curve = curve.to_str().unwrap();
    let out = bandsel(&["sweep", "--train", &format!("{data}/train.csv"), "--risk", "sv", "--grid", "0.5:50:9", "--out", curve]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(curve).unwrap();
    assert_eq!(text.lines().count(), 10);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{curve}.json")).unwrap()).unwrap();
    assert_eq!(meta["solver_fits"], 9);
    assert_eq!(meta["grid"]["steps"], 9);

    let out = bandsel(&["select", "--curve", curve, "--rule", "plateau-max"]);
    assert!(out.status.success());
    let sel: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sel["index"], sel["plateau"]["end"]);
    let gamma = sel["gamma"].as_f64().unwrap();
    assert!((0.5..=50.0).contains(&gamma));
}

#[test]
fn fitted_model_file_loads_in_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    let model_path = dir.path().join("m.json");
    let out = bandsel(&["fit", "--train", &format!("{data}/train.csv"), "--gamma", "4", "--out", model_path.to_str().unwrap()]);
    assert!(out.status.success());
    let model = bandsel::SvddModel::load(&model_path).unwrap();
    assert_eq!(model.gamma().value(), 4.0);
    assert!((model.alphas().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
