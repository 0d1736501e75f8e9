use std::path::Path;
use std::process::{Command, Output};

fn rprae(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rprae")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"{
  "model": {"embed_dim": 16, "retrofit_hidden": 8, "hidden": 6, "z_dim": 6},
  "train": {"iterations": 6, "n_ch": 2, "batch_size": 4, "checkpoint_every": 3}
}"#;

#[test]
fn gen_data_writes_manifest_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let o = rprae(&["gen-data", "--out", "d", "--fold", "2", "--manifest-only", "--seed", "4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let d = dir.path().join("d");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["fold"], 2);
    assert_eq!(manifest["config"]["seed"], 4);
    let snap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("config.json")).unwrap()).unwrap();
    assert_eq!(snap["seed"], 4);
    assert_eq!(std::fs::read_dir(&d).unwrap().count(), 2);
}

#[test]
fn train_eval_analyze_round() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("tiny.json"), TINY).unwrap();
    assert!(rprae(&["gen-data", "--config", "tiny.json", "--out", "data"], p).status.success());

    let o = rprae(&["train", "--config", "tiny.json", "--out", "run", "--data", "data"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(p.join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 7);

    // Resuming keeps the rows before the checkpoint and appends the rest.
    let longer = TINY.replace("\"iterations\": 6", "\"iterations\": 9");
    std::fs::write(p.join("longer.json"), longer).unwrap();
    let o = rprae(&["train", "--config", "longer.json", "--out", "run", "--data", "data", "--resume", "run/checkpoint.json"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let resumed = std::fs::read_to_string(p.join("run/train_log.csv")).unwrap();
    assert_eq!(resumed.lines().count(), 10);
    assert!(resumed.starts_with(log.as_str()));
    let ck: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("run/checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ck["iteration"], 9);

    let o = rprae(&["eval", "--config", "tiny.json", "--out", "run", "--data", "data", "--mode", "act2dsc"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run/eval_act2dsc/report.json")).unwrap()).unwrap();
    assert!(report.is_object() || report.is_array());

    let o = rprae(&["analyze", "--config", "tiny.json", "--out", "run"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["analysis.json", "cosine_input.svg", "cosine_retrofit.svg", "pca_retrofit_pc12.svg"] {
        assert!(p.join("run/analysis").join(f).exists(), "{f}");
    }

    // A different architecture cannot load this checkpoint.
    let wide = TINY.replace("\"hidden\": 6", "\"hidden\": 7");
    std::fs::write(p.join("wide.json"), wide).unwrap();
    let o = rprae(&["eval", "--config", "wide.json", "--out", "run", "--data", "data", "--mode", "dsc2act"], p);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = rprae(&["eval", "--mode", "act2dsc", "--fold", "6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = rprae(&["train", "--threads", "0", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = rprae(&["train", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"));
}

#[test]
fn missing_inputs_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = rprae(&["train", "--out", "x", "--data", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
    let o = rprae(&["analyze", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("checkpoint.json"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rprae(&["gradcheck"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("worst:"));
}
