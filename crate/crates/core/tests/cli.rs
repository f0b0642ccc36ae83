//! End-to-end checks of the `bvmax` binary: config diagnostics, run and
//! report outputs, and manifest handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bvmax(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bvmax"));
    cmd.args(args).env_remove("BVMAX_OUT");
    if let Some(dir) = env_out {
        cmd.env("BVMAX_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 5

[[experiment]]
id = "gamma"
kind = "andersen_series"
order = 16

[[experiment]]
id = "bridge"
kind = "bridge_stay"
ns = [2, 5]
samples = 20000
"#;

fn manifests_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir.join("manifests"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

#[test]
fn empty_experiment_list_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "empty.toml", "seed = 1\nexperiment = []\n");
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment list is empty"), "{}", stderr(&o));
}

#[test]
fn bad_field_reports_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "[[experiment]]\nid = \"a\"\nkind = \"bridge_stay\"\nsamples = \"many\"\n",
    );
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("experiment[0].samples"), "{err}");

    let cfg = write(tmp.path(), "typo.toml", "[[experiment]]\nid = \"a\"\nkind = \"bridge_stay\"\nsampels = 10\n");
    let err = stderr(&bvmax(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path())));
    assert!(err.contains("experiment[0]") && err.contains("sampels"), "{err}");

    let cfg = write(tmp.path(), "range.toml", "[[experiment]]\nid = \"a\"\nkind = \"bridge_stay\"\nns = [1]\n");
    let err = stderr(&bvmax(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path())));
    assert!(err.contains("experiment[0].ns"), "{err}");
}

#[test]
fn run_writes_csv_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("gamma.csv").exists());
    assert!(out.join("bridge.csv").exists());
    let m = manifests_in(&out);
    assert_eq!(m.len(), 1);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&m[0]).unwrap()).unwrap();
    assert_eq!(json["master_seed"], 5);
    for row in json["rows"].as_array().unwrap() {
        assert!(row["param_fingerprint"].as_str().unwrap().len() == 64);
        assert!(row.get("master_seed").is_some());
    }
}

#[test]
fn env_var_sets_output_directory_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let env_dir = tmp.path().join("env");
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap()], Some(&env_dir));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("gamma.csv").exists());
    let flag_dir = tmp.path().join("flag");
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(o.status.success());
    assert!(flag_dir.join("gamma.csv").exists());
    assert_eq!(manifests_in(&env_dir).len(), 1);
}

#[test]
fn report_pools_two_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    for seed in ["5", "6"] {
        let o = bvmax(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed],
            None,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let m = manifests_in(&out);
    assert_eq!(m.len(), 2, "manifests are append-only");
    let rep = tmp.path().join("rep");
    let mut args = vec!["report".to_string()];
    args.extend(m.iter().map(|p| p.display().to_string()));
    args.extend(["--out".into(), rep.display().to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = bvmax(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut rdr = csv::Reader::from_path(rep.join("report.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (label, runs, se) = (col("label"), col("runs"), col("std_error"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| &r[runs] == "2"));

    // pooled std error of two equal-size runs is about 1/sqrt(2) of either
    let single: Vec<serde_json::Value> = m
        .iter()
        .map(|p| serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect();
    let pick = |v: &serde_json::Value| {
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["label"] == "bridge_stay" && r["x"] == 5.0)
            .map(|r| r["std_error"].as_f64().unwrap())
            .unwrap()
    };
    let (a, b) = (pick(&single[0]), pick(&single[1]));
    let pooled: f64 = rows
        .iter()
        .find(|r| &r[label] == "bridge_stay" && &r[col("x")] == "5.0")
        .map(|r| r[se].parse().unwrap())
        .unwrap();
    assert!((pooled - (a * a + b * b).sqrt() / 2.0).abs() < 1e-12);
    assert!(rep.join("series").read_dir().unwrap().count() > 0);
}

#[test]
fn report_missing_manifest_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = bvmax(&["report", missing.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn report_rejects_fingerprint_collision() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = bvmax(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    let original = manifests_in(&out).remove(0);
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&original).unwrap()).unwrap();
    json["config"]["experiment"][1]["samples"] = 999.into();
    let forged = write(tmp.path(), "forged.json", &serde_json::to_string(&json).unwrap());
    let o = bvmax(&["report", original.to_str().unwrap(), forged.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fingerprint collision"), "{}", stderr(&o));
}

#[test]
fn verify_rejects_unknown_preset() {
    let o = bvmax(&["verify", "--preset", "medium"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("medium"));
}
