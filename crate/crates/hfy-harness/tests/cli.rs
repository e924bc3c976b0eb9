//! End-to-end checks of the `hfy` binary: subcommands, config loading, flag
//! overrides, output files, and exit codes.

use std::process::Command;

fn hfy() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hfy"))
}

#[test]
fn capacity_prints_csv_on_stdout() {
    let out = hfy()
        .args([
            "capacity",
            "--n",
            "6",
            "--dim",
            "12",
            "--radius",
            "3",
            "--min-separation",
            "4",
            "--queries",
            "6",
            "--sigma",
            "0.05",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("experiment,n,d,beta"), "{header}");
    let row = lines.next().unwrap();
    assert!(row.starts_with("capacity,6,12,"), "{row}");
    assert!(row.contains("entmax(2)"));
}

#[test]
fn metastable_writes_results_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = hfy()
        .args([
            "metastable",
            "--n",
            "4",
            "--dim",
            "8",
            "--radius",
            "3",
            "--queries",
            "4",
            "--sep",
            "sparsemax",
            "--sep",
            "ksubsets:2",
            "--seed",
            "3",
        ])
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.contains("ksubsets(2)"));
    assert!(csv.contains("percent"));
}

#[test]
fn config_file_plus_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{
            "experiment": "capacity",
            "memory_sizes": [5],
            "dim": 10,
            "sphere_radius": 3.0,
            "queries": 5,
            "seeds": [0, 1],
            "separations": [{"kind": "entmax", "alpha": 2.0}]
        }"#,
    )
    .unwrap();
    let out = hfy()
        .args(["noise", "--sigma", "0.0", "--sigma", "0.05"])
        .arg("--config")
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    // The subcommand overrides the config's experiment and the sigma list
    // yields one row per level.
    assert_eq!(text.lines().filter(|l| l.starts_with("noise,")).count(), 2);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.json");
    std::fs::write(&cfg_path, r#"{"betas": []}"#).unwrap();
    let out = hfy().arg("capacity").arg("--config").arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = hfy().args(["capacity", "--sep", "wibble"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_three() {
    let out = hfy()
        .args([
            "capacity",
            "--dataset",
            "idx-images",
            "--data-path",
            "/nonexistent/images.idx",
            "--n",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn free_recall_emits_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("recall");
    let out = hfy()
        .args([
            "free-recall",
            "--n",
            "4",
            "--dim",
            "8",
            "--radius",
            "3",
            "--min-separation",
            "4",
            "--inner-iters",
            "5",
            "--cue-sigma",
            "0.01",
            "--seed",
            "5",
        ])
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(entries.contains(&"results.csv".to_string()));
    assert!(entries.iter().any(|e| e.starts_with("trace_") && e.ends_with(".json")));
    // Trace JSON uses 1-based pattern indices.
    let trace_file = entries.iter().find(|e| e.starts_with("trace_constrained")).unwrap();
    let body = std::fs::read_to_string(out_dir.join(trace_file)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&body).unwrap();
    let steps = json["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 4);
    assert_eq!(steps[0]["step"], 1);
}
