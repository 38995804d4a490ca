use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use lwrnet::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.ell = Some(vec![2, 3]);
    cfg.t_final = Some(2.0);
    cfg.samples = Some(5);
    cfg.snapshots = Some(true);
    cfg
}

fn listing(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out
}

#[test]
fn identical_configs_give_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small(ExperimentKind::InitialData);
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    let files = listing(a.path());
    assert_eq!(files, listing(b.path()));
    let csvs: Vec<_> = files.iter().filter(|f| f.ends_with(".csv")).collect();
    assert!(csvs.len() > 4);
    for f in csvs {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_lists_every_output_and_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(ExperimentKind::RoadClosure), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["tool"], "lwrnet");
    assert!(manifest["version"].is_string());

    let listed: BTreeSet<String> =
        manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut on_disk = listing(dir.path());
    on_disk.remove("manifest.json");
    assert_eq!(listed, on_disk);
    assert_eq!(report.files.last().unwrap().to_str(), Some("manifest.json"));

    // The stored config is fully resolved and runs again to the same tables.
    let cfg = ExperimentConfig::from_json(&manifest["config"].to_string()).unwrap();
    assert_eq!(cfg, cfg.resolved());
    let again = tempfile::tempdir().unwrap();
    run_experiment(&cfg, again.path()).unwrap();
    for f in listed.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_config_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = ExperimentConfig::new(ExperimentKind::JunctionSingle);
    cfg.ell = Some(vec![4]);
    assert!(run_experiment(&cfg, &out).is_err());
    assert!(!out.exists());
}
