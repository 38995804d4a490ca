use std::path::Path;
use std::process::{Command, Output};

fn lwrnet(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwrnet"))
        .args(args)
        .current_dir(root)
        .env("LWRNET_OUT_ROOT", root.join("runs"))
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn line_convergence_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = lwrnet(&["experiment", "--kind", "convergence_1d", "--no-charts"], dir.path());
    let listed = stdout(&out);
    let csv = dir.path().join("runs/convergence_1d/convergence_1d.csv");
    assert!(listed.contains("convergence_1d.csv"));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dx,H,W,abs_error,bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[3] <= r[4]);
    }
    assert!(dir.path().join("runs/convergence_1d/manifest.json").exists());
}

#[test]
fn simulate_then_distance_matches_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    stdout(&lwrnet(&["generate-network", "--ell", "3", "--out", "net.json"], root));
    for (preset, out) in [("split-rightward", "s"), ("split-leftward", "d")] {
        stdout(&lwrnet(
            &["simulate", "--network", "net.json", "--preset", preset, "--T", "1", "--times", "0,1", "--out", out],
            root,
        ));
        assert!(root.join(out).join("manifest.json").exists());
    }

    let mut cfg = lwrnet::experiments::ExperimentConfig::new(lwrnet::experiments::ExperimentKind::InitialData);
    cfg.ell = Some(vec![3]);
    cfg.t_final = Some(1.0);
    cfg.sample_times = Some(vec![0.0, 1.0]);
    let (_, outcome) = lwrnet::experiments::run(&cfg).unwrap();
    let lwrnet::experiments::Outcome::Series(runs) = outcome else { panic!("series expected") };
    let points = &runs[0].1.points;

    let a0 = "s/rho_t0.000000.csv";
    let b0 = "d/rho_t0.000000.csv";
    let line = stdout(&lwrnet(&["distance", a0, b0, "--network", "net.json", "--l1"], root));
    let vals: Vec<f64> = line.split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert!((vals[0] - points[0].h_hat).abs() <= 1e-12, "{} vs {}", vals[0], points[0].h_hat);
    assert_eq!(vals[1], 2.0);

    let same = stdout(&lwrnet(&["distance", a0, a0, "--network", "net.json"], root));
    assert_eq!(same.trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_eq!(lwrnet(&["experiment", "--kind", "nonsense"], root).status.code(), Some(4));
    assert_eq!(lwrnet(&["distance", "a.csv", "b.csv", "--network", "missing.json"], root).status.code(), Some(3));
    assert_eq!(lwrnet(&["simulate", "--no-such-flag"], root).status.code(), Some(2));
    let bad = lwrnet(&["experiment", "--kind", "junction_single", "--ell", "4"], root);
    assert_eq!(bad.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(msg.trim().lines().count(), 1, "{msg}");
}
