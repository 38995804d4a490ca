use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::lwr::{snapshot_file_name, write_snapshot};

use super::runners::{GridConvergenceRow, LineConvergenceRow, Outcome, PairRun, SeriesPoint, SweepPoint};
use super::{ExperimentConfig, ExperimentError};

/// Collects written files, relative to the run directory.
pub(crate) struct Writer<'a> {
    root: &'a Path,
    pub(crate) files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub(crate) fn new(root: &'a Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(root)?;
        Ok(Self { root, files: Vec::new() })
    }

    fn put(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<(), ExperimentError> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, text)?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    fn snapshots(&mut self, dir: &Path, run: &PairRun) -> Result<(), ExperimentError> {
        for (side, traj) in [("supply", &run.supply), ("demand", &run.demand)] {
            let sub = dir.join(side);
            fs::create_dir_all(self.root.join(&sub))?;
            for snap in &traj.snapshots {
                let rel = sub.join(snapshot_file_name(snap.time()));
                write_snapshot(self.root.join(&rel), &run.grid, snap.rho())?;
                self.files.push(rel);
            }
        }
        Ok(())
    }
}

pub fn series_csv(points: &[SeriesPoint]) -> String {
    let mut out = String::from("t,H_hat,L1_hat\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.t, p.h_hat, p.l1_hat);
    }
    out
}

fn sweep_csv(name: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("{name},H_hat\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.value, p.h_hat);
    }
    out
}

fn grid_table(rows: &[GridConvergenceRow]) -> String {
    let mut out = String::from("cells_per_edge,dx,H_hat\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.cells_per_edge, r.dx, r.h_hat);
    }
    out
}

fn line_table(rows: &[LineConvergenceRow]) -> String {
    let mut out = String::from("dx,H,W,abs_error,bound\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.dx, r.h, r.w, r.error, r.bound);
    }
    out
}

pub(crate) fn write_outcome(
    w: &mut Writer,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
) -> Result<(), ExperimentError> {
    let charts = cfg.charts.unwrap_or(true);
    let snapshots = cfg.snapshots.unwrap_or(false);
    let name = cfg.kind.name();
    let series_lines = |points: &[SeriesPoint]| {
        vec![
            ("H_hat".to_string(), points.iter().map(|p| (p.t, p.h_hat)).collect()),
            ("L1_hat".to_string(), points.iter().map(|p| (p.t, p.l1_hat)).collect()),
        ]
    };
    match outcome {
        Outcome::Series(runs) => {
            for (ell, run) in runs {
                let dir = PathBuf::from(format!("ell{ell}"));
                w.put(dir.join("series.csv"), &series_csv(&run.points))?;
                if charts {
                    let title = format!("{name}, ell = {ell}");
                    w.put(dir.join("series.svg"), &line_chart(&title, "t", "distance", &series_lines(&run.points)))?;
                }
                if snapshots {
                    w.snapshots(&dir, run)?;
                }
            }
            if charts && runs.len() > 1 {
                let lines: Vec<_> = runs
                    .iter()
                    .map(|(ell, run)| (format!("ell = {ell}"), run.points.iter().map(|p| (p.t, p.h_hat)).collect()))
                    .collect();
                w.put("H_hat.svg", &line_chart(name, "t", "H_hat", &lines))?;
            }
        }
        Outcome::Diagram(studies) => {
            for s in studies {
                let dir = PathBuf::from(format!("ell{}", s.ell));
                w.put(dir.join("sweep_sigma.csv"), &sweep_csv("sigma_d", &s.sigma))?;
                w.put(dir.join("sweep_fmax.csv"), &sweep_csv("fmax_d", &s.f_max))?;
                w.put(dir.join("series.csv"), &series_csv(&s.run.points))?;
                if charts {
                    let pts = |v: &[SweepPoint]| v.iter().map(|p| (p.value, p.h_hat)).collect();
                    w.put(
                        dir.join("sweep_sigma.svg"),
                        &line_chart("H_hat at T", "sigma_d", "H_hat", &[("H_hat".into(), pts(&s.sigma))]),
                    )?;
                    w.put(
                        dir.join("sweep_fmax.svg"),
                        &line_chart("H_hat at T", "fmax_d", "H_hat", &[("H_hat".into(), pts(&s.f_max))]),
                    )?;
                    w.put(dir.join("series.svg"), &line_chart(name, "t", "distance", &series_lines(&s.run.points)))?;
                }
                if snapshots {
                    w.snapshots(&dir, &s.run)?;
                }
            }
        }
        Outcome::Grid { ell, rows } => {
            w.put("convergence_grid.csv", &grid_table(rows))?;
            for r in rows {
                let dir = PathBuf::from(format!("ell{ell}_cells{}", r.cells_per_edge));
                w.put(dir.join("series.csv"), &series_csv(&r.run.points))?;
                if snapshots {
                    w.snapshots(&dir, &r.run)?;
                }
            }
            if charts {
                let lines: Vec<_> = rows
                    .iter()
                    .map(|r| (format!("J_e = {}", r.cells_per_edge), r.run.points.iter().map(|p| (p.t, p.h_hat)).collect()))
                    .collect();
                w.put("convergence_grid.svg", &line_chart(name, "t", "H_hat", &lines))?;
            }
        }
        Outcome::Line(rows) => {
            w.put("convergence_1d.csv", &line_table(rows))?;
            if charts {
                let lines = vec![
                    ("|H - W|".to_string(), rows.iter().map(|r| (r.dx, r.error)).collect()),
                    ("M dx".to_string(), rows.iter().map(|r| (r.dx, r.bound)).collect()),
                ];
                w.put("convergence_1d.svg", &line_chart(name, "dx", "error", &lines))?;
            }
        }
    }
    Ok(())
}

pub(crate) fn write_manifest(w: &mut Writer, cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let files: Vec<String> = w.files.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    let manifest = serde_json::json!({
        "tool": "lwrnet",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    w.put("manifest.json", &text)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

/// A standalone SVG line chart.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, lines: &[(String, Vec<(f64, f64)>)]) -> String {
    let (width, height) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let all = lines.iter().flat_map(|(_, pts)| pts.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let (pw, ph) = (width - left - right, height - top - bottom);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{top}" stroke="#ddd"/>"##, top + ph);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 16.0, label(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, left + pw);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, label(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, height - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, (name, pts)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
