use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lwr::{FundamentalDiagram, DEFAULT_SAFETY};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InitialData,
    FundamentalDiagram,
    JunctionSingle,
    JunctionAll,
    RoadClosure,
    #[serde(rename = "convergence_1d")]
    Convergence1d,
    ConvergenceGrid,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::InitialData,
        ExperimentKind::FundamentalDiagram,
        ExperimentKind::JunctionSingle,
        ExperimentKind::JunctionAll,
        ExperimentKind::RoadClosure,
        ExperimentKind::Convergence1d,
        ExperimentKind::ConvergenceGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InitialData => "initial_data",
            ExperimentKind::FundamentalDiagram => "fundamental_diagram",
            ExperimentKind::JunctionSingle => "junction_single",
            ExperimentKind::JunctionAll => "junction_all",
            ExperimentKind::RoadClosure => "road_closure",
            ExperimentKind::Convergence1d => "convergence_1d",
            ExperimentKind::ConvergenceGrid => "convergence_grid",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn default_t_final(self) -> f64 {
        match self {
            ExperimentKind::InitialData => 20.0,
            ExperimentKind::FundamentalDiagram => 20.0,
            ExperimentKind::JunctionSingle | ExperimentKind::JunctionAll | ExperimentKind::RoadClosure => 55.0,
            ExperimentKind::ConvergenceGrid => 1.4,
            ExperimentKind::Convergence1d => 0.0,
        }
    }

    fn default_ell(self) -> Vec<usize> {
        match self {
            ExperimentKind::InitialData | ExperimentKind::ConvergenceGrid => vec![3],
            ExperimentKind::FundamentalDiagram => vec![5],
            ExperimentKind::JunctionSingle | ExperimentKind::JunctionAll | ExperimentKind::RoadClosure => vec![3, 5],
            ExperimentKind::Convergence1d => vec![],
        }
    }

    fn default_rho0(self) -> f64 {
        match self {
            ExperimentKind::RoadClosure => 0.3,
            _ => 0.5,
        }
    }
}

/// One experiment run. Every field except `kind` has a default; call
/// [`ExperimentConfig::resolved`] to fill them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Network sizes (junctions per side).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_per_edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<FundamentalDiagram>,
    /// Demand-side diagram; only the fundamental-diagram study uses a
    /// different one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<FundamentalDiagram>,
    /// Initial density for the uniform-data studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_safety: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fmax_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_sweep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charts: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn range(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|k| ((from + k as f64 * step) * 1e6).round() / 1e6).collect()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ell: None,
            cells_per_edge: None,
            edge_length: None,
            supply: None,
            demand: None,
            rho0: None,
            eps: None,
            t_final: None,
            samples: None,
            sample_times: None,
            dt_safety: None,
            sigma_sweep: None,
            fmax_sweep: None,
            cells_sweep: None,
            dx_sweep: None,
            snapshots: None,
            charts: None,
            workers: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Copy with every default written out.
    pub fn resolved(&self) -> Self {
        let kind = self.kind;
        let supply = self.supply.unwrap_or(FundamentalDiagram { sigma: 0.3, f_max: 0.25 });
        let t_final = self.t_final.unwrap_or(kind.default_t_final());
        let samples = self.samples.unwrap_or(50);
        let sample_times = self.sample_times.clone().unwrap_or_else(|| {
            if samples < 2 {
                vec![t_final]
            } else {
                (0..samples).map(|k| t_final * k as f64 / (samples - 1) as f64).collect()
            }
        });
        let demand = self.demand.unwrap_or(match kind {
            ExperimentKind::FundamentalDiagram => FundamentalDiagram { sigma: 0.2, f_max: 0.25 },
            _ => supply,
        });
        Self {
            kind,
            ell: Some(self.ell.clone().unwrap_or_else(|| kind.default_ell())),
            cells_per_edge: Some(self.cells_per_edge.unwrap_or(10)),
            edge_length: Some(self.edge_length.unwrap_or(1.0)),
            supply: Some(supply),
            demand: Some(demand),
            rho0: Some(self.rho0.unwrap_or(kind.default_rho0())),
            eps: Some(self.eps.unwrap_or(match kind {
                ExperimentKind::JunctionSingle | ExperimentKind::JunctionAll => 0.1,
                _ => 0.0,
            })),
            t_final: Some(t_final),
            samples: Some(sample_times.len()),
            sample_times: Some(sample_times),
            dt_safety: Some(self.dt_safety.unwrap_or(DEFAULT_SAFETY)),
            sigma_sweep: Some(self.sigma_sweep.clone().unwrap_or_else(|| range(0.15, 0.5, 0.05))),
            fmax_sweep: Some(self.fmax_sweep.clone().unwrap_or_else(|| range(0.15, 0.4, 0.05))),
            cells_sweep: Some(self.cells_sweep.clone().unwrap_or_else(|| vec![10, 20, 40, 80])),
            dx_sweep: Some(self.dx_sweep.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025])),
            snapshots: Some(self.snapshots.unwrap_or(false)),
            charts: Some(self.charts.unwrap_or(true)),
            workers: self.workers,
            output: self.output.clone(),
        }
    }

    /// Checks a resolved config. Runners call this before simulating.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        let kind = self.kind;
        let ells = self.ell.as_deref().unwrap_or_default();
        if kind != ExperimentKind::Convergence1d && ells.is_empty() {
            return bad("`ell` must list at least one network size".into());
        }
        if let Some(&l) = ells.iter().find(|&&l| l < 2) {
            return bad(format!("`ell` = {l}: networks need at least 2 junctions per side"));
        }
        if kind == ExperimentKind::JunctionSingle {
            if let Some(&l) = ells.iter().find(|&&l| l % 2 == 0) {
                return bad(format!("`ell` = {l}: the single-junction study needs odd sizes"));
            }
        }
        let je = self.cells_per_edge.unwrap_or(0);
        if je < 2 {
            return bad(format!("`cells_per_edge` = {je}: need at least 2"));
        }
        if kind == ExperimentKind::InitialData && je % 2 != 0 {
            return bad(format!("`cells_per_edge` = {je}: the initial-data study needs an even count"));
        }
        let length = self.edge_length.unwrap_or(f64::NAN);
        if !(length > 0.0 && length.is_finite()) {
            return bad(format!("`edge_length` = {length}"));
        }
        for fd in [self.supply, self.demand].into_iter().flatten() {
            fd.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        let rho0 = self.rho0.unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&rho0) {
            return bad(format!("`rho0` = {rho0} outside [0, 1]"));
        }
        let eps = self.eps.unwrap_or(f64::NAN);
        if !(eps >= 0.0) {
            return bad(format!("`eps` = {eps} must be nonnegative"));
        }
        // every perturbed coefficient 1/n_out - eps must stay nonnegative
        let max_eps = match kind {
            ExperimentKind::JunctionSingle => 0.25,
            ExperimentKind::JunctionAll if ells.iter().all(|&l| l == 2) => 0.5,
            ExperimentKind::JunctionAll => 0.25,
            _ => f64::INFINITY,
        };
        if eps > max_eps {
            return bad(format!("`eps` = {eps} exceeds {max_eps}; coefficients would leave [0, 1]"));
        }
        let t_final = self.t_final.unwrap_or(f64::NAN);
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return bad(format!("`t_final` = {t_final}"));
        }
        let times = self.sample_times.as_deref().unwrap_or_default();
        if kind != ExperimentKind::Convergence1d {
            if times.is_empty() {
                return bad("no sample times".into());
            }
            if let Some(t) = times.iter().find(|&&t| !(0.0..=t_final).contains(&t)) {
                return bad(format!("sample time {t} outside [0, {t_final}]"));
            }
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return bad("sample times must be strictly increasing".into());
            }
        }
        let safety = self.dt_safety.unwrap_or(f64::NAN);
        if !(safety > 0.0 && safety <= 1.0) {
            return bad(format!("`dt_safety` = {safety} outside (0, 1]"));
        }
        if kind == ExperimentKind::FundamentalDiagram {
            for &s in self.sigma_sweep.as_deref().unwrap_or_default() {
                if !(s > 0.0 && s < 1.0) {
                    return bad(format!("sigma sweep value {s} outside (0, 1)"));
                }
            }
            for &f in self.fmax_sweep.as_deref().unwrap_or_default() {
                if !(f > 0.0 && f.is_finite()) {
                    return bad(format!("f_max sweep value {f} must be positive"));
                }
            }
        }
        if kind == ExperimentKind::ConvergenceGrid {
            let sweep = self.cells_sweep.as_deref().unwrap_or_default();
            if sweep.is_empty() || sweep.iter().any(|&n| n < 2 || n % 2 != 0) {
                return bad("`cells_sweep` needs even counts of at least 2".into());
            }
        }
        if kind == ExperimentKind::Convergence1d {
            let sweep = self.dx_sweep.as_deref().unwrap_or_default();
            if sweep.is_empty() {
                return bad("`dx_sweep` is empty".into());
            }
            for &dx in sweep {
                let cells = 4.0 / dx;
                if !(dx > 0.0) || (cells - cells.round()).abs() > 1e-9 * cells {
                    return bad(format!("dx = {dx} does not divide the interval [-2, 2]"));
                }
            }
        }
        if self.workers == Some(0) {
            return bad("`workers` must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown_keys() {
        let c = ExperimentConfig::from_json(r#"{"kind":"junction_single","eps":0.2}"#).unwrap();
        assert_eq!(c.kind, ExperimentKind::JunctionSingle);
        assert_eq!(c.eps, Some(0.2));
        assert!(ExperimentConfig::from_json(r#"{"kind":"junction_single","epsilon":0.2}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::new(ExperimentKind::FundamentalDiagram).resolved();
        assert_eq!(c.t_final, Some(20.0));
        assert_eq!(c.sigma_sweep.as_deref().unwrap(), [0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]);
        assert_eq!(c.fmax_sweep.as_deref().unwrap(), [0.15, 0.2, 0.25, 0.3, 0.35, 0.4]);
        let times = c.sample_times.clone().unwrap();
        assert_eq!(times.len(), 50);
        assert_eq!((times[0], times[49]), (0.0, 20.0));
        c.validate().unwrap();
        let round = ExperimentConfig::from_json(&ExperimentConfig::new(ExperimentKind::RoadClosure).resolved().to_json());
        assert_eq!(round.unwrap().rho0, Some(0.3));
    }

    #[test]
    fn validation() {
        let check = |json: &str| ExperimentConfig::from_json(json).unwrap().resolved().validate();
        assert!(check(r#"{"kind":"junction_single","ell":[4]}"#).is_err());
        assert!(check(r#"{"kind":"junction_single","eps":0.3}"#).is_err());
        assert!(check(r#"{"kind":"junction_all","eps":0.25}"#).is_ok());
        assert!(check(r#"{"kind":"initial_data","cells_per_edge":5}"#).is_err());
        assert!(check(r#"{"kind":"initial_data","ell":[1]}"#).is_err());
        assert!(check(r#"{"kind":"road_closure","t_final":5,"sample_times":[0,6]}"#).is_err());
        assert!(check(r#"{"kind":"road_closure","dt_safety":1.5}"#).is_err());
        assert!(check(r#"{"kind":"convergence_1d","dx_sweep":[0.3]}"#).is_err());
        assert!(check(r#"{"kind":"convergence_grid","cells_sweep":[10,15]}"#).is_err());
        assert!(check(r#"{"kind":"fundamental_diagram","supply":{"sigma":1.2,"f_max":0.25}}"#).is_err());
    }
}
