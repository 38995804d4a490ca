use std::sync::Arc;

use rayon::prelude::*;

use crate::lwr::{cfl_dt, simulate, FundamentalDiagram, Scenario, Trajectory};
use crate::metric::{grid_cost_matrix, CostMatrix};
use crate::network::{discretize, manhattan, CellGrid, EdgeSpec, ManhattanLayout, MetricNetwork, NetworkSpec, RoadDirection};
use crate::reference::{l1_cells, w1_line, LineDensity};
use crate::transport::{wasserstein_cells, DistanceOptions};

use super::{ExperimentConfig, ExperimentError, ExperimentKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub h_hat: f64,
    pub l1_hat: f64,
}

/// Supply and demand runs on one network with their distances over time.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub grid: CellGrid,
    pub points: Vec<SeriesPoint>,
    pub supply: Trajectory,
    pub demand: Trajectory,
}

impl PairRun {
    pub fn final_h_hat(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.h_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub h_hat: f64,
}

#[derive(Debug, Clone)]
pub struct DiagramStudy {
    pub ell: usize,
    pub sigma: Vec<SweepPoint>,
    pub f_max: Vec<SweepPoint>,
    /// Time series for the configured demand diagram.
    pub run: PairRun,
}

#[derive(Debug, Clone)]
pub struct GridConvergenceRow {
    pub cells_per_edge: usize,
    pub dx: f64,
    pub h_hat: f64,
    pub run: PairRun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineConvergenceRow {
    pub dx: f64,
    pub h: f64,
    pub w: f64,
    pub error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    /// One pair run per network size.
    Series(Vec<(usize, PairRun)>),
    Diagram(Vec<DiagramStudy>),
    Grid { ell: usize, rows: Vec<GridConvergenceRow> },
    Line(Vec<LineConvergenceRow>),
}

/// Quartic test density on `[-2, 2]` and its antiderivative.
pub fn quartic(x: f64) -> f64 {
    x.powi(4) - 2.0 * x * x + 1.0
}

fn quartic_primitive(x: f64) -> f64 {
    x.powi(5) / 5.0 - 2.0 * x.powi(3) / 3.0 + x
}

/// Constant density with the same mass as [`quartic`] on `[-2, 2]`.
pub const FLAT_LEVEL: f64 = 23.0 / 15.0;

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    t_final: f64,
    times: Vec<f64>,
    safety: f64,
    supply_fd: FundamentalDiagram,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            t_final: cfg.t_final.unwrap(),
            times: cfg.sample_times.clone().unwrap(),
            safety: cfg.dt_safety.unwrap(),
            supply_fd: cfg.supply.unwrap(),
        }
    }

    fn network(&self, ell: usize) -> Result<(ManhattanLayout, Arc<MetricNetwork>, CellGrid), ExperimentError> {
        self.network_with(ell, self.cfg.cells_per_edge.unwrap())
    }

    fn network_with(
        &self,
        ell: usize,
        cells: usize,
    ) -> Result<(ManhattanLayout, Arc<MetricNetwork>, CellGrid), ExperimentError> {
        let length = self.cfg.edge_length.unwrap();
        let net = Arc::new(manhattan(ell, length)?);
        let grid = discretize(&net, length / cells as f64)?;
        Ok((ManhattanLayout::new(ell)?, net, grid))
    }

    /// Common step for both runs, shortened so that `t_final` is hit
    /// exactly.
    fn dt(&self, fds: &[FundamentalDiagram], dx: f64) -> Result<f64, ExperimentError> {
        let mut dt = f64::INFINITY;
        for fd in fds {
            dt = dt.min(cfl_dt(fd, dx, self.safety)?);
        }
        Ok(aligned_dt(dt, self.t_final))
    }

    fn scenario(
        &self,
        grid: CellGrid,
        fd: FundamentalDiagram,
        rho0: Vec<f64>,
        dt: f64,
        times: &[f64],
    ) -> Result<Scenario, ExperimentError> {
        Ok(Scenario::builder(grid, fd)
            .initial_totals(rho0)
            .dt(dt)
            .t_final(self.t_final)
            .snapshot_times(times.to_vec())
            .build()?)
    }
}

/// Largest step `<= dt` that divides `t_final` into whole steps.
pub fn aligned_dt(dt: f64, t_final: f64) -> f64 {
    if t_final > 0.0 {
        t_final / (t_final / dt).ceil()
    } else {
        dt
    }
}

/// Simulates both scenarios and evaluates the distances at every snapshot.
pub fn compare(supply: &Scenario, demand: &Scenario, cost: &CostMatrix) -> Result<PairRun, ExperimentError> {
    let (s, d) = rayon::join(|| simulate(supply), || simulate(demand));
    let (s, d) = (s?, d?);
    let dx = supply.grid().dx();
    let opts = DistanceOptions { normalized: true, renormalize: false };
    let points = s
        .snapshots
        .par_iter()
        .zip(&d.snapshots)
        .map(|(a, b)| {
            Ok(SeriesPoint {
                t: a.time(),
                h_hat: wasserstein_cells(a.rho(), b.rho(), cost, dx, opts)?,
                l1_hat: l1_cells(a.rho(), b.rho(), dx)?,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(PairRun { grid: supply.grid().clone(), points, supply: s, demand: d })
}

/// Two initial data of equal mass with disjoint supports: the first half of
/// every rightward road (supply) or leftward road (demand) at `level`.
pub fn split_initial_data(grid: &CellGrid, layout: &ManhattanLayout, level: f64) -> (Vec<f64>, Vec<f64>) {
    let net = grid.network();
    let mut s = vec![0.0; grid.total_cells()];
    let mut d = vec![0.0; grid.total_cells()];
    for (e, edge) in net.edges().iter().enumerate() {
        let target = match layout.direction(edge.id) {
            RoadDirection::Rightward => &mut s,
            RoadDirection::Leftward => &mut d,
            _ => continue,
        };
        let half = grid.cells_on(e) / 2;
        for j in 1..=half {
            target[grid.global_index(e, j)] = level;
        }
    }
    (s, d)
}

/// `level` on every cell of every rightward road, 0 elsewhere.
pub fn rightward_data(grid: &CellGrid, layout: &ManhattanLayout, level: f64) -> Vec<f64> {
    let net = grid.network();
    let mut rho = vec![0.0; grid.total_cells()];
    for (e, edge) in net.edges().iter().enumerate() {
        if layout.direction(edge.id) == RoadDirection::Rightward {
            rho[grid.edge_cells(e)].fill(level);
        }
    }
    rho
}

/// Rows `1/n_out + sign * (+eps, -eps, +eps, -eps)` truncated to `n_out`
/// columns and rescaled to sum to 1.
fn perturbed_row(n_out: usize, eps: f64, sign: f64) -> Vec<f64> {
    let base = 1.0 / n_out as f64;
    let row: Vec<f64> =
        (0..n_out).map(|c| base + if c % 2 == 0 { sign * eps } else { -sign * eps }).collect();
    let sum: f64 = row.iter().sum();
    row.into_iter().map(|a| a / sum).collect()
}

/// Perturbs the distribution at the central junction for every incoming road.
pub fn perturb_center(net: &MetricNetwork, layout: &ManhattanLayout, eps: f64) -> Result<MetricNetwork, ExperimentError> {
    let center = layout
        .center_vertex()
        .ok_or_else(|| ExperimentError::Config("even network size has no central junction".into()))?;
    let mut out = net.clone();
    let j = net.junction(net.vertex_index(center).expect("center exists"));
    out.set_distribution(center, &vec![perturbed_row(j.n_out(), eps, 1.0); j.n_inc()])?;
    Ok(out)
}

/// Perturbs every junction: the pattern starts with `+eps` at odd labels
/// (vertex id + 1) and with `-eps` at even ones. Junctions with fewer than
/// four incoming roads only perturb their first two incoming roads.
pub fn perturb_all(net: &MetricNetwork, eps: f64) -> Result<MetricNetwork, ExperimentError> {
    let mut out = net.clone();
    for (v, j) in net.junctions().iter().enumerate() {
        let id = net.vertex_id(v);
        let sign = if (id + 1) % 2 == 1 { 1.0 } else { -1.0 };
        let perturbed = perturbed_row(j.n_out(), eps, sign);
        let uniform = vec![1.0 / j.n_out() as f64; j.n_out()];
        let rows: Vec<Vec<f64>> = (0..j.n_inc())
            .map(|r| if j.n_inc() >= 4 || r < 2 { perturbed.clone() } else { uniform.clone() })
            .collect();
        out.set_distribution(id, &rows)?;
    }
    Ok(out)
}

fn with_final(times: &[f64], t_final: f64) -> Vec<f64> {
    let mut out = times.to_vec();
    if out.last() != Some(&t_final) {
        out.push(t_final);
    }
    out
}

pub(crate) fn run_kind(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let setup = Setup::new(cfg);
    let ells = cfg.ell.clone().unwrap();
    match cfg.kind {
        ExperimentKind::InitialData => per_size(&ells, |ell| initial_data(&setup, ell)).map(Outcome::Series),
        ExperimentKind::FundamentalDiagram => {
            let studies: Result<Vec<_>, _> = ells.par_iter().map(|&ell| diagram_study(&setup, ell)).collect();
            studies.map(Outcome::Diagram)
        }
        ExperimentKind::JunctionSingle | ExperimentKind::JunctionAll | ExperimentKind::RoadClosure => {
            per_size(&ells, |ell| perturbed_network(&setup, ell)).map(Outcome::Series)
        }
        ExperimentKind::ConvergenceGrid => grid_convergence(&setup, ells[0]),
        ExperimentKind::Convergence1d => line_convergence(cfg).map(Outcome::Line),
    }
}

fn per_size(
    ells: &[usize],
    job: impl Fn(usize) -> Result<PairRun, ExperimentError> + Sync,
) -> Result<Vec<(usize, PairRun)>, ExperimentError> {
    ells.par_iter().map(|&ell| Ok((ell, job(ell)?))).collect()
}

fn initial_data(setup: &Setup, ell: usize) -> Result<PairRun, ExperimentError> {
    let (layout, _, grid) = setup.network(ell)?;
    log::info!("initial data, ell = {ell}: {} cells", grid.total_cells());
    let (rho_s, rho_d) = split_initial_data(&grid, &layout, setup.cfg.rho0.unwrap());
    let fd = setup.supply_fd;
    let dt = setup.dt(&[fd], grid.dx())?;
    let cost = grid_cost_matrix(&grid)?;
    let supply = setup.scenario(grid.clone(), fd, rho_s, dt, &setup.times)?;
    let demand = setup.scenario(grid, fd, rho_d, dt, &setup.times)?;
    compare(&supply, &demand, &cost)
}

fn perturbed_network(setup: &Setup, ell: usize) -> Result<PairRun, ExperimentError> {
    let cfg = setup.cfg;
    let (layout, net, grid) = setup.network(ell)?;
    log::info!("{}, ell = {ell}: {} cells", cfg.kind.name(), grid.total_cells());
    let rho0 = vec![cfg.rho0.unwrap(); grid.total_cells()];
    let fd = setup.supply_fd;
    let dt = setup.dt(&[fd], grid.dx())?;
    let cost = grid_cost_matrix(&grid)?;
    let supply = setup.scenario(grid.clone(), fd, rho0.clone(), dt, &setup.times)?;
    let eps = cfg.eps.unwrap();
    let demand = match cfg.kind {
        ExperimentKind::JunctionSingle => {
            let g = CellGrid::new(Arc::new(perturb_center(&net, &layout, eps)?), grid.dx())?;
            setup.scenario(g, fd, rho0, dt, &setup.times)?
        }
        ExperimentKind::JunctionAll => {
            let g = CellGrid::new(Arc::new(perturb_all(&net, eps)?), grid.dx())?;
            setup.scenario(g, fd, rho0, dt, &setup.times)?
        }
        _ => Scenario::builder(grid, fd)
            .initial_totals(rho0)
            .closures(vec![layout.central_rightward()])
            .dt(dt)
            .t_final(setup.t_final)
            .snapshot_times(setup.times.clone())
            .build()?,
    };
    compare(&supply, &demand, &cost)
}

fn diagram_study(setup: &Setup, ell: usize) -> Result<DiagramStudy, ExperimentError> {
    let cfg = setup.cfg;
    let (layout, _, grid) = setup.network(ell)?;
    log::info!("fundamental diagram, ell = {ell}: {} cells", grid.total_cells());
    let rho0 = rightward_data(&grid, &layout, cfg.rho0.unwrap());
    let cost = grid_cost_matrix(&grid)?;
    let fd_s = setup.supply_fd;
    let pair = |fd_d: FundamentalDiagram, times: &[f64]| -> Result<PairRun, ExperimentError> {
        let dt = setup.dt(&[fd_s, fd_d], grid.dx())?;
        let supply = setup.scenario(grid.clone(), fd_s, rho0.clone(), dt, times)?;
        let demand = setup.scenario(grid.clone(), fd_d, rho0.clone(), dt, times)?;
        compare(&supply, &demand, &cost)
    };
    let at_end = [setup.t_final];
    let sweep = |values: &[f64], make: &(dyn Fn(f64) -> FundamentalDiagram + Sync)| {
        values
            .par_iter()
            .map(|&value| Ok(SweepPoint { value, h_hat: pair(make(value), &at_end)?.final_h_hat() }))
            .collect::<Result<Vec<_>, ExperimentError>>()
    };
    let sigma = sweep(cfg.sigma_sweep.as_deref().unwrap(), &|s| FundamentalDiagram { sigma: s, f_max: fd_s.f_max })?;
    let f_max = sweep(cfg.fmax_sweep.as_deref().unwrap(), &|f| FundamentalDiagram { sigma: fd_s.sigma, f_max: f })?;
    let run = pair(cfg.demand.unwrap(), &setup.times)?;
    Ok(DiagramStudy { ell, sigma, f_max, run })
}

fn grid_convergence(setup: &Setup, ell: usize) -> Result<Outcome, ExperimentError> {
    let cfg = setup.cfg;
    let times = with_final(&setup.times, setup.t_final);
    let rows = cfg
        .cells_sweep
        .as_deref()
        .unwrap()
        .par_iter()
        .map(|&cells| {
            let (layout, _, grid) = setup.network_with(ell, cells)?;
            log::info!("grid convergence, ell = {ell}, {cells} cells per edge");
            let (rho_s, rho_d) = split_initial_data(&grid, &layout, cfg.rho0.unwrap());
            let fd = setup.supply_fd;
            let dt = setup.dt(&[fd], grid.dx())?;
            let cost = grid_cost_matrix(&grid)?;
            let supply = setup.scenario(grid.clone(), fd, rho_s, dt, &times)?;
            let demand = setup.scenario(grid.clone(), fd, rho_d, dt, &times)?;
            let run = compare(&supply, &demand, &cost)?;
            Ok(GridConvergenceRow { cells_per_edge: cells, dx: grid.dx(), h_hat: run.final_h_hat(), run })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Outcome::Grid { ell, rows })
}

/// Quartic versus constant density on a single road `[-2, 2]`: graph
/// transport cost against the exact line distance.
fn line_convergence(cfg: &ExperimentConfig) -> Result<Vec<LineConvergenceRow>, ExperimentError> {
    let s = LineDensity::from_fn(-2.0, 2.0, quartic)?;
    let d = LineDensity::from_fn(-2.0, 2.0, |_| FLAT_LEVEL)?;
    let w = w1_line(&s, &d, 1_000_000)?;
    let mass = quartic_primitive(2.0) - quartic_primitive(-2.0);
    cfg.dx_sweep
        .as_deref()
        .unwrap()
        .par_iter()
        .map(|&dx| {
            let h = line_transport_cost(dx)?;
            Ok(LineConvergenceRow { dx, h, w, error: (h - w).abs(), bound: mass * dx })
        })
        .collect()
}

/// Transport cost between cell averages of the quartic and the constant
/// density on a single road of length 4.
pub fn line_transport_cost(dx: f64) -> Result<f64, ExperimentError> {
    let spec = NetworkSpec {
        vertices: vec![0, 1],
        edges: vec![EdgeSpec { id: 0, tail: 0, head: 1, length: 4.0 }],
        distribution: Default::default(),
    };
    let net = Arc::new(crate::network::build_network(&spec)?);
    let grid = discretize(&net, dx)?;
    let n = grid.total_cells();
    let rho_s: Vec<f64> = (0..n)
        .map(|j| {
            let a = -2.0 + j as f64 * dx;
            (quartic_primitive(a + dx) - quartic_primitive(a)) / dx
        })
        .collect();
    let rho_d = vec![FLAT_LEVEL; n];
    let cost = grid_cost_matrix(&grid)?;
    Ok(wasserstein_cells(&rho_s, &rho_d, &cost, dx, DistanceOptions { normalized: false, renormalize: false })?)
}
