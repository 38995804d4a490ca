//! Godunov scheme with the localized multi-path junction treatment.
//!
//! Interior cells (`j = 2..J_e-1`) use the standard conservative update.
//! The first and last cell of every edge belong to a junction: each carries
//! one sub-density per local path `(incoming, outgoing)` through the vertex,
//! advanced as a coupled system and summed back into the total density.

use std::sync::Arc;

use crate::network::{CellGrid, MetricNetwork};

use super::flux::{cfl_dt, interface_flux, FundamentalDiagram, DENSITY_TOL};
use super::state::{init_subdensities, DensityField, SubDensities};
use super::LwrError;

/// Default CFL safety factor.
pub const DEFAULT_SAFETY: f64 = 0.9;

/// Slack on the time-step check; `dt` may exceed the CFL bound by this
/// relative amount.
const CFL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FluxModel {
    Uniform(FundamentalDiagram),
    PerEdge(Vec<FundamentalDiagram>),
}

impl FluxModel {
    #[inline]
    pub fn on_edge(&self, edge: usize) -> &FundamentalDiagram {
        match self {
            FluxModel::Uniform(fd) => fd,
            FluxModel::PerEdge(fds) => &fds[edge],
        }
    }

    pub fn diagrams(&self) -> &[FundamentalDiagram] {
        match self {
            FluxModel::Uniform(fd) => std::slice::from_ref(fd),
            FluxModel::PerEdge(fds) => fds,
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.diagrams().iter().map(FundamentalDiagram::max_speed).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Total densities, split at junctions by [`init_subdensities`].
    Totals(Vec<f64>),
    /// A complete field including sub-densities.
    Field(DensityField),
}

/// A fully specified, validated simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    grid: CellGrid,
    dynamics: CellGrid,
    flux: FluxModel,
    initial: InitialState,
    closures: Vec<u32>,
    dt: f64,
    t_final: f64,
    snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    grid: CellGrid,
    flux: FluxModel,
    initial: InitialState,
    closures: Vec<u32>,
    dt: Option<f64>,
    safety: f64,
    t_final: f64,
    snapshot_times: Vec<f64>,
}

impl ScenarioBuilder {
    pub fn per_edge_diagrams(mut self, fds: Vec<FundamentalDiagram>) -> Self {
        self.flux = FluxModel::PerEdge(fds);
        self
    }

    pub fn initial_totals(mut self, rho0: Vec<f64>) -> Self {
        self.initial = InitialState::Totals(rho0);
        self
    }

    pub fn initial_field(mut self, field: DensityField) -> Self {
        self.initial = InitialState::Field(field);
        self
    }

    /// Edges closed to incoming traffic right after `t = 0`.
    pub fn closures(mut self, edges: Vec<u32>) -> Self {
        self.closures = edges;
        self
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    /// CFL safety factor used when no explicit `dt` is set.
    pub fn dt_safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    pub fn t_final(mut self, t: f64) -> Self {
        self.t_final = t;
        self
    }

    /// Requested output times; defaults to `[t_final]`.
    pub fn snapshot_times(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn build(self) -> Result<Scenario, LwrError> {
        let net = self.grid.network();
        for fd in self.flux.diagrams() {
            fd.validate()?;
        }
        if let FluxModel::PerEdge(fds) = &self.flux {
            if fds.len() != net.num_edges() {
                return Err(LwrError::LayoutMismatch(format!(
                    "{} diagrams for {} edges",
                    fds.len(),
                    net.num_edges()
                )));
            }
        }
        for (v, j) in net.junctions().iter().enumerate() {
            if j.n_inc() == 0 || j.n_out() == 0 {
                return Err(LwrError::SourceOrSink(net.vertex_id(v)));
            }
        }
        if let Some(e) = (0..net.num_edges()).find(|&e| self.grid.cells_on(e) < 2) {
            return Err(LwrError::ShortEdge(net.edge(e).id));
        }

        let limit = self.grid.dx() / self.flux.max_speed();
        let dt = match self.dt {
            Some(dt) => dt,
            None => self
                .flux
                .diagrams()
                .iter()
                .map(|fd| cfl_dt(fd, self.grid.dx(), self.safety))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min),
        };
        if !(dt > 0.0) || dt > limit * (1.0 + CFL_SLACK) {
            return Err(LwrError::TimeStep { dt, limit });
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(LwrError::FinalTime(self.t_final));
        }
        let mut snapshot_times = if self.snapshot_times.is_empty() { vec![self.t_final] } else { self.snapshot_times };
        if let Some(&t) = snapshot_times.iter().find(|&&t| !(0.0..=self.t_final).contains(&t)) {
            return Err(LwrError::SnapshotTime(t));
        }
        snapshot_times.sort_by(f64::total_cmp);

        let mut closed = self.grid.network().clone();
        for &e in &self.closures {
            closed.close_edge(e)?;
        }
        let dynamics = if self.closures.is_empty() {
            self.grid.clone()
        } else {
            CellGrid::new(Arc::new(closed), self.grid.dx())?
        };

        match &self.initial {
            InitialState::Totals(rho) => {
                if rho.len() != self.grid.total_cells() {
                    return Err(LwrError::LayoutMismatch(format!(
                        "{} densities for {} cells",
                        rho.len(),
                        self.grid.total_cells()
                    )));
                }
            }
            InitialState::Field(field) => field.check_layout(&dynamics)?,
        }

        Ok(Scenario {
            grid: self.grid,
            dynamics,
            flux: self.flux,
            initial: self.initial,
            closures: self.closures,
            dt,
            t_final: self.t_final,
            snapshot_times,
        })
    }
}

impl Scenario {
    pub fn builder(grid: CellGrid, fd: FundamentalDiagram) -> ScenarioBuilder {
        let cells = grid.total_cells();
        ScenarioBuilder {
            grid,
            flux: FluxModel::Uniform(fd),
            initial: InitialState::Totals(vec![0.0; cells]),
            closures: Vec::new(),
            dt: None,
            safety: DEFAULT_SAFETY,
            t_final: 0.0,
            snapshot_times: Vec::new(),
        }
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// The grid the scheme actually runs on: the input grid with closures
    /// applied to its distribution matrices.
    pub fn dynamics_grid(&self) -> &CellGrid {
        &self.dynamics
    }

    pub fn flux(&self) -> &FluxModel {
        &self.flux
    }

    pub fn closures(&self) -> &[u32] {
        &self.closures
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn snapshot_times(&self) -> &[f64] {
        &self.snapshot_times
    }

    /// Number of steps `N_T`; the last state sits at or before `t_final`.
    pub fn num_steps(&self) -> usize {
        step_index(self.t_final, self.dt)
    }

    /// The state at `t = 0`, with sub-densities split according to the
    /// (possibly closed) network.
    pub fn initial_field(&self) -> Result<DensityField, LwrError> {
        match &self.initial {
            InitialState::Totals(rho) => init_subdensities(rho.clone(), &self.dynamics),
            InitialState::Field(f) => Ok(f.clone()),
        }
    }
}

fn step_index(t: f64, dt: f64) -> usize {
    (t / dt + 1e-9).floor() as usize
}

#[inline]
fn share(mu: f64, rho: f64) -> f64 {
    if rho > 0.0 {
        mu / rho
    } else {
        0.0
    }
}

/// Reusable scratch space for repeated steps on one scenario.
struct Workspace {
    /// Flux from the last interior cell into the last cell, per edge.
    flux_into_last: Vec<f64>,
    /// Flux from the first cell into the second cell, per edge.
    flux_out_of_first: Vec<f64>,
    interface: Vec<f64>,
    path_flux: Vec<f64>,
}

impl Workspace {
    fn new(grid: &CellGrid) -> Self {
        let n = grid.network().num_edges();
        let longest = grid.cells_per_edge().iter().copied().max().unwrap_or(0);
        Self {
            flux_into_last: vec![0.0; n],
            flux_out_of_first: vec![0.0; n],
            interface: vec![0.0; longest],
            path_flux: Vec::new(),
        }
    }
}

fn advance(state: &DensityField, scenario: &Scenario, ws: &mut Workspace) -> Result<DensityField, LwrError> {
    let grid = &scenario.dynamics;
    let net: &MetricNetwork = grid.network();
    let lam = scenario.dt / grid.dx();
    let rho = &state.rho;
    let mut next = rho.clone();

    for e in 0..net.num_edges() {
        let fd = scenario.flux.on_edge(e);
        let cells = &rho[grid.edge_cells(e)];
        let n = cells.len();
        let g = &mut ws.interface[..n - 1];
        for k in 0..n - 1 {
            g[k] = fd.godunov(cells[k], cells[k + 1]);
        }
        let base = grid.first_cell(e);
        for k in 1..n - 1 {
            next[base + k] = cells[k] - lam * (g[k] - g[k - 1]);
        }
        ws.flux_out_of_first[e] = g[0];
        ws.flux_into_last[e] = g[n - 2];
    }

    let mut sub = Vec::with_capacity(state.sub.len());
    for (j, old) in net.junctions().iter().zip(&state.sub) {
        let (n_inc, n_out) = (j.n_inc(), j.n_out());
        ws.path_flux.clear();
        ws.path_flux.resize(n_inc * n_out, 0.0);
        let mut incoming = vec![0.0; n_inc * n_out];
        let mut outgoing = vec![0.0; n_inc * n_out];

        for (r, &e) in j.incoming.iter().enumerate() {
            let last = rho[grid.last_cell(e)];
            let inflow = ws.flux_into_last[e];
            let up = scenario.flux.on_edge(e);
            for (c, &e2) in j.outgoing.iter().enumerate() {
                let p = r * n_out + c;
                let g = interface_flux(up, scenario.flux.on_edge(e2), last, rho[grid.first_cell(e2)]);
                let mu = old.incoming[p];
                let phi = share(mu, last) * g;
                ws.path_flux[p] = phi;
                incoming[p] = mu - lam * (phi - j.alpha(r, c) * inflow);
            }
        }
        for (c, &e2) in j.outgoing.iter().enumerate() {
            let first = rho[grid.first_cell(e2)];
            let outflow = ws.flux_out_of_first[e2];
            for r in 0..n_inc {
                let p = r * n_out + c;
                let mu = old.outgoing[p];
                outgoing[p] = mu - lam * (share(mu, first) * outflow - ws.path_flux[p]);
            }
        }

        for (r, &e) in j.incoming.iter().enumerate() {
            next[grid.last_cell(e)] = incoming[r * n_out..(r + 1) * n_out].iter().sum();
        }
        for (c, &e2) in j.outgoing.iter().enumerate() {
            next[grid.first_cell(e2)] = (0..n_inc).map(|r| outgoing[r * n_out + c]).sum();
        }
        sub.push(SubDensities { incoming, outgoing });
    }

    let step = state.step + 1;
    if let Some((cell, &value)) =
        next.iter().enumerate().find(|(_, &r)| !(-DENSITY_TOL..=1.0 + DENSITY_TOL).contains(&r))
    {
        let at = grid.locate(cell);
        return Err(LwrError::CflViolation { edge: net.edge(at.edge).id, j: at.j, value, step });
    }
    Ok(DensityField { rho: next, sub, time: step as f64 * scenario.dt, step })
}

/// Advances `state` by one time step.
pub fn step(state: &DensityField, scenario: &Scenario) -> Result<DensityField, LwrError> {
    state.check_layout(&scenario.dynamics)?;
    advance(state, scenario, &mut Workspace::new(&scenario.dynamics))
}

/// Snapshots of one run, in increasing requested time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub requested: Vec<f64>,
    pub snapshots: Vec<DensityField>,
}

impl Trajectory {
    pub fn last(&self) -> &DensityField {
        self.snapshots.last().expect("trajectory is never empty")
    }
}

/// Runs the scenario from `t = 0` to `t_final`. Each requested time is
/// served by the latest step at or before it.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory, LwrError> {
    simulate_with(scenario, |_| {})
}

/// Like [`simulate`], also handing every computed state to `observe`.
pub fn simulate_with(
    scenario: &Scenario,
    mut observe: impl FnMut(&DensityField),
) -> Result<Trajectory, LwrError> {
    let mut state = scenario.initial_field()?;
    let mut ws = Workspace::new(&scenario.dynamics);
    let targets: Vec<usize> =
        scenario.snapshot_times.iter().map(|&t| step_index(t, scenario.dt).min(scenario.num_steps())).collect();
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut next_target = 0;
    observe(&state);
    loop {
        while next_target < targets.len() && targets[next_target] == state.step {
            snapshots.push(state.clone());
            next_target += 1;
        }
        if next_target == targets.len() {
            break;
        }
        state = advance(&state, scenario, &mut ws)?;
        observe(&state);
    }
    Ok(Trajectory { requested: scenario.snapshot_times.clone(), snapshots })
}

/// Returns a copy of `net` in which `edge` no longer accepts traffic at its
/// tail vertex. The edge keeps discharging through its head vertex.
pub fn apply_closure(net: &MetricNetwork, edge: u32) -> Result<MetricNetwork, LwrError> {
    let mut closed = net.clone();
    closed.close_edge(edge)?;
    Ok(closed)
}
