use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use lwrnet::experiments::{
    rightward_data, run_experiment, split_initial_data, ExperimentConfig, ExperimentError, ExperimentKind,
};
use lwrnet::lwr::{read_snapshot, simulate, snapshot_file_name, write_snapshot, FundamentalDiagram, LwrError, Scenario};
use lwrnet::metric::{grid_cost_matrix, MetricError};
use lwrnet::network::{discretize, manhattan, ManhattanLayout, MetricNetwork, NetworkError};
use lwrnet::reference::{l1_cells, ReferenceError};
use lwrnet::transport::{wasserstein_cells, DistanceOptions, TransportError};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  usage error (unknown flag, missing argument)
  3  I/O error (unreadable or unwritable file, malformed snapshot)
  4  validation error (bad network, config or parameters)
  5  numerical failure (CFL violation, solver did not converge, size guard)";

#[derive(Parser)]
#[command(name = "lwrnet", version, about = "Traffic simulation on road networks and transport distances between densities", after_help = EXIT_CODES)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Manhattan grid network file.
    GenerateNetwork(GenerateArgs),
    /// Run one scenario and write density snapshots.
    Simulate(SimulateArgs),
    /// Normalized transport distance between two snapshot files.
    Distance(DistanceArgs),
    /// Run one of the sensitivity or convergence studies.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Junctions per side.
    #[arg(long)]
    ell: usize,
    #[arg(long, default_value_t = 1.0)]
    edge_length: f64,
    /// Output network file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Preset {
    /// First half of every rightward road at the given level.
    SplitRightward,
    /// First half of every leftward road at the given level.
    SplitLeftward,
    /// Every rightward road at the given level.
    Rightward,
    /// Every cell at the given level.
    Uniform,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    dx: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(long, default_value_t = 0.25)]
    fmax: f64,
    /// Initial densities from a snapshot file.
    #[arg(long, conflicts_with = "preset")]
    initial: Option<PathBuf>,
    /// Built-in initial data (Manhattan networks only, except `uniform`).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Density level used by the preset.
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    /// Close the edge with this id to incoming traffic right after t = 0.
    #[arg(long = "close")]
    closures: Vec<u32>,
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = lwrnet::lwr::DEFAULT_SAFETY)]
    dt_safety: f64,
    /// Snapshot times, comma separated (default: 0 and T).
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistanceArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    dx: f64,
    /// Print the unnormalized cost instead of dividing by the mass.
    #[arg(long)]
    raw: bool,
    /// Scale the second field to the mass of the first.
    #[arg(long)]
    renormalize: bool,
    /// Also print the normalized L1 distance.
    #[arg(long)]
    l1: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config file (JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// initial_data, fundamental_diagram, junction_single, junction_all,
    /// road_closure, convergence_1d or convergence_grid.
    #[arg(long)]
    kind: Option<String>,
    /// Network sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    ell: Vec<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma_d: Option<f64>,
    #[arg(long)]
    fmax_d: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    dt_safety: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Also write density snapshots at every sample time.
    #[arg(long)]
    snapshots: bool,
    #[arg(long)]
    no_charts: bool,
    /// Output directory (default: <output root>/<kind>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root directory for runs without --out.
    #[arg(long, env = "LWRNET_OUT_ROOT", default_value = "runs")]
    out_root: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

const IO: u8 = 3;
const VALIDATION: u8 = 4;
const NUMERICAL: u8 = 5;

fn network_code(e: &NetworkError) -> u8 {
    match e {
        NetworkError::Io(_) => IO,
        _ => VALIDATION,
    }
}

fn lwr_code(e: &LwrError) -> u8 {
    match e {
        LwrError::Io(_) | LwrError::Snapshot(_) => IO,
        LwrError::Network(n) => network_code(n),
        LwrError::CflViolation { .. } => NUMERICAL,
        _ => VALIDATION,
    }
}

fn metric_code(e: &MetricError) -> u8 {
    match e {
        MetricError::Io(_) => IO,
        _ => NUMERICAL,
    }
}

fn transport_code(e: &TransportError) -> u8 {
    match e {
        TransportError::Io(_) => IO,
        TransportError::TooLarge { .. } | TransportError::NotConverged(_) | TransportError::Infeasible(_) => NUMERICAL,
        _ => VALIDATION,
    }
}

fn experiment_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::Io(_) => IO,
        ExperimentError::Network(n) => network_code(n),
        ExperimentError::Lwr(l) => lwr_code(l),
        ExperimentError::Metric(m) => metric_code(m),
        ExperimentError::Transport(t) => transport_code(t),
        _ => VALIDATION,
    }
}

/// Exit status for the first recognized library error in the chain.
fn classify(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return experiment_code(e);
        }
        if let Some(e) = cause.downcast_ref::<LwrError>() {
            return lwr_code(e);
        }
        if let Some(e) = cause.downcast_ref::<NetworkError>() {
            return network_code(e);
        }
        if let Some(e) = cause.downcast_ref::<TransportError>() {
            return transport_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MetricError>() {
            return metric_code(e);
        }
        if cause.downcast_ref::<ReferenceError>().is_some() {
            return VALIDATION;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
    }
    VALIDATION
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::GenerateNetwork(a) => generate(a),
        Command::Simulate(a) => run_simulation(a),
        Command::Distance(a) => distance(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            let failure = Failure { code: classify(&error), error };
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let net = manhattan(args.ell, args.edge_length)?;
    net.write(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{}", args.out.display());
    Ok(())
}

fn load_grid(path: &Path, dx: f64) -> anyhow::Result<lwrnet::network::CellGrid> {
    let net = MetricNetwork::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(discretize(&Arc::new(net), dx)?)
}

fn run_simulation(args: SimulateArgs) -> anyhow::Result<()> {
    let grid = load_grid(&args.network, args.dx)?;
    let fd = FundamentalDiagram::new(args.sigma, args.fmax)?;
    let rho0 = match (&args.initial, args.preset) {
        (Some(path), _) => read_snapshot(path, &grid).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(Preset::Uniform)) => vec![args.level; grid.total_cells()],
        (None, Some(preset)) => {
            let Some(layout) = ManhattanLayout::detect(grid.network()) else {
                bail!(ExperimentError::Config("this preset needs a Manhattan network".into()));
            };
            match preset {
                Preset::SplitRightward => split_initial_data(&grid, &layout, args.level).0,
                Preset::SplitLeftward => split_initial_data(&grid, &layout, args.level).1,
                _ => rightward_data(&grid, &layout, args.level),
            }
        }
        (None, None) => bail!(ExperimentError::Config("give --initial or --preset".into())),
    };
    let times = if args.times.is_empty() { vec![0.0, args.t_final] } else { args.times.clone() };
    let scenario = Scenario::builder(grid.clone(), fd)
        .initial_totals(rho0)
        .closures(args.closures.clone())
        .dt_safety(args.dt_safety)
        .t_final(args.t_final)
        .snapshot_times(times)
        .build()?;
    let trajectory = simulate(&scenario)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut files = Vec::new();
    for snap in &trajectory.snapshots {
        let name = snapshot_file_name(snap.time());
        write_snapshot(args.out.join(&name), &grid, snap.rho())?;
        files.push(name);
    }
    let manifest = serde_json::json!({
        "tool": "lwrnet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "simulate",
        "network": args.network,
        "dx": args.dx,
        "diagram": fd,
        "initial": args.initial,
        "preset": args.preset.map(|p| format!("{p:?}")),
        "level": args.level,
        "closures": args.closures,
        "T": args.t_final,
        "dt": scenario.dt(),
        "requested_times": trajectory.requested,
        "outputs": files,
    });
    std::fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    for f in &files {
        println!("{}", args.out.join(f).display());
    }
    Ok(())
}

fn distance(args: DistanceArgs) -> anyhow::Result<()> {
    let grid = load_grid(&args.network, args.dx)?;
    let a = read_snapshot(&args.a, &grid).with_context(|| format!("reading {}", args.a.display()))?;
    let b = read_snapshot(&args.b, &grid).with_context(|| format!("reading {}", args.b.display()))?;
    let cost = grid_cost_matrix(&grid)?;
    let opts = DistanceOptions { normalized: !args.raw, renormalize: args.renormalize };
    let h = wasserstein_cells(&a, &b, &cost, grid.dx(), opts)?;
    if args.l1 {
        println!("{h} {}", l1_cells(&a, &b, grid.dx())?);
    } else {
        println!("{h}");
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::read(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let Some(kind) = &args.kind else {
                bail!(ExperimentError::Config("give --kind or --config".into()));
            };
            ExperimentConfig::new(parse_kind(kind)?)
        }
    };
    if let Some(kind) = &args.kind {
        cfg.kind = parse_kind(kind)?;
    }
    if !args.ell.is_empty() {
        cfg.ell = Some(args.ell.clone());
    }
    if args.eps.is_some() {
        cfg.eps = args.eps;
    }
    if args.sigma_d.is_some() || args.fmax_d.is_some() {
        let base = cfg.resolved().demand.expect("resolved");
        cfg.demand = Some(FundamentalDiagram {
            sigma: args.sigma_d.unwrap_or(base.sigma),
            f_max: args.fmax_d.unwrap_or(base.f_max),
        });
    }
    if args.t_final.is_some() {
        cfg.t_final = args.t_final;
        cfg.sample_times = None;
    }
    if args.dt_safety.is_some() {
        cfg.dt_safety = args.dt_safety;
    }
    if args.samples.is_some() {
        cfg.samples = args.samples;
        cfg.sample_times = None;
    }
    if args.snapshots {
        cfg.snapshots = Some(true);
    }
    if args.no_charts {
        cfg.charts = Some(false);
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| args.out_root.join(cfg.kind.name()));
    let report = run_experiment(&cfg, &out)?;
    for f in &report.files {
        println!("{}", report.directory.join(f).display());
    }
    Ok(())
}

fn parse_kind(name: &str) -> anyhow::Result<ExperimentKind> {
    ExperimentKind::parse(name).ok_or_else(|| {
        let known: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        ExperimentError::Config(format!("unknown kind `{name}`; expected one of {}", known.join(", "))).into()
    })
}
