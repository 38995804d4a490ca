//! Exact optimal transport between cell masses on a network.

mod simplex;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::lwr::DensityField;
use crate::metric::CostMatrix;

use simplex::{Outcome, Simplex};

/// Relative tolerance on the balance of supply and demand.
pub const BALANCE_TOL: f64 = 1e-9;

/// Densities this far below zero are treated as round-off and clamped.
const NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("mass {value} at index {index} is negative or not finite")]
    BadMass { index: usize, value: f64 },
    #[error("total supply {supply} differs from total demand {demand}")]
    MassMismatch { supply: f64, demand: f64 },
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("transport problem with {arcs} arcs exceeds the cap of {cap}")]
    TooLarge { arcs: usize, cap: usize },
    #[error("no optimum after {0} pivots")]
    NotConverged(usize),
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Nonnegative masses, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self, TransportError> {
        if let Some((index, &value)) = masses.iter().enumerate().find(|(_, m)| !m.is_finite() || **m < 0.0) {
            return Err(TransportError::BadMass { index, value });
        }
        Ok(Self(masses))
    }

    /// `m_j = rho_j * dx`. Tiny negative densities from round-off become 0.
    pub fn from_density(rho: &[f64], dx: f64) -> Result<Self, TransportError> {
        let masses = rho
            .iter()
            .enumerate()
            .map(|(index, &r)| match r {
                r if r >= 0.0 && r.is_finite() => Ok(r * dx),
                r if r >= -NEGATIVE_SLACK => Ok(0.0),
                value => Err(TransportError::BadMass { index, value }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self(masses))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|m| m * factor).collect())
    }
}

fn check_balance(s: &MassVector, d: &MassVector) -> Result<(f64, f64), TransportError> {
    if s.len() != d.len() {
        return Err(TransportError::LengthMismatch { what: "demand", expected: s.len(), found: d.len() });
    }
    let (ms, md) = (s.total(), d.total());
    if (ms - md).abs() > BALANCE_TOL * ms.max(md) {
        return Err(TransportError::MassMismatch { supply: ms, demand: md });
    }
    Ok((ms, md))
}

/// Removes the mass that stays in place: `min(s_j, d_j)` from both sides.
pub fn cancel_common_mass(s: &MassVector, d: &MassVector) -> Result<(MassVector, MassVector), TransportError> {
    check_balance(s, d)?;
    let (s2, d2) = s
        .0
        .iter()
        .zip(&d.0)
        .map(|(&a, &b)| {
            let common = a.min(b);
            (a - common, b - common)
        })
        .unzip();
    Ok((MassVector(s2), MassVector(d2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

/// Sparse optimal plan. `objective` is `sum c_jk x_jk`. Mass cancelled in
/// place is not listed (it costs nothing).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Vec<PlanEntry>,
    objective: f64,
    pivots: usize,
}

impl TransportPlan {
    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    pub fn shipped_from(&self, n: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n];
        for e in &self.entries {
            sums[e.source] += e.mass;
        }
        sums
    }

    pub fn shipped_to(&self, n: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n];
        for e in &self.entries {
            sums[e.sink] += e.mass;
        }
        sums
    }

    /// `j,k,x_jk` rows followed by a `# H=<objective>` trailer.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TransportError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "j,k,x_jk")?;
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.source, e.sink, e.mass)?;
        }
        writeln!(out, "# H={}", self.objective)?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Cancel common mass before solving. Does not change the optimum.
    pub cancel: bool,
    /// Upper bound on `supply nodes * demand nodes`.
    pub max_arcs: usize,
    /// Pivot budget; `None` scales with the problem size.
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { cancel: true, max_arcs: 25_000_000, max_pivots: None }
    }
}

pub fn solve_transport(cost: &CostMatrix, s: &MassVector, d: &MassVector) -> Result<TransportPlan, TransportError> {
    solve_transport_with(cost, s, d, &SolverOptions::default())
}

pub fn solve_transport_with(
    cost: &CostMatrix,
    s: &MassVector,
    d: &MassVector,
    options: &SolverOptions,
) -> Result<TransportPlan, TransportError> {
    if s.len() != cost.len() {
        return Err(TransportError::LengthMismatch { what: "supply", expected: cost.len(), found: s.len() });
    }
    let (total, _) = check_balance(s, d)?;
    let (s2, d2);
    let (sv, dv) = if options.cancel {
        (s2, d2) = cancel_common_mass(s, d)?;
        (&s2, &d2)
    } else {
        (s, d)
    };
    let sources: Vec<usize> = (0..sv.len()).filter(|&j| sv.0[j] > 0.0).collect();
    let sinks: Vec<usize> = (0..dv.len()).filter(|&k| dv.0[k] > 0.0).collect();
    let arcs = sources.len() * sinks.len();
    if arcs > options.max_arcs {
        return Err(TransportError::TooLarge { arcs, cap: options.max_arcs });
    }
    let supply: Vec<f64> = sources.iter().map(|&j| sv.0[j]).collect();
    let demand: Vec<f64> = sinks.iter().map(|&k| dv.0[k]).collect();
    let arc_cost = |i: usize, k: usize| cost.get(sources[i], sinks[k]);
    let max_cost = sources.iter().flat_map(|&j| sinks.iter().map(move |&k| cost.get(j, k))).fold(0.0, f64::max);

    let mut sim = Simplex::new(&arc_cost, &supply, &demand, max_cost);
    let budget = options.max_pivots.unwrap_or(100_000 + 4_000 * (sources.len() + sinks.len()));
    match sim.run(budget) {
        Outcome::Optimal => {}
        Outcome::PivotLimit => return Err(TransportError::NotConverged(sim.pivots)),
        Outcome::Unbounded => return Err(TransportError::Infeasible("unbounded pivot".into())),
    }
    let tol = BALANCE_TOL * total.max(f64::MIN_POSITIVE);
    let stuck = sim.artificial_flow();
    if stuck > tol {
        return Err(TransportError::Infeasible(format!("{stuck} units left on artificial arcs")));
    }
    let mut entries: Vec<PlanEntry> = sim
        .real_flows()
        .map(|(i, k, mass)| PlanEntry { source: sources[i], sink: sinks[k], mass })
        .collect();
    entries.sort_by_key(|e| (e.source, e.sink));
    let objective = entries.iter().fold(0.0, |acc, e| acc + cost.get(e.source, e.sink) * e.mass);
    let plan = TransportPlan { entries, objective, pivots: sim.pivots };
    verify_plan(&plan, sv, dv, tol)?;
    Ok(plan)
}

/// Row and column sums must reproduce the masses, every entry must be
/// nonnegative and no larger than what its endpoints hold.
fn verify_plan(plan: &TransportPlan, s: &MassVector, d: &MassVector, tol: f64) -> Result<(), TransportError> {
    let n = s.len();
    for (j, (got, want)) in plan.shipped_from(n).iter().zip(&s.0).enumerate() {
        if (got - want).abs() > tol {
            return Err(TransportError::Infeasible(format!("row {j} ships {got}, holds {want}")));
        }
    }
    for (k, (got, want)) in plan.shipped_to(n).iter().zip(&d.0).enumerate() {
        if (got - want).abs() > tol {
            return Err(TransportError::Infeasible(format!("column {k} receives {got}, needs {want}")));
        }
    }
    for e in &plan.entries {
        if e.mass < 0.0 || e.mass > s.0[e.source].min(d.0[e.sink]) + tol {
            return Err(TransportError::Infeasible(format!("entry {e:?} out of bounds")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DistanceOptions {
    /// Divide by the total mass.
    pub normalized: bool,
    /// Scale the second field to the mass of the first instead of failing on
    /// a mismatch.
    pub renormalize: bool,
}

/// Transport distance between two density fields on the same grid: `H`, or
/// `H / M` when normalized.
pub fn wasserstein_grid(
    rho_s: &DensityField,
    rho_d: &DensityField,
    cost: &CostMatrix,
    dx: f64,
    options: DistanceOptions,
) -> Result<f64, TransportError> {
    wasserstein_cells(rho_s.rho(), rho_d.rho(), cost, dx, options)
}

/// As [`wasserstein_grid`], on plain density slices.
pub fn wasserstein_cells(
    rho_s: &[f64],
    rho_d: &[f64],
    cost: &CostMatrix,
    dx: f64,
    options: DistanceOptions,
) -> Result<f64, TransportError> {
    if rho_s.len() != cost.len() || rho_d.len() != cost.len() {
        return Err(TransportError::LengthMismatch {
            what: "density field",
            expected: cost.len(),
            found: if rho_s.len() != cost.len() { rho_s.len() } else { rho_d.len() },
        });
    }
    let s = MassVector::from_density(rho_s, dx)?;
    let mut d = MassVector::from_density(rho_d, dx)?;
    let (ms, md) = (s.total(), d.total());
    if ms == 0.0 && md == 0.0 {
        log::warn!("both fields carry no mass; distance taken as 0");
        return Ok(0.0);
    }
    if options.renormalize && md > 0.0 {
        d = d.scaled(ms / md);
    }
    let plan = solve_transport(cost, &s, &d)?;
    Ok(if options.normalized { plan.objective() / ms } else { plan.objective() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_cost(n: usize) -> CostMatrix {
        let data = (0..n * n).map(|a| ((a / n) as f64 - (a % n) as f64).abs()).collect();
        CostMatrix::from_dense(n, data).unwrap()
    }

    fn mv(v: &[f64]) -> MassVector {
        MassVector::new(v.to_vec()).unwrap()
    }

    /// Exhaustive search over integer plans with branch-and-bound on the
    /// (nonnegative) cost.
    fn brute_force(cost: &[Vec<f64>], s: &[u32], d: &[u32]) -> f64 {
        fn go(cell: usize, cost: &[Vec<f64>], rows: &mut [u32], cols: &mut [u32], acc: f64, best: &mut f64) {
            if acc >= *best {
                return;
            }
            let nd = cols.len();
            if cell == rows.len() * nd {
                *best = acc;
                return;
            }
            let (i, k) = (cell / nd, cell % nd);
            let (lo, hi) = if k == nd - 1 { (rows[i], rows[i]) } else { (0, rows[i].min(cols[k])) };
            if lo > cols[k] {
                return;
            }
            for x in lo..=hi {
                rows[i] -= x;
                cols[k] -= x;
                go(cell + 1, cost, rows, cols, acc + cost[i][k] * x as f64, best);
                rows[i] += x;
                cols[k] += x;
            }
        }
        let mut best = f64::INFINITY;
        go(0, cost, &mut s.to_vec(), &mut d.to_vec(), 0.0, &mut best);
        best
    }

    #[test]
    fn cancellation_examples() {
        let (a, b) = cancel_common_mass(&mv(&[2.0, 0.0]), &mv(&[1.0, 1.0])).unwrap();
        assert_eq!(a.as_slice(), [1.0, 0.0]);
        assert_eq!(b.as_slice(), [0.0, 1.0]);
        let (a, b) = cancel_common_mass(&mv(&[0.3, 0.7]), &mv(&[0.3, 0.7])).unwrap();
        assert!(a.as_slice().iter().chain(b.as_slice()).all(|&m| m == 0.0));
        assert!(matches!(cancel_common_mass(&mv(&[1.0]), &mv(&[2.0])), Err(TransportError::MassMismatch { .. })));
    }

    #[test]
    fn point_to_point() {
        let c = line_cost(5);
        let plan = solve_transport(&c, &mv(&[0.0, 2.5, 0.0, 0.0, 0.0]), &mv(&[0.0, 0.0, 0.0, 0.0, 2.5])).unwrap();
        assert_eq!(plan.entries(), [PlanEntry { source: 1, sink: 4, mass: 2.5 }]);
        assert_eq!(plan.objective(), 7.5);
    }

    #[test]
    fn identical_masses_cost_nothing() {
        let c = line_cost(4);
        let m = mv(&[0.1, 0.2, 0.3, 0.4]);
        let plan = solve_transport(&c, &m, &m).unwrap();
        assert!(plan.entries().is_empty());
        assert_eq!(plan.objective(), 0.0);
    }

    #[test]
    fn matches_brute_force_on_small_integer_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let ns = rng.gen_range(1..=5);
            let nd = rng.gen_range(1..=5);
            let s: Vec<u32> = (0..ns).map(|_| rng.gen_range(1..=5)).collect();
            let mut d = vec![0u32; nd];
            let mut left: u32 = s.iter().sum();
            // spread the total over the sinks without exceeding 5 per sink when possible
            while left > 0 {
                let k = rng.gen_range(0..nd);
                if d[k] < 5 || d.iter().all(|&x| x >= 5) {
                    d[k] += 1;
                    left -= 1;
                }
            }
            let small: Vec<Vec<f64>> = (0..ns).map(|_| (0..nd).map(|_| rng.gen_range(0..=9) as f64).collect()).collect();
            let n = ns + nd;
            let mut dense = vec![0.0; n * n];
            for i in 0..ns {
                for k in 0..nd {
                    dense[i * n + ns + k] = small[i][k];
                    dense[(ns + k) * n + i] = small[i][k];
                }
            }
            let cost = CostMatrix::from_dense(n, dense).unwrap();
            let mut sv = vec![0.0; n];
            let mut dv = vec![0.0; n];
            for i in 0..ns {
                sv[i] = s[i] as f64;
            }
            for k in 0..nd {
                dv[ns + k] = d[k] as f64;
            }
            let plan = solve_transport(&cost, &mv(&sv), &mv(&dv)).unwrap();
            assert_eq!(plan.objective(), brute_force(&small, &s, &d), "s={s:?} d={d:?} c={small:?}");
        }
    }

    #[test]
    fn cancellation_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(2..=8);
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let dense = (0..n * n)
                .map(|a| {
                    let (p, q) = (pts[a / n], pts[a % n]);
                    (p.0 - q.0).abs() + (p.1 - q.1).abs()
                })
                .collect();
            let cost = CostMatrix::from_dense(n, dense).unwrap();
            let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let scale = s.iter().sum::<f64>() / d.iter().sum::<f64>();
            d.iter_mut().for_each(|x| *x *= scale);
            let with = solve_transport(&cost, &mv(&s), &mv(&d)).unwrap().objective();
            let raw = SolverOptions { cancel: false, ..Default::default() };
            let without = solve_transport_with(&cost, &mv(&s), &mv(&d), &raw).unwrap().objective();
            assert!((with - without).abs() <= 1e-9, "{with} vs {without}");
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // On a path the optimum is sum |cumulative difference| * spacing.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 7, 30, 120] {
            let c = line_cost(n);
            let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let scale = s.iter().sum::<f64>() / d.iter().sum::<f64>();
            d.iter_mut().for_each(|x| *x *= scale);
            let mut run = 0.0;
            let mut expected = 0.0;
            for j in 0..n {
                run += s[j] - d[j];
                expected += f64::abs(run);
            }
            let got = solve_transport(&c, &mv(&s), &mv(&d)).unwrap().objective();
            assert!((got - expected).abs() <= 1e-9 * expected.max(1.0), "n={n}: {got} vs {expected}");
        }
    }

    #[test]
    fn guards() {
        let c = line_cost(3);
        assert!(matches!(MassVector::new(vec![-1.0]), Err(TransportError::BadMass { .. })));
        assert!(matches!(
            solve_transport(&c, &mv(&[1.0, 0.0]), &mv(&[0.0, 1.0])),
            Err(TransportError::LengthMismatch { .. })
        ));
        let tight = SolverOptions { max_arcs: 1, ..Default::default() };
        assert!(matches!(
            solve_transport_with(&c, &mv(&[1.0, 1.0, 0.0]), &mv(&[0.0, 0.0, 2.0]), &tight),
            Err(TransportError::TooLarge { arcs: 2, cap: 1 })
        ));
        assert_eq!(MassVector::from_density(&[-1e-15, 0.5], 0.1).unwrap().as_slice(), [0.0, 0.05]);
        assert!(MassVector::from_density(&[-0.1], 0.1).is_err());
    }

    #[test]
    fn distances_on_slices() {
        let c = line_cost(4);
        let dx = 0.25;
        let opts = DistanceOptions { normalized: true, renormalize: false };
        let a = [0.0, 1.0, 0.0, 0.0];
        let b = [0.0, 0.0, 1.0, 0.0];
        let dist = |a: &[f64], b: &[f64], o| wasserstein_cells(a, b, &c, dx, o).unwrap();
        assert_eq!(dist(&a, &a, opts), 0.0);
        assert_eq!(dist(&a, &b, opts), 1.0);
        assert_eq!(dist(&a, &b, DistanceOptions::default()), 0.25);
        assert_eq!(dist(&[0.0; 4], &[0.0; 4], opts), 0.0);
        let heavy = [0.0, 0.0, 2.0, 0.0];
        assert!(matches!(wasserstein_cells(&a, &heavy, &c, dx, opts), Err(TransportError::MassMismatch { .. })));
        assert_eq!(dist(&a, &heavy, DistanceOptions { normalized: true, renormalize: true }), 1.0);
    }

    #[test]
    fn plan_dump() {
        let c = line_cost(3);
        let plan = solve_transport(&c, &mv(&[1.0, 0.0, 0.0]), &mv(&[0.0, 0.0, 1.0])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.csv");
        plan.write(&path).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "j,k,x_jk\n0,2,1\n# H=2\n");
    }
}
