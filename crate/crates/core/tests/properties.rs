use std::sync::Arc;

use proptest::prelude::*;

use lwrnet::lwr::{simulate_with, FundamentalDiagram, Scenario};
use lwrnet::metric::grid_cost_matrix;
use lwrnet::network::{discretize, manhattan, CellGrid};
use lwrnet::transport::{solve_transport, wasserstein_cells, DistanceOptions, MassVector};

fn grid(ell: usize) -> CellGrid {
    discretize(&Arc::new(manhattan(ell, 1.0).unwrap()), 0.1).unwrap()
}

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n)
}

fn rescaled(v: Vec<f64>, total: f64) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x * total / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_cost_scales_with_mass(a in field(80), b in field(80), lambda in 0.01..50.0f64) {
        let g = grid(2);
        let cost = grid_cost_matrix(&g).unwrap();
        prop_assume!(a.iter().sum::<f64>() > 1.0 && b.iter().sum::<f64>() > 1.0);
        let b = rescaled(b, a.iter().sum());
        let s = MassVector::from_density(&a, 0.1).unwrap();
        let d = MassVector::from_density(&b, 0.1).unwrap();
        let base = solve_transport(&cost, &s, &d).unwrap().objective();
        let scaled = solve_transport(&cost, &s.scaled(lambda), &d.scaled(lambda)).unwrap().objective();
        prop_assert!((scaled - lambda * base).abs() <= 1e-12 * (lambda * base).max(1e-300) + 1e-12);
    }

    #[test]
    fn normalized_distance_is_a_metric(a in field(80), b in field(80), c in field(80)) {
        let g = grid(2);
        let cost = grid_cost_matrix(&g).unwrap();
        prop_assume!([&a, &b, &c].iter().all(|v| v.iter().sum::<f64>() > 1.0));
        let m: f64 = a.iter().sum();
        let (b, c) = (rescaled(b, m), rescaled(c, m));
        let opts = DistanceOptions { normalized: true, renormalize: false };
        let h = |x: &[f64], y: &[f64]| wasserstein_cells(x, y, &cost, 0.1, opts).unwrap();
        prop_assert!(h(&a, &a).abs() <= 1e-9);
        prop_assert!((h(&a, &b) - h(&b, &a)).abs() <= 1e-9);
        prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c) + 1e-9);
        prop_assert!(h(&a, &b) <= cost.max() + 1e-9);
    }

    #[test]
    fn solver_conserves_mass_and_stays_admissible(rho in field(80), steps in 1usize..400) {
        let g = grid(2);
        let fd = FundamentalDiagram::new(0.3, 0.25).unwrap();
        let sc = Scenario::builder(g.clone(), fd).initial_totals(rho.clone()).t_final(0.0).build().unwrap();
        let dt = sc.dt();
        let sc = Scenario::builder(g.clone(), fd).initial_totals(rho.clone()).t_final(steps as f64 * dt).build().unwrap();
        let m0 = rho.iter().sum::<f64>() * 0.1;
        let mut worst_mass = 0.0f64;
        let mut worst_coupling = 0.0f64;
        let mut in_range = true;
        simulate_with(&sc, |f| {
            worst_mass = worst_mass.max((f.mass(0.1) - m0).abs());
            worst_coupling = worst_coupling.max(f.coupling_defect(&g));
            in_range &= f.rho().iter().all(|&r| (-1e-12..=1.0 + 1e-12).contains(&r));
        })
        .unwrap();
        prop_assert!(worst_mass <= 1e-12 * m0.max(1.0));
        prop_assert!(worst_coupling <= 1e-12);
        prop_assert!(in_range);
    }

    #[test]
    fn uniform_state_is_stationary(level in 0.0..1.0f64, ell in 2usize..5) {
        let g = grid(ell);
        let fd = FundamentalDiagram::new(0.3, 0.25).unwrap();
        let sc = Scenario::builder(g.clone(), fd).initial_totals(vec![level; g.total_cells()]).t_final(5.0).build().unwrap();
        let mut dev = 0.0f64;
        simulate_with(&sc, |f| dev = f.rho().iter().fold(dev, |m, r| m.max((r - level).abs()))).unwrap();
        prop_assert!(dev <= 1e-12);
    }
}
