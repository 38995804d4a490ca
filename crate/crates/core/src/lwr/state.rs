use crate::network::CellGrid;

use super::flux::DENSITY_TOL;
use super::LwrError;

/// Sub-densities at the cells adjacent to one vertex.
///
/// Both vectors have `n_inc * n_out` entries indexed by the local path
/// `(r, c)` as `r * n_out + c`. `incoming[(r, c)]` lives on the last cell of
/// the `r`-th incoming edge, `outgoing[(r, c)]` on the first cell of the
/// `c`-th outgoing edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDensities {
    pub incoming: Vec<f64>,
    pub outgoing: Vec<f64>,
}

/// Cell-averaged density on a grid plus the per-path split at junction cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub(crate) rho: Vec<f64>,
    pub(crate) sub: Vec<SubDensities>,
    pub(crate) time: f64,
    pub(crate) step: usize,
}

impl DensityField {
    /// A field without junction sub-densities. Enough for distance
    /// computations; the solver needs [`init_subdensities`].
    pub fn from_totals(rho: Vec<f64>) -> Self {
        Self { rho, sub: Vec::new(), time: 0.0, step: 0 }
    }

    /// Assembles a field from explicit parts, checking the coupling
    /// `sum_p mu = rho` at every junction cell.
    pub fn from_parts(grid: &CellGrid, rho: Vec<f64>, sub: Vec<SubDensities>) -> Result<Self, LwrError> {
        let field = Self { rho, sub, time: 0.0, step: 0 };
        field.check_layout(grid)?;
        field.check_coupling(grid, 1e-12)?;
        Ok(field)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn sub(&self) -> &[SubDensities] {
        &self.sub
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Total mass `sum rho * dx`.
    pub fn mass(&self, dx: f64) -> f64 {
        self.rho.iter().sum::<f64>() * dx
    }

    pub(crate) fn check_layout(&self, grid: &CellGrid) -> Result<(), LwrError> {
        if self.rho.len() != grid.total_cells() {
            return Err(LwrError::LayoutMismatch(format!(
                "{} densities for {} cells",
                self.rho.len(),
                grid.total_cells()
            )));
        }
        let junctions = grid.network().junctions();
        if self.sub.len() != junctions.len() {
            return Err(LwrError::LayoutMismatch(format!(
                "sub-densities for {} vertices, network has {}",
                self.sub.len(),
                junctions.len()
            )));
        }
        for (s, j) in self.sub.iter().zip(junctions) {
            if s.incoming.len() != j.n_paths() || s.outgoing.len() != j.n_paths() {
                return Err(LwrError::LayoutMismatch("sub-density path count".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of `sum_p mu = rho` over all junction cells.
    pub fn coupling_defect(&self, grid: &CellGrid) -> f64 {
        let net = grid.network();
        let mut worst = 0.0f64;
        for (j, s) in net.junctions().iter().zip(&self.sub) {
            let n_out = j.n_out();
            for (r, &e) in j.incoming.iter().enumerate() {
                let sum: f64 = s.incoming[r * n_out..(r + 1) * n_out].iter().sum();
                worst = worst.max((sum - self.rho[grid.last_cell(e)]).abs());
            }
            for (c, &e) in j.outgoing.iter().enumerate() {
                let sum: f64 = (0..j.n_inc()).map(|r| s.outgoing[r * n_out + c]).sum();
                worst = worst.max((sum - self.rho[grid.first_cell(e)]).abs());
            }
        }
        worst
    }

    fn check_coupling(&self, grid: &CellGrid, tol: f64) -> Result<(), LwrError> {
        let defect = self.coupling_defect(grid);
        if defect > tol {
            return Err(LwrError::Coupling(defect));
        }
        if self.sub.iter().flat_map(|s| s.incoming.iter().chain(&s.outgoing)).any(|&m| m < -DENSITY_TOL) {
            return Err(LwrError::LayoutMismatch("negative sub-density".into()));
        }
        Ok(())
    }
}

/// Splits total densities into junction sub-densities: on the last cell of
/// an incoming edge by the distribution matrix, on the first cell of an
/// outgoing edge in equal parts over the incoming edges.
pub fn init_subdensities(rho0: Vec<f64>, grid: &CellGrid) -> Result<DensityField, LwrError> {
    if rho0.len() != grid.total_cells() {
        return Err(LwrError::LayoutMismatch(format!("{} densities for {} cells", rho0.len(), grid.total_cells())));
    }
    if let Some(&bad) = rho0.iter().find(|&&r| r.is_nan() || !(-DENSITY_TOL..=1.0 + DENSITY_TOL).contains(&r)) {
        return Err(LwrError::DensityOutOfRange(bad));
    }
    let net = grid.network();
    let sub = net
        .junctions()
        .iter()
        .map(|j| {
            let (n_inc, n_out) = (j.n_inc(), j.n_out());
            let mut incoming = vec![0.0; n_inc * n_out];
            let mut outgoing = vec![0.0; n_inc * n_out];
            for (r, &e) in j.incoming.iter().enumerate() {
                let rho = rho0[grid.last_cell(e)];
                for c in 0..n_out {
                    incoming[r * n_out + c] = j.alpha(r, c) * rho;
                }
            }
            for (c, &e) in j.outgoing.iter().enumerate() {
                let share = rho0[grid.first_cell(e)] / n_inc as f64;
                for r in 0..n_inc {
                    outgoing[r * n_out + c] = share;
                }
            }
            SubDensities { incoming, outgoing }
        })
        .collect();
    Ok(DensityField { rho: rho0, sub, time: 0.0, step: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{discretize, manhattan};
    use std::sync::Arc;

    fn grid(ell: usize) -> CellGrid {
        discretize(&Arc::new(manhattan(ell, 1.0).unwrap()), 0.1).unwrap()
    }

    #[test]
    fn interior_junction_split() {
        let g = grid(3);
        let field = init_subdensities(vec![0.5; g.total_cells()], &g).unwrap();
        let s = &field.sub()[4];
        assert_eq!(s.incoming.len(), 16);
        assert!(s.incoming.iter().all(|&m| m == 0.125));
        assert!(s.outgoing.iter().all(|&m| m == 0.125));
        assert!(field.coupling_defect(&g) <= 1e-12);
        assert!(field.rho().iter().all(|&r| r == 0.5));
    }

    #[test]
    fn zero_field() {
        let g = grid(2);
        let field = init_subdensities(vec![0.0; g.total_cells()], &g).unwrap();
        assert!(field.sub().iter().all(|s| s.incoming.iter().chain(&s.outgoing).all(|&m| m == 0.0)));
    }

    #[test]
    fn border_split_uses_local_degrees() {
        let g = grid(3);
        let rho0: Vec<f64> = (0..g.total_cells()).map(|k| (k % 7) as f64 / 10.0).collect();
        let field = init_subdensities(rho0, &g).unwrap();
        assert!(field.coupling_defect(&g) <= 1e-12);
        let corner = &field.sub()[0];
        assert_eq!(corner.incoming.len(), 4);
    }

    #[test]
    fn rejects_bad_input() {
        let g = grid(2);
        assert!(matches!(init_subdensities(vec![0.0; 3], &g), Err(LwrError::LayoutMismatch(_))));
        let mut rho = vec![0.0; g.total_cells()];
        rho[5] = 1.5;
        assert!(matches!(init_subdensities(rho, &g), Err(LwrError::DensityOutOfRange(_))));
    }
}
