use std::sync::Arc;

use super::{MetricNetwork, NetworkError};

/// Relative tolerance when checking that `L_e / dx` is an integer.
const DIVISIBILITY_TOL: f64 = 1e-9;

/// Position of one cell: internal edge index and 1-based cell index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRef {
    pub edge: usize,
    pub j: usize,
}

/// Uniform discretization of a network into cells of width `dx`.
///
/// Global cell indices run over edges in id order, and inside an edge over
/// `j = 1..=J_e` in the direction of travel.
#[derive(Debug, Clone)]
pub struct CellGrid {
    network: Arc<MetricNetwork>,
    dx: f64,
    cells_per_edge: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

pub fn discretize(net: &Arc<MetricNetwork>, dx: f64) -> Result<CellGrid, NetworkError> {
    CellGrid::new(Arc::clone(net), dx)
}

impl CellGrid {
    pub fn new(network: Arc<MetricNetwork>, dx: f64) -> Result<Self, NetworkError> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(NetworkError::InvalidCellWidth(dx));
        }
        let mut cells_per_edge = Vec::with_capacity(network.num_edges());
        let mut offsets = Vec::with_capacity(network.num_edges());
        let mut total = 0;
        for e in network.edges() {
            let ratio = e.length / dx;
            let n = ratio.round();
            if n < 1.0 || (ratio - n).abs() > DIVISIBILITY_TOL * ratio {
                return Err(NetworkError::NonDivisible { edge: e.id, length: e.length, dx });
            }
            offsets.push(total);
            cells_per_edge.push(n as usize);
            total += n as usize;
        }
        Ok(Self { network, dx, cells_per_edge, offsets, total })
    }

    pub fn network(&self) -> &MetricNetwork {
        &self.network
    }

    pub fn network_arc(&self) -> &Arc<MetricNetwork> {
        &self.network
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `J_e` for the edge at internal index `edge`.
    pub fn cells_on(&self, edge: usize) -> usize {
        self.cells_per_edge[edge]
    }

    pub fn cells_per_edge(&self) -> &[usize] {
        &self.cells_per_edge
    }

    pub fn min_cells_per_edge(&self) -> usize {
        self.cells_per_edge.iter().copied().min().unwrap_or(0)
    }

    /// `J`.
    pub fn total_cells(&self) -> usize {
        self.total
    }

    /// Global index of cell `j` (1-based) on `edge`.
    pub fn global_index(&self, edge: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.cells_per_edge[edge]);
        self.offsets[edge] + j - 1
    }

    pub fn first_cell(&self, edge: usize) -> usize {
        self.offsets[edge]
    }

    pub fn last_cell(&self, edge: usize) -> usize {
        self.offsets[edge] + self.cells_per_edge[edge] - 1
    }

    /// Global index range of the cells on `edge`.
    pub fn edge_cells(&self, edge: usize) -> std::ops::Range<usize> {
        self.offsets[edge]..self.offsets[edge] + self.cells_per_edge[edge]
    }

    pub fn locate(&self, global: usize) -> CellRef {
        let edge = self.offsets.partition_point(|&o| o <= global) - 1;
        CellRef { edge, j: global - self.offsets[edge] + 1 }
    }

    /// Coordinate `(j - 1/2) dx` of the center of cell `j` along its edge.
    pub fn cell_center(&self, j: usize) -> f64 {
        (j as f64 - 0.5) * self.dx
    }

    /// Two grids are compatible when they discretize the same edges with the
    /// same cells, whatever their distribution matrices.
    pub fn same_cells(&self, other: &CellGrid) -> bool {
        self.dx == other.dx
            && self.cells_per_edge == other.cells_per_edge
            && self
                .network
                .edges()
                .iter()
                .zip(other.network.edges())
                .all(|(a, b)| a.id == b.id && a.tail == b.tail && a.head == b.head)
    }
}
