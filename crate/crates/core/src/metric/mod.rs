//! Shortest-path metric on the cells of a discretized network.
//!
//! Every cell center is a node. Consecutive cells of an edge are linked at
//! distance `dx`; all cells touching the same vertex are pairwise linked at
//! distance `dx` (half a cell to the vertex, half a cell away). Directions are
//! ignored: mass may be moved against traffic.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::network::CellGrid;

/// Default largest number of cells accepted by [`cost_matrix`].
pub const DEFAULT_MAX_CELLS: usize = 5000;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("internal error: node {target} unreachable from {from}")]
    Unreachable { from: usize, target: usize },
    #[error("cost matrix for {cells} cells exceeds the cap of {cap} cells")]
    TooLarge { cells: usize, cap: usize },
    #[error("cost matrix must be square with zero diagonal: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected weighted graph on the cell centers.
#[derive(Debug, Clone)]
pub struct CellGraph {
    dx: f64,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl CellGraph {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_links(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Builds a graph from an explicit undirected link list.
    pub fn from_links(num_nodes: usize, dx: f64, links: &[(usize, usize, f64)]) -> Self {
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(a, b, w) in links {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        Self { dx, adjacency }
    }
}

pub fn build_cell_graph(grid: &CellGrid) -> CellGraph {
    let net = grid.network();
    let dx = grid.dx();
    let mut links = BTreeSet::new();
    for e in 0..net.num_edges() {
        let cells = grid.edge_cells(e);
        for k in cells.start..cells.end - 1 {
            links.insert((k, k + 1));
        }
    }
    for j in net.junctions() {
        let mut touching: Vec<usize> = j
            .incoming
            .iter()
            .map(|&e| grid.last_cell(e))
            .chain(j.outgoing.iter().map(|&e| grid.first_cell(e)))
            .collect();
        touching.sort_unstable();
        touching.dedup();
        for (i, &a) in touching.iter().enumerate() {
            for &b in &touching[i + 1..] {
                links.insert((a, b));
            }
        }
    }
    let links: Vec<_> = links.into_iter().map(|(a, b)| (a, b, dx)).collect();
    CellGraph::from_links(grid.total_cells(), dx, &links)
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra.
pub fn shortest_paths(graph: &CellGraph, source: usize) -> Result<Vec<f64>, MetricError> {
    let n = graph.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, node: source });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in graph.neighbors(node) {
            let cand = d + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Entry { dist: cand, node: next });
            }
        }
    }
    if let Some(target) = dist.iter().position(|d| d.is_infinite()) {
        return Err(MetricError::Unreachable { from: source, target });
    }
    Ok(dist)
}

/// Dense symmetric matrix of shortest-path lengths between cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Wraps a dense row-major matrix. Used for hand-made costs in tests and
    /// tools; no metric property is assumed beyond a zero diagonal.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if data.len() != n * n {
            return Err(MetricError::Malformed(format!("{} entries for {n}x{n}", data.len())));
        }
        if (0..n).any(|j| data[j * n + j] != 0.0) {
            return Err(MetricError::Malformed("nonzero diagonal".into()));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(MetricError::Malformed("negative or non-finite entry".into()));
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.n + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Text dump: a `# J=<n> dx=<dx>` header, then one comma-separated row
    /// per line.
    pub fn write_text(&self, path: impl AsRef<Path>, dx: f64) -> Result<(), MetricError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# J={} dx={}", self.n, dx)?;
        for j in 0..self.n {
            let row: Vec<String> = self.row(j).iter().map(f64::to_string).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn cost_matrix(graph: &CellGraph) -> Result<CostMatrix, MetricError> {
    cost_matrix_with_cap(graph, DEFAULT_MAX_CELLS)
}

/// All-pairs shortest paths, one Dijkstra run per source (in parallel). The
/// lower triangle is mirrored from the upper one so that the matrix is
/// exactly symmetric.
pub fn cost_matrix_with_cap(graph: &CellGraph, max_cells: usize) -> Result<CostMatrix, MetricError> {
    let n = graph.num_nodes();
    if n > max_cells {
        return Err(MetricError::TooLarge { cells: n, cap: max_cells });
    }
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|j| shortest_paths(graph, j)).collect::<Result<_, _>>()?;
    let mut data = vec![0.0; n * n];
    for (j, row) in rows.iter().enumerate() {
        for k in j + 1..n {
            data[j * n + k] = row[k];
            data[k * n + j] = row[k];
        }
    }
    Ok(CostMatrix { n, data })
}

/// Convenience: cell graph and cost matrix of a grid.
pub fn grid_cost_matrix(grid: &CellGrid) -> Result<CostMatrix, MetricError> {
    cost_matrix(&build_cell_graph(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, discretize, manhattan, EdgeSpec, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn chain(lengths: &[f64], dx: f64) -> CellGrid {
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| EdgeSpec { id: i as u32, tail: i as u32, head: i as u32 + 1, length })
            .collect();
        let net = build_network(&NetworkSpec {
            vertices: (0..=lengths.len() as u32).collect(),
            edges,
            distribution: Default::default(),
        })
        .unwrap();
        discretize(&Arc::new(net), dx).unwrap()
    }

    /// Relax all links until nothing changes.
    fn bellman_ford(graph: &CellGraph, source: usize) -> Vec<f64> {
        let n = graph.num_nodes();
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        loop {
            let mut changed = false;
            for u in 0..n {
                for &(v, w) in graph.neighbors(u) {
                    if dist[u] + w < dist[v] {
                        dist[v] = dist[u] + w;
                        changed = true;
                    }
                }
            }
            if !changed {
                return dist;
            }
        }
    }

    #[test]
    fn single_edge_path_graph() {
        let g = build_cell_graph(&chain(&[2.0], 0.5));
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.num_links(), 3);
        let d = shortest_paths(&g, 0).unwrap();
        assert_eq!(d, [0.0, 0.5, 1.0, 1.5]);
        assert_eq!(shortest_paths(&g, 2).unwrap()[2], 0.0);
    }

    #[test]
    fn zero_extent_junction() {
        let g = build_cell_graph(&chain(&[1.0, 1.0], 0.5));
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.num_links(), 3);
        assert_eq!(shortest_paths(&g, 1).unwrap()[2], 0.5);
    }

    #[test]
    fn three_node_matrix() {
        let c = cost_matrix(&build_cell_graph(&chain(&[0.3], 0.1))).unwrap();
        let expected = [[0.0, 0.1, 0.2], [0.1, 0.0, 0.1], [0.2, 0.1, 0.0]];
        for j in 0..3 {
            for k in 0..3 {
                assert!((c.get(j, k) - expected[j][k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn manhattan_graph_is_connected() {
        let grid = discretize(&Arc::new(manhattan(3, 1.0).unwrap()), 0.1).unwrap();
        let g = build_cell_graph(&grid);
        assert_eq!(g.num_nodes(), 240);
        assert!(shortest_paths(&g, 0).unwrap().iter().all(|d| d.is_finite()));
    }

    #[test]
    fn matches_bellman_ford_and_is_a_metric() {
        let grid = discretize(&Arc::new(manhattan(2, 1.0).unwrap()), 0.1).unwrap();
        let g = build_cell_graph(&grid);
        let c = cost_matrix(&g).unwrap();
        let n = c.len();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = rng.gen_range(0..n);
            let oracle = bellman_ford(&g, s);
            for k in 0..n {
                assert!((c.get(s, k) - oracle[k]).abs() < 1e-12);
            }
        }
        let diameter = (0..n).map(|s| bellman_ford(&g, s).into_iter().fold(0.0, f64::max)).fold(0.0, f64::max);
        assert!((c.max() - diameter).abs() < 1e-12);
        for j in 0..n {
            assert_eq!(c.get(j, j), 0.0);
            for k in 0..n {
                assert_eq!(c.get(j, k).to_bits(), c.get(k, j).to_bits());
            }
        }
        for _ in 0..1000 {
            let (a, b, m) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            assert!(c.get(a, b) <= c.get(a, m) + c.get(m, b) + 1e-12);
        }
    }

    #[test]
    fn opposite_lanes_meet_only_at_junctions() {
        let net = Arc::new(manhattan(2, 1.0).unwrap());
        let grid = discretize(&net, 0.1).unwrap();
        let c = cost_matrix(&build_cell_graph(&grid)).unwrap();
        // rightward road 0: (0,0) -> (1,0); leftward road 2: (1,0) -> (0,0)
        let (right, left) = (net.edge_index(0).unwrap(), net.edge_index(2).unwrap());
        assert_eq!(net.edge(right).tail, net.edge(left).head);
        let je = grid.cells_on(right);
        for j in 1..=je {
            let facing = je + 1 - j;
            let a = grid.global_index(right, j);
            let b = grid.global_index(left, facing);
            let via_tail = (2 * j - 1) as f64 * 0.1;
            let via_head = (2 * (je - j) + 1) as f64 * 0.1;
            assert!((c.get(a, b) - via_tail.min(via_head)).abs() < 1e-12);
        }
    }

    #[test]
    fn size_guard() {
        let g = build_cell_graph(&chain(&[1.0], 0.1));
        assert!(matches!(cost_matrix_with_cap(&g, 5), Err(MetricError::TooLarge { cells: 10, cap: 5 })));
    }

    #[test]
    fn from_dense_validates() {
        assert!(CostMatrix::from_dense(2, vec![0.0, 1.0, 1.0]).is_err());
        assert!(CostMatrix::from_dense(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(CostMatrix::from_dense(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn text_dump() {
        let c = cost_matrix(&build_cell_graph(&chain(&[0.3], 0.1))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        c.write_text(&path, 0.1).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# J=3 dx=0.1\n0,"));
        assert_eq!(text.lines().count(), 4);
    }
}
