//! Metric road networks: directed graphs whose edges carry a length and a
//! coordinate running from the tail vertex (`x = 0`) to the head vertex
//! (`x = L_e`), together with a traffic distribution matrix at every vertex.

mod file;
mod grid;
mod manhattan;

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

pub use file::{DistributionSpec, EdgeSpec, NetworkSpec};
pub use grid::{discretize, CellGrid, CellRef};
pub use manhattan::{manhattan, ManhattanLayout, RoadDirection};

/// Tolerance on the row sums of a distribution matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network has no vertices")]
    Empty,
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(u32),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(u32),
    #[error("edge {edge} references unknown vertex {vertex} (dangling endpoint)")]
    DanglingEndpoint { edge: u32, vertex: u32 },
    #[error("edge {edge} has non-positive length {length}")]
    NonPositiveLength { edge: u32, length: f64 },
    #[error("network is not connected")]
    Disconnected,
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("unknown edge {0}")]
    UnknownEdge(u32),
    #[error("distribution at vertex {vertex}: declared edge order does not match the incident {side} edges")]
    EdgeOrderMismatch { vertex: u32, side: &'static str },
    #[error("distribution at vertex {vertex}: expected a {rows}x{cols} matrix")]
    MatrixShape { vertex: u32, rows: usize, cols: usize },
    #[error("distribution at vertex {vertex}: entry ({row}, {col}) = {value} is outside [0, 1]")]
    NegativeEntry { vertex: u32, row: usize, col: usize, value: f64 },
    #[error("distribution at vertex {vertex}: row {row} sums to {sum}, row sum != 1")]
    RowSum { vertex: u32, row: usize, sum: f64 },
    #[error("manhattan grid needs at least 2 junctions per side, got {0}")]
    TooFewJunctions(usize),
    #[error("invalid cell width {0}")]
    InvalidCellWidth(f64),
    #[error("edge {edge} of length {length} is not a multiple of dx = {dx}")]
    NonDivisible { edge: u32, length: f64, dx: f64 },
    #[error("cannot close edge {edge}: it is the only outgoing edge of vertex {vertex}")]
    OnlyOutgoingEdge { edge: u32, vertex: u32 },
    #[error("cannot close edge {edge}: row {row} at vertex {vertex} sends all of its traffic there")]
    DegenerateRow { edge: u32, vertex: u32, row: usize },
    #[error("network file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("network file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: u32,
    /// Internal index of the tail vertex.
    pub tail: usize,
    /// Internal index of the head vertex.
    pub head: usize,
    pub length: f64,
}

/// Distribution data at one vertex.
///
/// `alpha` is stored row-major: row `r` is the `r`-th incoming edge, column
/// `c` the `c`-th outgoing edge, in the orders given by `incoming` and
/// `outgoing` (internal edge indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    alpha: Vec<f64>,
}

impl Junction {
    pub fn n_inc(&self) -> usize {
        self.incoming.len()
    }

    pub fn n_out(&self) -> usize {
        self.outgoing.len()
    }

    pub fn n_paths(&self) -> usize {
        self.incoming.len() * self.outgoing.len()
    }

    pub fn alpha(&self, row: usize, col: usize) -> f64 {
        self.alpha[row * self.outgoing.len() + col]
    }

    pub fn alpha_row(&self, row: usize) -> &[f64] {
        let n = self.outgoing.len();
        &self.alpha[row * n..(row + 1) * n]
    }

    pub fn alpha_flat(&self) -> &[f64] {
        &self.alpha
    }
}

/// A validated, immutable metric network.
///
/// Edges are kept sorted by id; vertices keep the order in which they were
/// declared. Both are addressed internally by position.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricNetwork {
    vertex_ids: Vec<u32>,
    edges: Vec<Edge>,
    junctions: Vec<Junction>,
}

impl MetricNetwork {
    pub fn num_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> &[u32] {
        &self.vertex_ids
    }

    pub fn vertex_id(&self, index: usize) -> u32 {
        self.vertex_ids[index]
    }

    pub fn vertex_index(&self, id: u32) -> Option<usize> {
        self.vertex_ids.iter().position(|&v| v == id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn edge_index(&self, id: u32) -> Option<usize> {
        self.edges.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn junction(&self, vertex: usize) -> &Junction {
        &self.junctions[vertex]
    }

    /// Replaces the distribution matrix of one vertex. Rows are given in the
    /// vertex's incoming order, columns in its outgoing order.
    pub fn set_distribution(&mut self, vertex_id: u32, rows: &[Vec<f64>]) -> Result<(), NetworkError> {
        let v = self.vertex_index(vertex_id).ok_or(NetworkError::UnknownVertex(vertex_id))?;
        let junction = &self.junctions[v];
        let alpha = validate_matrix(vertex_id, junction.n_inc(), junction.n_out(), rows)?;
        self.junctions[v].alpha = alpha;
        Ok(())
    }

    /// Closes `edge_id` to incoming traffic at its tail vertex: its column in
    /// the tail's distribution matrix is zeroed and every row renormalized.
    pub fn close_edge(&mut self, edge_id: u32) -> Result<(), NetworkError> {
        let e = self.edge_index(edge_id).ok_or(NetworkError::UnknownEdge(edge_id))?;
        let tail = self.edges[e].tail;
        let vertex = self.vertex_ids[tail];
        let junction = &mut self.junctions[tail];
        if junction.n_out() < 2 {
            return Err(NetworkError::OnlyOutgoingEdge { edge: edge_id, vertex });
        }
        let col = junction
            .outgoing
            .iter()
            .position(|&o| o == e)
            .expect("edge is outgoing at its tail");
        let n_out = junction.n_out();
        for (row, chunk) in junction.alpha.chunks_mut(n_out).enumerate() {
            chunk[col] = 0.0;
            let sum: f64 = chunk.iter().sum();
            if sum <= 0.0 {
                return Err(NetworkError::DegenerateRow { edge: edge_id, vertex, row });
            }
            chunk.iter_mut().for_each(|a| *a /= sum);
        }
        Ok(())
    }

    pub fn to_spec(&self) -> NetworkSpec {
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                id: e.id,
                tail: self.vertex_ids[e.tail],
                head: self.vertex_ids[e.head],
                length: e.length,
            })
            .collect();
        let distribution = self
            .junctions
            .iter()
            .enumerate()
            .filter(|(_, j)| j.n_paths() > 0)
            .map(|(v, j)| {
                let spec = DistributionSpec {
                    incoming: j.incoming.iter().map(|&e| self.edges[e].id).collect(),
                    outgoing: j.outgoing.iter().map(|&e| self.edges[e].id).collect(),
                    rows: j.alpha.chunks(j.n_out()).map(<[f64]>::to_vec).collect(),
                };
                (self.vertex_ids[v], spec)
            })
            .collect();
        NetworkSpec { vertices: self.vertex_ids.clone(), edges, distribution }
    }
}

fn validate_matrix(vertex: u32, n_inc: usize, n_out: usize, rows: &[Vec<f64>]) -> Result<Vec<f64>, NetworkError> {
    if rows.len() != n_inc || rows.iter().any(|r| r.len() != n_out) {
        return Err(NetworkError::MatrixShape { vertex, rows: n_inc, cols: n_out });
    }
    for (r, row) in rows.iter().enumerate() {
        for (c, &value) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(NetworkError::NegativeEntry { vertex, row: r, col: c, value });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(NetworkError::RowSum { vertex, row: r, sum });
        }
    }
    Ok(rows.concat())
}

fn same_edge_set(declared: &[usize], actual: &[usize]) -> bool {
    let mut a = declared.to_vec();
    a.sort_unstable();
    a.dedup();
    a.len() == declared.len() && a == actual
}

/// Validates a network description and builds the network.
///
/// Vertices without a declared distribution matrix get the equidistributed
/// default `1 / n_out` and list their incident edges by increasing id.
pub fn build_network(spec: &NetworkSpec) -> Result<MetricNetwork, NetworkError> {
    if spec.vertices.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut vertex_pos = HashMap::with_capacity(spec.vertices.len());
    for (i, &v) in spec.vertices.iter().enumerate() {
        if vertex_pos.insert(v, i).is_some() {
            return Err(NetworkError::DuplicateVertex(v));
        }
    }

    let mut sorted: Vec<&EdgeSpec> = spec.edges.iter().collect();
    sorted.sort_by_key(|e| e.id);
    let mut edges = Vec::with_capacity(sorted.len());
    for (k, e) in sorted.iter().enumerate() {
        if k > 0 && sorted[k - 1].id == e.id {
            return Err(NetworkError::DuplicateEdge(e.id));
        }
        let tail = *vertex_pos
            .get(&e.tail)
            .ok_or(NetworkError::DanglingEndpoint { edge: e.id, vertex: e.tail })?;
        let head = *vertex_pos
            .get(&e.head)
            .ok_or(NetworkError::DanglingEndpoint { edge: e.id, vertex: e.head })?;
        if !(e.length > 0.0) || !e.length.is_finite() {
            return Err(NetworkError::NonPositiveLength { edge: e.id, length: e.length });
        }
        edges.push(Edge { id: e.id, tail, head, length: e.length });
    }

    let n = spec.vertices.len();
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        outgoing[e.tail].push(k);
        incoming[e.head].push(k);
    }
    check_connected(n, &edges)?;

    let edge_index: BTreeMap<u32, usize> = edges.iter().enumerate().map(|(k, e)| (e.id, k)).collect();
    for &v in spec.distribution.keys() {
        if !vertex_pos.contains_key(&v) {
            return Err(NetworkError::UnknownVertex(v));
        }
    }

    let mut junctions = Vec::with_capacity(n);
    for (v, (inc, out)) in incoming.into_iter().zip(outgoing).enumerate() {
        let vid = spec.vertices[v];
        let junction = match spec.distribution.get(&vid) {
            None => {
                let n_out = out.len();
                let alpha = vec![1.0 / n_out as f64; inc.len() * n_out];
                Junction { incoming: inc, outgoing: out, alpha }
            }
            Some(d) => {
                let resolve = |ids: &[u32]| -> Result<Vec<usize>, NetworkError> {
                    ids.iter().map(|id| edge_index.get(id).copied().ok_or(NetworkError::UnknownEdge(*id))).collect()
                };
                let dec_in = resolve(&d.incoming)?;
                let dec_out = resolve(&d.outgoing)?;
                if !same_edge_set(&dec_in, &inc) {
                    return Err(NetworkError::EdgeOrderMismatch { vertex: vid, side: "incoming" });
                }
                if !same_edge_set(&dec_out, &out) {
                    return Err(NetworkError::EdgeOrderMismatch { vertex: vid, side: "outgoing" });
                }
                let alpha = validate_matrix(vid, dec_in.len(), dec_out.len(), &d.rows)?;
                Junction { incoming: dec_in, outgoing: dec_out, alpha }
            }
        };
        junctions.push(junction);
    }

    Ok(MetricNetwork { vertex_ids: spec.vertices.clone(), edges, junctions })
}

/// Weak connectivity: directions are ignored.
fn check_connected(n: usize, edges: &[Edge]) -> Result<(), NetworkError> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.tail].push(e.head);
        adj[e.head].push(e.tail);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    if count == n {
        Ok(())
    } else {
        Err(NetworkError::Disconnected)
    }
}
