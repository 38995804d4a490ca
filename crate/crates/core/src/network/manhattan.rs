//! Two-way square grid ("Manhattan") networks.
//!
//! Numbering, all 0-based:
//!
//! * vertex `(x, y)` (column `x`, row `y`, origin at the bottom-left corner)
//!   has id `y * ell + x`;
//! * edges come in four blocks of `ell * (ell - 1)` roads each: rightward,
//!   leftward, upward, downward. Inside a block roads are numbered row-major
//!   from the bottom-left, by the lower-left endpoint of the road.
//!
//! One-based junction and road labels are `id + 1`.
//! Since blocks are ordered R, L, U, D, sorting the incident edges of a
//! vertex by id orders them rightward, leftward, upward, downward.

use super::{build_network, EdgeSpec, MetricNetwork, NetworkError, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadDirection {
    Rightward,
    Leftward,
    Upward,
    Downward,
}

/// Index arithmetic for a Manhattan grid with `ell` junctions per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManhattanLayout {
    pub ell: usize,
}

impl ManhattanLayout {
    pub fn new(ell: usize) -> Result<Self, NetworkError> {
        if ell < 2 {
            return Err(NetworkError::TooFewJunctions(ell));
        }
        Ok(Self { ell })
    }

    /// Infers the layout from a network with exactly `4 ell (ell - 1)` edges
    /// and `ell^2` vertices, numbered as produced by [`manhattan`].
    pub fn detect(net: &MetricNetwork) -> Option<Self> {
        let ell = (net.num_vertices() as f64).sqrt().round() as usize;
        let layout = Self::new(ell).ok()?;
        let reference = manhattan(ell, 1.0).ok()?;
        let same_topology = net.num_vertices() == ell * ell
            && net.num_edges() == layout.num_edges()
            && net
                .edges()
                .iter()
                .zip(reference.edges())
                .all(|(a, b)| a.id == b.id && a.tail == b.tail && a.head == b.head)
            && net.vertex_ids().iter().enumerate().all(|(i, &v)| v as usize == i);
        same_topology.then_some(layout)
    }

    pub fn block_len(&self) -> usize {
        self.ell * (self.ell - 1)
    }

    pub fn num_edges(&self) -> usize {
        4 * self.block_len()
    }

    pub fn vertex(&self, x: usize, y: usize) -> u32 {
        (y * self.ell + x) as u32
    }

    pub fn coords(&self, vertex: u32) -> (usize, usize) {
        let v = vertex as usize;
        (v % self.ell, v / self.ell)
    }

    pub fn direction(&self, edge: u32) -> RoadDirection {
        match edge as usize / self.block_len() {
            0 => RoadDirection::Rightward,
            1 => RoadDirection::Leftward,
            2 => RoadDirection::Upward,
            _ => RoadDirection::Downward,
        }
    }

    pub fn block(&self, dir: RoadDirection) -> std::ops::Range<u32> {
        let b = self.block_len() as u32;
        let k = dir as u32;
        k * b..(k + 1) * b
    }

    /// Rightward road from `(x, y)` to `(x + 1, y)`.
    pub fn rightward(&self, x: usize, y: usize) -> u32 {
        (y * (self.ell - 1) + x) as u32
    }

    /// The junction at the exact grid center; only exists for odd `ell`.
    pub fn center_vertex(&self) -> Option<u32> {
        (self.ell % 2 == 1).then(|| self.vertex(self.ell / 2, self.ell / 2))
    }

    /// The rightward road selected for closure: for odd `ell` the one leaving
    /// the center junction, for even `ell` the one whose midpoint is nearest
    /// the grid centroid, lowest id first.
    pub fn central_rightward(&self) -> u32 {
        let c = self.ell / 2;
        if self.ell % 2 == 1 {
            self.rightward(c, c)
        } else {
            // midpoints (x + 1/2, y) at distance 1/2 from the centroid
            self.rightward(c - 1, c - 1)
        }
    }
}

/// Builds the `ell x ell` two-way grid with every road of length
/// `edge_length` and equidistributed junctions.
pub fn manhattan(ell: usize, edge_length: f64) -> Result<MetricNetwork, NetworkError> {
    let layout = ManhattanLayout::new(ell)?;
    let vertices: Vec<u32> = (0..(ell * ell) as u32).collect();
    let mut edges = Vec::with_capacity(layout.num_edges());
    let mut push = |tail: u32, head: u32| {
        let id = edges.len() as u32;
        edges.push(EdgeSpec { id, tail, head, length: edge_length });
    };
    for y in 0..ell {
        for x in 0..ell - 1 {
            push(layout.vertex(x, y), layout.vertex(x + 1, y));
        }
    }
    for y in 0..ell {
        for x in 0..ell - 1 {
            push(layout.vertex(x + 1, y), layout.vertex(x, y));
        }
    }
    for y in 0..ell - 1 {
        for x in 0..ell {
            push(layout.vertex(x, y), layout.vertex(x, y + 1));
        }
    }
    for y in 0..ell - 1 {
        for x in 0..ell {
            push(layout.vertex(x, y + 1), layout.vertex(x, y));
        }
    }
    build_network(&NetworkSpec { vertices, edges, distribution: Default::default() })
}
