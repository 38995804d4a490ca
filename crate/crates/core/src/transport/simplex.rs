//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Supply nodes `0..S`, demand nodes `S..S+D` and an artificial root. Real
//! arcs `i -> S+k` are never materialized: arc `a` stands for `(a / D, a % D)`
//! and its cost is read on demand. The starting basis uses one big-cost
//! artificial arc per node; artificial arcs are not priced, so once one
//! leaves the basis it stays out.

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
enum Dir {
    /// Tree arc points from the node to its parent.
    Up,
    /// Tree arc points from the parent to the node.
    Down,
}

impl Dir {
    fn flip(self) -> Self {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
        }
    }
}

pub(crate) enum Outcome {
    Optimal,
    PivotLimit,
    Unbounded,
}

pub(crate) struct Simplex<'a, C: Fn(usize, usize) -> f64> {
    cost: &'a C,
    s: usize,
    d: usize,
    root: usize,
    arcs: usize,
    art_cost: f64,
    eps: f64,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<Dir>,
    flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    next_arc: usize,
    block: usize,
    pub(crate) pivots: usize,
}

impl<'a, C: Fn(usize, usize) -> f64> Simplex<'a, C> {
    /// `cost(i, k)` is the cost from supply node `i` to demand node `k`;
    /// `max_cost` bounds it from above.
    pub(crate) fn new(cost: &'a C, supply: &[f64], demand: &[f64], max_cost: f64) -> Self {
        let (s, d) = (supply.len(), demand.len());
        let n = s + d + 1;
        let root = s + d;
        let arcs = s * d;
        let art_cost = (max_cost + 1.0) * n as f64;
        let mut sim = Self {
            cost,
            s,
            d,
            root,
            arcs,
            art_cost,
            eps: 1e-12 * art_cost,
            parent: vec![root; n],
            pred: (0..n).map(|u| arcs + u).collect(),
            dir: vec![Dir::Up; n],
            flow: vec![0.0; n],
            depth: vec![1; n],
            pi: vec![0.0; n],
            children: vec![Vec::new(); n],
            next_arc: 0,
            block: ((arcs as f64).sqrt().ceil() as usize).max(10),
            pivots: 0,
        };
        sim.depth[root] = 0;
        for (i, &m) in supply.iter().enumerate() {
            sim.flow[i] = m;
            sim.pi[i] = -art_cost;
        }
        for (k, &m) in demand.iter().enumerate() {
            sim.dir[s + k] = Dir::Down;
            sim.flow[s + k] = m;
            sim.pi[s + k] = art_cost;
        }
        sim.children[root] = (0..root).collect();
        sim
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        if arc < self.arcs {
            (arc / self.d, self.s + arc % self.d)
        } else {
            let u = arc - self.arcs;
            if u < self.s {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.arcs {
            (self.cost)(arc / self.d, arc % self.d)
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (i, k) = (arc / self.d, arc % self.d);
        (self.cost)(i, k) + self.pi[i] - self.pi[self.s + k]
    }

    /// Block pricing: scan arcs in blocks, return the most negative reduced
    /// cost seen once a block contains a candidate.
    fn find_entering(&mut self) -> Option<usize> {
        let mut best = None;
        let mut min = -self.eps;
        let mut left = self.block;
        for a in (self.next_arc..self.arcs).chain(0..self.next_arc) {
            let rc = self.reduced_cost(a);
            if rc < min {
                min = rc;
                best = Some(a);
            }
            left -= 1;
            if left == 0 {
                if best.is_some() {
                    self.next_arc = (a + 1) % self.arcs;
                    return best;
                }
                left = self.block;
            }
        }
        best
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, arc: usize) -> bool {
        let (first, second) = self.ends(arc);
        let join = self.join(first, second);

        // The cycle carries flow join -> first -> second -> join. Ties go to
        // the last blocking arc in that order, which keeps the tree strongly
        // feasible.
        let mut delta = f64::INFINITY;
        let mut u_out = None;
        let mut on_first = true;
        let mut u = first;
        while u != join {
            if self.dir[u] == Dir::Up && self.flow[u] < delta {
                delta = self.flow[u];
                u_out = Some(u);
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if self.dir[u] == Dir::Down && self.flow[u] <= delta {
                delta = self.flow[u];
                u_out = Some(u);
                on_first = false;
            }
            u = self.parent[u];
        }
        let Some(u_out) = u_out else { return false };

        if delta > 0.0 {
            let mut u = first;
            while u != join {
                if self.dir[u] == Dir::Up { self.flow[u] -= delta } else { self.flow[u] += delta }
                u = self.parent[u];
            }
            u = second;
            while u != join {
                if self.dir[u] == Dir::Down { self.flow[u] -= delta } else { self.flow[u] += delta }
                u = self.parent[u];
            }
        }
        self.flow[u_out] = 0.0;

        let (u_in, v_in, dir_in) = if on_first { (first, second, Dir::Up) } else { (second, first, Dir::Down) };
        let (mut child, mut new_parent, mut new_arc, mut new_dir, mut new_flow) = (u_in, v_in, arc, dir_in, delta);
        loop {
            let old_parent = self.parent[child];
            let (old_arc, old_dir, old_flow) = (self.pred[child], self.dir[child], self.flow[child]);
            let siblings = &mut self.children[old_parent];
            let pos = siblings.iter().position(|&c| c == child).expect("tree child list out of sync");
            siblings.swap_remove(pos);
            self.parent[child] = new_parent;
            self.pred[child] = new_arc;
            self.dir[child] = new_dir;
            self.flow[child] = new_flow;
            self.children[new_parent].push(child);
            if child == u_out {
                break;
            }
            new_parent = child;
            (new_arc, new_dir, new_flow) = (old_arc, old_dir.flip(), old_flow);
            child = old_parent;
        }
        self.refresh_subtree(u_in);
        true
    }

    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            let p = self.parent[u];
            self.depth[u] = self.depth[p] + 1;
            let c = self.arc_cost(self.pred[u]);
            self.pi[u] = match self.dir[u] {
                Dir::Up => self.pi[p] - c,
                Dir::Down => self.pi[p] + c,
            };
            stack.extend_from_slice(&self.children[u]);
        }
    }

    pub(crate) fn run(&mut self, max_pivots: usize) -> Outcome {
        if self.arcs == 0 {
            return Outcome::Optimal;
        }
        while let Some(arc) = self.find_entering() {
            if self.pivots >= max_pivots {
                return Outcome::PivotLimit;
            }
            if !self.pivot(arc) {
                return Outcome::Unbounded;
            }
            self.pivots += 1;
        }
        Outcome::Optimal
    }

    /// Positive flows on real arcs as `(supply node, demand node, flow)`.
    pub(crate) fn real_flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.root).filter_map(move |u| {
            let a = self.pred[u];
            (a < self.arcs && self.flow[u] > 0.0).then(|| (a / self.d, a % self.d, self.flow[u]))
        })
    }

    /// Flow still routed through the root.
    pub(crate) fn artificial_flow(&self) -> f64 {
        (0..self.root).filter(|&u| self.pred[u] >= self.arcs).map(|u| self.flow[u]).sum()
    }
}
