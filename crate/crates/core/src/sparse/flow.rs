//! Fractional major subsets via maximum flow.
//!
//! `η` is feasible when every `Q` can receive `η|Q|` of mass from the cells
//! it contains, each cell giving out at most its own measure. Mass is routed
//! from `Q` down the dyadic tree to the finest cells.

use std::collections::VecDeque;

use super::SparseCollection;
use crate::dyadic::node_count;

struct Edge {
    to: usize,
    cap: f64,
}

struct Dinic {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    next: Vec<usize>,
}

const EPS: f64 = 1e-12;

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            level: vec![0; n],
            next: vec![0; n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let to = self.edges[e].to;
                if self.edges[e].cap > EPS && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.next[v] < self.adj[v].len() {
            let e = self.adj[v][self.next[v]];
            let to = self.edges[e].to;
            if self.edges[e].cap > EPS && self.level[to] == self.level[v] + 1 {
                let got = self.dfs(to, t, pushed.min(self.edges[e].cap));
                if got > EPS {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            self.next[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.next.fill(0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= EPS {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

fn feasible(s: &SparseCollection, eta: f64) -> bool {
    let depth = s.max_depth();
    let tree = node_count(depth);
    let (source, sink) = (tree + s.len(), tree + s.len() + 1);
    let mut g = Dinic::new(tree + s.len() + 2);
    for node in 0..tree - (1 << depth) {
        g.add(node, 2 * node + 1, f64::INFINITY);
        g.add(node, 2 * node + 2, f64::INFINITY);
    }
    for leaf in tree - (1 << depth)..tree {
        g.add(leaf, sink, 1.0);
    }
    let mut demand = 0.0;
    for (k, q) in s.intervals().iter().enumerate() {
        let cells = (1u64 << (depth - q.depth())) as f64;
        g.add(source, tree + k, eta * cells);
        g.add(tree + k, q.node(), f64::INFINITY);
        demand += eta * cells;
    }
    g.max_flow(source, sink) >= demand * (1.0 - 1e-10)
}

/// Largest `η` with fractional disjoint major subsets, by bisection.
pub fn fractional_eta(s: &SparseCollection) -> f64 {
    if s.is_empty() {
        return 1.0;
    }
    if feasible(s, 1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if feasible(s, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
