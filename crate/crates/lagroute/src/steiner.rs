//! Per-net route construction: a deterministic metric-closure Steiner
//! heuristic over the current effective edge costs.
//!
//! The route for a net is built by (1) computing shortest paths between all
//! terminal pairs, (2) taking a minimum spanning tree of that closure,
//! (3) expanding its edges back to grid paths, (4) extracting a spanning tree
//! of the expanded edge union, and (5) pruning non-terminal leaves. For
//! 2-terminal nets this is an exact shortest path; for k terminals the cost is
//! within 2(1-1/k) of the optimum. All ties are broken lexicographically so
//! the result is independent of thread count.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdgeId, GridGraph};
use crate::netlist::Net;

/// Per-edge routing costs: base weight plus the current Lagrange multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCosts {
    costs: Vec<f64>,
}

impl EffectiveCosts {
    /// Costs equal to the raw edge weights (all multipliers zero).
    pub fn from_weights(g: &GridGraph) -> Self {
        EffectiveCosts {
            costs: (0..g.num_edges()).map(|i| g.weight_by_index(i)).collect(),
        }
    }

    /// Costs `w_e + lambda_e`, with `lambda` indexed like the grid's edges.
    pub fn new(g: &GridGraph, lambda: &[f64]) -> Result<Self> {
        if lambda.len() != g.num_edges() {
            return Err(Error::InvalidArgument(format!(
                "lambda has {} entries, grid has {} edges",
                lambda.len(),
                g.num_edges()
            )));
        }
        Ok(EffectiveCosts {
            costs: (0..g.num_edges())
                .map(|i| g.weight_by_index(i) + lambda[i])
                .collect(),
        })
    }

    pub fn get(&self, edge_idx: usize) -> f64 {
        self.costs[edge_idx]
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }
}

/// One net's route: a tree over grid edges spanning every terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTree {
    pub net_id: usize,
    /// Sorted canonical edges, the support of the net's decision variables.
    pub edges: Vec<EdgeId>,
    /// Sum of effective costs over the edges.
    pub cost: f64,
    /// Sum of raw weights over the edges.
    pub wirelength: f64,
}

impl RouteTree {
    pub fn edge_indices(&self, g: &GridGraph) -> Result<Vec<usize>> {
        self.edges.iter().map(|&e| g.edge_index(e)).collect()
    }
}

/// Builds a `RouteTree` from an edge-index set, recomputing cost and
/// wirelength from the graph.
pub(crate) fn tree_from_indices(
    g: &GridGraph,
    costs: &EffectiveCosts,
    net_id: usize,
    indices: &BTreeSet<usize>,
) -> RouteTree {
    let mut edges: Vec<EdgeId> = indices.iter().map(|&i| g.edge_at(i)).collect();
    edges.sort();
    let cost = indices.iter().map(|&i| costs.get(i)).sum();
    let wirelength = indices.iter().map(|&i| g.weight_by_index(i)).sum();
    RouteTree {
        net_id,
        edges,
        cost,
        wirelength,
    }
}

/// Sum of effective costs over a tree's edges.
pub fn tree_cost(g: &GridGraph, t: &RouteTree, costs: &EffectiveCosts) -> Result<f64> {
    let mut sum = 0.0;
    for &e in &t.edges {
        sum += costs.get(g.edge_index(e)?);
    }
    Ok(sum)
}

/// Sum of raw weights over a tree's edges.
pub fn tree_wirelength(g: &GridGraph, t: &RouteTree) -> Result<f64> {
    let mut sum = 0.0;
    for &e in &t.edges {
        sum += g.weight(e)?;
    }
    Ok(sum)
}

#[derive(Debug, Clone)]
struct ShortestPaths {
    dist: Vec<f64>,
    pred: Vec<usize>,
}

const NO_PRED: usize = usize::MAX;

/// Dijkstra with a deterministic settle order: heap entries compare by
/// (distance, vertex index), predecessors update on strict improvement only.
fn dijkstra(g: &GridGraph, costs: &EffectiveCosts, src: usize) -> ShortestPaths {
    let n = g.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<HeapEntry>> = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse(HeapEntry { cost: 0.0, v: src }));

    while let Some(Reverse(entry)) = heap.pop() {
        let v = entry.v;
        if done[v] {
            continue;
        }
        done[v] = true;
        let vid = g.vertex_at(v);
        for (u, e) in g.neighbors(vid).expect("in-bounds vertex") {
            let ui = g.vertex_index(u);
            if done[ui] {
                continue;
            }
            let ei = g.edge_index(e).expect("lattice edge");
            let cand = dist[v] + costs.get(ei);
            if cand < dist[ui] {
                dist[ui] = cand;
                pred[ui] = v;
                heap.push(Reverse(HeapEntry { cost: cand, v: ui }));
            }
        }
    }
    ShortestPaths { dist, pred }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    v: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.v.cmp(&other.v))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge indices along the predecessor chain from `target` back to the source.
fn extract_path(g: &GridGraph, sp: &ShortestPaths, target: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = target;
    while sp.pred[v] != NO_PRED {
        let u = sp.pred[v];
        let e = EdgeId::new(g.vertex_at(u), g.vertex_at(v)).expect("pred is a neighbor");
        out.push(g.edge_index(e).expect("lattice edge"));
        v = u;
    }
    out
}

/// Routes one net under the given effective costs.
pub fn route_net(g: &GridGraph, costs: &EffectiveCosts, net: &Net) -> Result<RouteTree> {
    if costs.len() != g.num_edges() {
        return Err(Error::InvalidArgument(
            "effective costs do not cover the grid".into(),
        ));
    }
    let terminals = net.terminals();
    for &t in terminals {
        if !g.in_bounds(t) {
            return Err(Error::InvalidArgument(format!(
                "terminal {t} out of bounds"
            )));
        }
    }
    let term_idx: Vec<usize> = terminals.iter().map(|&t| g.vertex_index(t)).collect();

    // Shortest paths from every terminal. Terminals are sorted, so index order
    // here is the lexicographic order used for tie-breaking below.
    let sps: Vec<ShortestPaths> = term_idx.iter().map(|&s| dijkstra(g, costs, s)).collect();

    let mut union: BTreeSet<usize> = BTreeSet::new();
    if terminals.len() == 2 {
        union.extend(extract_path(g, &sps[0], term_idx[1]));
    } else {
        // Metric closure MST (Kruskal), ties broken by terminal pair.
        let k = terminals.len();
        let mut closure: Vec<(f64, usize, usize)> = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                closure.push((sps[i].dist[term_idx[j]], i, j));
            }
        }
        closure.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut uf = UnionFind::new(k);
        for &(_, i, j) in &closure {
            if uf.union(i, j) {
                // Expand from the lex-smaller terminal's shortest-path tree.
                union.extend(extract_path(g, &sps[i], term_idx[j]));
            }
        }
    }

    // The union of paths may contain cycles; keep a deterministic spanning
    // tree of it (Kruskal by effective cost, then edge index).
    let mut union_edges: Vec<usize> = union.iter().copied().collect();
    union_edges.sort_by(|&a, &b| costs.get(a).total_cmp(&costs.get(b)).then(a.cmp(&b)));
    let mut uf = UnionFind::new(g.num_vertices());
    let mut tree: BTreeSet<usize> = BTreeSet::new();
    for &ei in &union_edges {
        let (a, b) = g.edge_at(ei).endpoints();
        if uf.union(g.vertex_index(a), g.vertex_index(b)) {
            tree.insert(ei);
        }
    }

    prune_non_terminal_leaves(g, &term_idx, &mut tree);
    Ok(tree_from_indices(g, costs, net.id, &tree))
}

/// Repeatedly removes leaf edges whose leaf endpoint is not a terminal.
fn prune_non_terminal_leaves(g: &GridGraph, terminals: &[usize], tree: &mut BTreeSet<usize>) {
    let mut is_terminal = vec![false; g.num_vertices()];
    for &t in terminals {
        is_terminal[t] = true;
    }
    let mut degree = vec![0usize; g.num_vertices()];
    for &ei in tree.iter() {
        let (a, b) = g.edge_at(ei).endpoints();
        degree[g.vertex_index(a)] += 1;
        degree[g.vertex_index(b)] += 1;
    }
    loop {
        let mut removed = false;
        let current: Vec<usize> = tree.iter().copied().collect();
        for ei in current {
            let (a, b) = g.edge_at(ei).endpoints();
            let (ai, bi) = (g.vertex_index(a), g.vertex_index(b));
            let leaf = if degree[ai] == 1 && !is_terminal[ai] {
                Some(ai)
            } else if degree[bi] == 1 && !is_terminal[bi] {
                Some(bi)
            } else {
                None
            };
            if leaf.is_some() {
                tree.remove(&ei);
                degree[ai] -= 1;
                degree[bi] -= 1;
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }
}

/// Checks every `RouteTree` invariant: edges exist, the edge set is a tree,
/// all terminals are spanned, and every leaf is a terminal.
pub fn validate_tree(g: &GridGraph, net: &Net, tree: &RouteTree) -> Result<()> {
    let mut verts: BTreeSet<usize> = BTreeSet::new();
    let mut uf = UnionFind::new(g.num_vertices());
    let mut degree = std::collections::HashMap::new();
    let mut seen = BTreeSet::new();
    for &e in &tree.edges {
        let ei = g.edge_index(e)?;
        if !seen.insert(ei) {
            return Err(Error::InvalidArgument(format!("duplicate edge {e}")));
        }
        let (a, b) = e.endpoints();
        let (ai, bi) = (g.vertex_index(a), g.vertex_index(b));
        verts.insert(ai);
        verts.insert(bi);
        *degree.entry(ai).or_insert(0usize) += 1;
        *degree.entry(bi).or_insert(0usize) += 1;
        if !uf.union(ai, bi) {
            return Err(Error::InvalidArgument(format!(
                "net {} route contains a cycle",
                net.id
            )));
        }
    }
    if tree.edges.len() + 1 != verts.len() && !(tree.edges.is_empty() && verts.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "net {} route is not a tree",
            net.id
        )));
    }
    let term_idx: Vec<usize> = net.terminals().iter().map(|&t| g.vertex_index(t)).collect();
    for (&t, &v) in net.terminals().iter().zip(term_idx.iter()) {
        if !verts.contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "net {} route misses terminal {t}",
                net.id
            )));
        }
    }
    let root = term_idx[0];
    for &v in &verts {
        if uf.find(v) != uf.find(root) {
            return Err(Error::InvalidArgument(format!(
                "net {} route is disconnected",
                net.id
            )));
        }
        if degree[&v] == 1 && !term_idx.contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "net {} route has a non-terminal leaf at {}",
                net.id,
                g.vertex_at(v)
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns true if the two elements were in different components.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Deterministic: smaller root wins.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}
