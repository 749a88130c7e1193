//! Exact solver for tiny instances by complete enumeration. Used as ground
//! truth in tests and in the acceptance suite; refuses anything beyond its
//! size limits rather than approximating.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGraph;
use crate::netlist::{Instance, Net};
use crate::steiner::{tree_from_indices, EffectiveCosts, RouteTree, UnionFind};

/// Hard instance-size guard. `max_search_nodes` caps the enumeration work so
/// an accidentally large instance errors out instead of spinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_vertices: usize,
    pub max_nets: usize,
    pub max_terminals: usize,
    pub max_search_nodes: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_vertices: 16,
            max_nets: 3,
            max_terminals: 3,
            max_search_nodes: 50_000_000,
        }
    }
}

/// Ground-truth optimum for a tiny instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    /// Minimum total wirelength subject to usage <= max(W, min_channel_width).
    pub optimal_wirelength: f64,
    /// Smallest W admitting a zero-violation routing of all nets.
    pub min_channel_width: usize,
    /// One assignment achieving `optimal_wirelength`.
    pub witness: Vec<RouteTree>,
}

fn check_limits(instance: &Instance, limits: &OracleLimits) -> Result<()> {
    let g = &instance.grid;
    if g.num_vertices() > limits.max_vertices {
        return Err(Error::SizeLimit(format!(
            "{} vertices > {}",
            g.num_vertices(),
            limits.max_vertices
        )));
    }
    if instance.netlist.len() > limits.max_nets {
        return Err(Error::SizeLimit(format!(
            "{} nets > {}",
            instance.netlist.len(),
            limits.max_nets
        )));
    }
    for net in instance.netlist.nets() {
        if net.terminals().len() > limits.max_terminals {
            return Err(Error::SizeLimit(format!(
                "net {} has {} terminals > {}",
                net.id,
                net.terminals().len(),
                limits.max_terminals
            )));
        }
    }
    Ok(())
}

fn spend(budget: &Cell<u64>) -> Result<()> {
    let left = budget.get();
    if left == 0 {
        return Err(Error::SizeLimit("oracle search budget exhausted".into()));
    }
    budget.set(left - 1);
    Ok(())
}

/// Exact minimum Steiner wirelength for one net over the edges accepted by
/// `usable`, or None if the terminals cannot be connected. Enumerates every
/// vertex superset of the terminals and takes the cheapest spanning tree of
/// the induced usable subgraph; an optimal Steiner tree spans its own vertex
/// set, so this search is complete.
fn min_steiner_subset_mst(
    g: &GridGraph,
    term_idx: &[usize],
    usable: &dyn Fn(usize) -> bool,
) -> Option<(f64, Vec<usize>)> {
    let n = g.num_vertices();
    debug_assert!(n <= 32);
    let term_mask: u32 = term_idx.iter().fold(0, |m, &t| m | (1 << t));
    let free_mask: u32 = (((1u64 << n) - 1) as u32) & !term_mask;

    let mut edges: Vec<(f64, usize, usize, usize)> = Vec::new(); // (w, idx, a, b)
    for idx in 0..g.num_edges() {
        if usable(idx) {
            let (a, b) = g.edge_at(idx).endpoints();
            edges.push((
                g.weight_by_index(idx),
                idx,
                g.vertex_index(a),
                g.vertex_index(b),
            ));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut best: Option<(f64, Vec<usize>)> = None;
    // Iterate every submask of the non-terminal vertices.
    let mut extra = free_mask;
    loop {
        let mask = term_mask | extra;
        let count = mask.count_ones() as usize;
        let mut uf = UnionFind::new(n);
        let mut chosen = Vec::new();
        let mut cost = 0.0;
        for &(w, idx, a, b) in &edges {
            if (mask >> a) & 1 == 1 && (mask >> b) & 1 == 1 && uf.union(a, b) {
                chosen.push(idx);
                cost += w;
                if chosen.len() == count - 1 {
                    break;
                }
            }
        }
        if chosen.len() == count - 1 {
            let better = match &best {
                None => true,
                Some((c, _)) => cost < *c,
            };
            if better {
                best = Some((cost, chosen));
            }
        }
        if extra == 0 {
            break;
        }
        extra = (extra - 1) & free_mask;
    }
    best
}

/// Exact minimum Steiner wirelength for one net on the full grid.
pub fn optimal_net_wirelength(g: &GridGraph, net: &Net) -> Result<f64> {
    if g.num_vertices() > 32 {
        return Err(Error::SizeLimit(format!(
            "{} vertices > 32",
            g.num_vertices()
        )));
    }
    let term_idx: Vec<usize> = net.terminals().iter().map(|&t| g.vertex_index(t)).collect();
    min_steiner_subset_mst(g, &term_idx, &|_| true)
        .map(|(c, _)| c)
        .ok_or_else(|| Error::InvalidInstance("terminals not connectable".into()))
}

struct TreeEnum<'a> {
    g: &'a GridGraph,
    capacity: Vec<u32>, // snapshot; the enumerator only reads it
    term_mask: u64,
    budget: &'a Cell<u64>,
    tree: Vec<usize>,
    degree: Vec<u8>,
    wirelength: f64,
}

impl<'a> TreeEnum<'a> {
    fn pruned(&self, vert_mask: u64) -> bool {
        // every tree leaf must be a terminal
        let mut m = vert_mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            if self.degree[v] == 1 && (self.term_mask >> v) & 1 == 0 {
                return false;
            }
        }
        true
    }

    fn rec(
        &mut self,
        vert_mask: u64,
        banned: u64,
        visit: &mut dyn FnMut(&[usize], f64) -> Result<ControlFlow<()>>,
    ) -> Result<ControlFlow<()>> {
        spend(self.budget)?;
        if vert_mask & self.term_mask == self.term_mask {
            // All terminals reached. Growing further only adds non-terminal
            // leaves, so this branch ends here either way.
            if self.pruned(vert_mask) {
                return visit(&self.tree, self.wirelength);
            }
            return Ok(ControlFlow::Continue(()));
        }
        let mut local_banned = banned;
        for ei in 0..self.g.num_edges() {
            if (local_banned >> ei) & 1 == 1 || self.capacity[ei] == 0 {
                continue;
            }
            let (a, b) = self.g.edge_at(ei).endpoints();
            let (ai, bi) = (self.g.vertex_index(a), self.g.vertex_index(b));
            let ina = (vert_mask >> ai) & 1 == 1;
            let inb = (vert_mask >> bi) & 1 == 1;
            if ina == inb {
                continue; // either outside the tree or would close a cycle
            }
            let new_v = if ina { bi } else { ai };
            self.tree.push(ei);
            self.degree[ai] += 1;
            self.degree[bi] += 1;
            self.wirelength += self.g.weight_by_index(ei);
            let flow = self.rec(vert_mask | (1 << new_v), local_banned, visit)?;
            self.wirelength -= self.g.weight_by_index(ei);
            self.degree[ai] -= 1;
            self.degree[bi] -= 1;
            self.tree.pop();
            if flow == ControlFlow::Break(()) {
                return Ok(flow);
            }
            local_banned |= 1 << ei;
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Enumerates every pruned Steiner tree for the given terminals whose edges
/// all have remaining capacity, invoking `visit(edges, wirelength)` once per
/// tree. Trees are grown edge by edge from the first terminal; a banned set
/// keeps each tree from being generated more than once per growth order.
fn for_each_tree(
    g: &GridGraph,
    term_idx: &[usize],
    capacity: &[u32],
    budget: &Cell<u64>,
    visit: &mut dyn FnMut(&[usize], f64) -> Result<ControlFlow<()>>,
) -> Result<ControlFlow<()>> {
    debug_assert!(g.num_edges() <= 64 && g.num_vertices() <= 64);
    let term_mask: u64 = term_idx.iter().fold(0, |m, &t| m | (1 << t));
    let root = *term_idx.iter().min().expect("net has terminals");
    let mut en = TreeEnum {
        g,
        capacity: capacity.to_vec(),
        term_mask,
        budget,
        tree: Vec::new(),
        degree: vec![0; g.num_vertices()],
        wirelength: 0.0,
    };
    en.rec(1u64 << root, 0, visit)
}

/// True if `term_idx` are all connected using only edges with remaining
/// capacity.
fn terminals_connected(g: &GridGraph, term_idx: &[usize], capacity: &[u32]) -> bool {
    let mut uf = UnionFind::new(g.num_vertices());
    for ei in 0..g.num_edges() {
        if capacity[ei] > 0 {
            let (a, b) = g.edge_at(ei).endpoints();
            uf.union(g.vertex_index(a), g.vertex_index(b));
        }
    }
    let root = uf.find(term_idx[0]);
    term_idx.iter().all(|&t| uf.find(t) == root)
}

/// Does a zero-violation assignment exist at channel width `w`?
fn feasible_at(g: &GridGraph, nets: &[Vec<usize>], w: usize, budget: &Cell<u64>) -> Result<bool> {
    fn dfs(
        g: &GridGraph,
        nets: &[Vec<usize>],
        idx: usize,
        capacity: &mut Vec<u32>,
        budget: &Cell<u64>,
    ) -> Result<bool> {
        if idx + 1 == nets.len() {
            // Last net: any tree works, so connectivity suffices.
            return Ok(terminals_connected(g, &nets[idx], capacity));
        }
        let mut found = false;
        let snapshot = capacity.clone();
        let _ = for_each_tree(g, &nets[idx], &snapshot, budget, &mut |edges, _wl| {
            for &e in edges {
                capacity[e] -= 1;
            }
            let r = dfs(g, nets, idx + 1, capacity, budget);
            for &e in edges {
                capacity[e] += 1;
            }
            if r? {
                found = true;
                Ok(ControlFlow::Break(()))
            } else {
                Ok(ControlFlow::Continue(()))
            }
        })?;
        Ok(found)
    }

    let mut capacity = vec![w as u32; g.num_edges()];
    dfs(g, nets, 0, &mut capacity, budget)
}

/// Minimum total wirelength over all assignments with usage <= `w`, plus one
/// witness. Branch-and-bound over complete tree enumeration; the last net is
/// solved exactly by subset MST over the remaining capacity.
fn best_wirelength_at(
    g: &GridGraph,
    nets: &[Vec<usize>],
    w: usize,
    budget: &Cell<u64>,
) -> Result<Option<(f64, Vec<Vec<usize>>)>> {
    // Per-net unconstrained optima give an admissible remaining-cost bound.
    let mut suffix_lower = vec![0.0; nets.len() + 1];
    for i in (0..nets.len()).rev() {
        let (c, _) = min_steiner_subset_mst(g, &nets[i], &|_| true)
            .ok_or_else(|| Error::InvalidInstance("terminals not connectable".into()))?;
        suffix_lower[i] = suffix_lower[i + 1] + c;
    }

    struct Search<'a> {
        g: &'a GridGraph,
        nets: &'a [Vec<usize>],
        suffix_lower: Vec<f64>,
        best: Option<(f64, Vec<Vec<usize>>)>,
        chosen: Vec<Vec<usize>>,
    }

    fn dfs(
        s: &mut Search,
        idx: usize,
        partial: f64,
        capacity: &mut Vec<u32>,
        budget: &Cell<u64>,
    ) -> Result<()> {
        if let Some((best_cost, _)) = &s.best {
            if partial + s.suffix_lower[idx] >= *best_cost {
                return Ok(());
            }
        }
        if idx + 1 == s.nets.len() {
            let cap = capacity.clone();
            if let Some((c, edges)) = min_steiner_subset_mst(s.g, &s.nets[idx], &|e| cap[e] > 0) {
                let total = partial + c;
                let better = match &s.best {
                    None => true,
                    Some((bc, _)) => total < *bc,
                };
                if better {
                    let mut assignment = s.chosen.clone();
                    assignment.push(edges);
                    s.best = Some((total, assignment));
                }
            }
            return Ok(());
        }
        let g = s.g;
        let terms = s.nets[idx].clone();
        let mut result = Ok(());
        let snapshot = capacity.clone();
        let _ = for_each_tree(g, &terms, &snapshot, budget, &mut |edges, wl| {
            for &e in edges {
                capacity[e] -= 1;
            }
            s.chosen.push(edges.to_vec());
            let r = dfs(s, idx + 1, partial + wl, capacity, budget);
            s.chosen.pop();
            for &e in edges {
                capacity[e] += 1;
            }
            if let Err(e) = r {
                result = Err(e);
                return Ok(ControlFlow::Break(()));
            }
            Ok(ControlFlow::Continue(()))
        })?;
        result?;
        Ok(())
    }

    let mut search = Search {
        g,
        nets,
        suffix_lower,
        best: None,
        chosen: Vec::new(),
    };
    let mut capacity = vec![w as u32; g.num_edges()];
    dfs(&mut search, 0, 0.0, &mut capacity, budget)?;
    Ok(search.best)
}

/// Solves the instance exactly: the minimum channel width over all
/// assignments, and the minimum total wirelength subject to the channel-width
/// limit, with a witness assignment.
pub fn exact_route(instance: &Instance, limits: &OracleLimits) -> Result<ExactResult> {
    check_limits(instance, limits)?;
    let g = &instance.grid;
    let nets: Vec<Vec<usize>> = instance
        .netlist
        .nets()
        .iter()
        .map(|n| n.terminals().iter().map(|&t| g.vertex_index(t)).collect())
        .collect();

    let budget = Cell::new(limits.max_search_nodes);
    let mut min_channel_width = nets.len();
    for w in 1..nets.len() {
        if feasible_at(g, &nets, w, &budget)? {
            min_channel_width = w;
            break;
        }
    }

    // The wirelength optimum is taken at the instance's W, relaxed up to the
    // minimum feasible width if the instance W is below it.
    let w_eff = instance.w_init.max(min_channel_width);
    let (optimal_wirelength, assignment) = best_wirelength_at(g, &nets, w_eff, &budget)?
        .ok_or_else(|| Error::InvalidInstance("no feasible assignment".into()))?;

    let costs = EffectiveCosts::from_weights(g);
    let witness = instance
        .netlist
        .nets()
        .iter()
        .zip(&assignment)
        .map(|(net, edges)| {
            let set: BTreeSet<usize> = edges.iter().copied().collect();
            tree_from_indices(g, &costs, net.id, &set)
        })
        .collect();

    Ok(ExactResult {
        optimal_wirelength,
        min_channel_width,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_instance;
    use crate::steiner::validate_tree;

    #[test]
    fn single_adjacent_net() {
        let inst = parse_instance("grid 2 2\nwidth 1\nnet 1 (0,0) (0,1)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.optimal_wirelength, 1.0);
        assert_eq!(r.min_channel_width, 1);
        assert_eq!(r.witness.len(), 1);
    }

    #[test]
    fn corner_pinned_nets_need_width_two() {
        let inst = parse_instance(
            "grid 2 3\nwidth 4\nnet 1 (0,0) (0,1) (1,0)\nnet 2 (0,0) (0,1) (1,0)\n",
        )
        .unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.min_channel_width, 2);
    }

    #[test]
    fn disjoint_nets_have_width_one() {
        let inst =
            parse_instance("grid 3 3\nwidth 4\nnet 1 (0,0) (0,2)\nnet 2 (2,0) (2,2)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.min_channel_width, 1);
        assert_eq!(r.optimal_wirelength, 4.0);
    }

    #[test]
    fn three_terminal_steiner_optimum_is_four() {
        let inst = parse_instance("grid 3 3\nwidth 4\nnet 1 (0,0) (0,2) (2,1)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.optimal_wirelength, 4.0);
        let net = &inst.netlist.nets()[0];
        assert_eq!(optimal_net_wirelength(&inst.grid, net).unwrap(), 4.0);
        validate_tree(&inst.grid, net, &r.witness[0]).unwrap();
    }

    #[test]
    fn two_terminal_optimum_is_manhattan_distance() {
        let inst = parse_instance("grid 4 4\nwidth 2\nnet 1 (0,1) (3,2)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.optimal_wirelength, 4.0);
    }

    #[test]
    fn witness_reproduces_reported_values() {
        let inst =
            parse_instance("grid 3 3\nwidth 1\nnet 1 (0,0) (2,2)\nnet 2 (0,2) (2,0)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        let total: f64 = r.witness.iter().map(|t| t.wirelength).sum();
        assert_eq!(total, r.optimal_wirelength);
        let usage = crate::lagrangian::compute_usage(&r.witness, &inst.grid);
        assert!((usage.channel_width() as usize) <= inst.w_init.max(r.min_channel_width));
        for (net, tree) in inst.netlist.nets().iter().zip(&r.witness) {
            validate_tree(&inst.grid, net, tree).unwrap();
        }
    }

    #[test]
    fn refuses_oversized_instances() {
        let inst = parse_instance("grid 5 5\nwidth 2\nnet 1 (0,0) (4,4)\n").unwrap();
        assert!(matches!(
            exact_route(&inst, &OracleLimits::default()),
            Err(Error::SizeLimit(_))
        ));

        let inst = parse_instance(
            "grid 2 2\nwidth 2\nnet 1 (0,0) (1,1)\nnet 2 (0,0) (1,1)\nnet 3 (0,0) (1,1)\nnet 4 (0,0) (1,1)\n",
        )
        .unwrap();
        assert!(matches!(
            exact_route(&inst, &OracleLimits::default()),
            Err(Error::SizeLimit(_))
        ));

        let inst = parse_instance("grid 2 2\nwidth 2\nnet 1 (0,0) (0,1) (1,0) (1,1)\n").unwrap();
        assert!(matches!(
            exact_route(&inst, &OracleLimits::default()),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn budget_exhaustion_errors_instead_of_approximating() {
        let inst = parse_instance(
            "grid 4 4\nwidth 1\nnet 1 (0,0) (3,3)\nnet 2 (0,3) (3,0)\nnet 3 (1,1) (2,2)\n",
        )
        .unwrap();
        let limits = OracleLimits {
            max_search_nodes: 10,
            ..Default::default()
        };
        assert!(matches!(exact_route(&inst, &limits), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn weighted_grid_optimum_takes_detour() {
        let inst =
            parse_instance("grid 2 2\nwidth 1\nweight 0 0 0 1 10\nnet 1 (0,0) (0,1)\n").unwrap();
        let r = exact_route(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.optimal_wirelength, 3.0);
        validate_tree(&inst.grid, &inst.netlist.nets()[0], &r.witness[0]).unwrap();
    }
}
