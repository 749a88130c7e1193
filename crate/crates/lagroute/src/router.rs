//! Full routing loop: for a candidate channel width W, iterate
//! (route all nets in parallel under frozen multipliers, measure edge usage,
//! update the multipliers) up to a fixed iteration cap, keep the best iterate,
//! and optionally sweep W downward to the smallest feasible value.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGraph;
use crate::lagrangian::{
    compute_usage, step_size_kkt, step_size_paralar, subgradient, KktOperator, MultiplierState,
    StepSchedule, SubgradientVector, UpdateMethod,
};
use crate::netlist::{Instance, Net};
use crate::steiner::{route_net, EffectiveCosts, RouteTree};

/// Routing configuration. `w_init: None` means "derive W from an initial
/// multiplier-free routing".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub method: UpdateMethod,
    pub step: StepSchedule,
    pub beta: f64,
    pub kkt_operator: KktOperator,
    pub max_iterations: usize,
    pub w_init: Option<usize>,
    pub w_sweep: bool,
    pub warm_start_lambda: bool,
    pub thread_count: usize,
    pub seed: u64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            method: UpdateMethod::PrimalDual,
            step: StepSchedule::Kkt,
            beta: 0.6,
            kkt_operator: KktOperator::Violation,
            max_iterations: 50,
            w_init: None,
            w_sweep: false,
            warm_start_lambda: false,
            thread_count: 1,
            seed: 0,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if self.thread_count < 1 {
            return Err(Error::InvalidArgument("thread_count must be >= 1".into()));
        }
        if let Some(w) = self.w_init {
            if w < 1 {
                return Err(Error::InvalidArgument("w_init must be >= 1".into()));
            }
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument("beta must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One sub-gradient iteration's metrics. `total_cost` is the relaxed
/// objective `sum_i sum_e (w_e + lambda_e) x_{e,i} - W * sum_e lambda_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub total_cost: f64,
    pub wirelength: f64,
    pub channel_width: u32,
    pub total_violation: f64,
}

/// History of one fixed-W run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRecord {
    pub w: usize,
    pub iterations: Vec<IterationRecord>,
    pub feasible: bool,
}

/// Final routing result: one tree per net plus derived metrics and the full
/// iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSolution {
    pub trees: Vec<RouteTree>,
    pub wirelength: f64,
    pub channel_width: u32,
    pub total_violation: f64,
    /// Max over nets of the largest terminal-to-terminal path cost inside the
    /// net's tree, in raw weight units. A stand-in for timing analysis, always
    /// labeled as a proxy in reports.
    pub delay_proxy: f64,
    pub history: Vec<WRecord>,
    /// Smallest W for which a zero-violation routing was found.
    pub achieved_w: Option<usize>,
    pub infeasible_at_w_init: bool,
}

/// Routes every net sequentially under frozen costs. This is the fallback
/// inner loop and the baseline the criterion benchmarks compare against.
pub fn route_all_sequential(
    g: &GridGraph,
    costs: &EffectiveCosts,
    nets: &[Net],
) -> Result<Vec<RouteTree>> {
    nets.iter().map(|n| route_net(g, costs, n)).collect()
}

#[cfg(feature = "parallel")]
pub(crate) struct WorkPool {
    pool: rayon::ThreadPool,
}

#[cfg(feature = "parallel")]
impl WorkPool {
    fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(WorkPool { pool })
    }

    fn route_all(
        &self,
        g: &GridGraph,
        costs: &EffectiveCosts,
        nets: &[Net],
    ) -> Result<Vec<RouteTree>> {
        use rayon::prelude::*;
        // par_iter + collect keeps net order, so the result is identical to
        // the sequential path for any thread count.
        self.pool
            .install(|| nets.par_iter().map(|n| route_net(g, costs, n)).collect())
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) struct WorkPool;

#[cfg(not(feature = "parallel"))]
impl WorkPool {
    fn new(_threads: usize) -> Result<Self> {
        Ok(WorkPool)
    }

    fn route_all(
        &self,
        g: &GridGraph,
        costs: &EffectiveCosts,
        nets: &[Net],
    ) -> Result<Vec<RouteTree>> {
        route_all_sequential(g, costs, nets)
    }
}

fn step_size(cfg: &RouterConfig, k: usize, sg: &SubgradientVector) -> Result<f64> {
    match cfg.step {
        StepSchedule::ParaLar => step_size_paralar(k),
        StepSchedule::Kkt => step_size_kkt(k, sg, cfg.kkt_operator),
    }
}

struct BestIterate {
    violation: f64,
    channel_width: u32,
    wirelength: f64,
    trees: Vec<RouteTree>,
}

impl BestIterate {
    fn better(&self, violation: f64, channel_width: u32, wirelength: f64) -> bool {
        (violation, channel_width, wirelength)
            < (self.violation, self.channel_width, self.wirelength)
    }
}

fn run_fixed_w_inner(
    instance: &Instance,
    cfg: &RouterConfig,
    w: usize,
    pool: &WorkPool,
    warm_lambda: Option<&MultiplierState>,
) -> Result<(RoutingSolution, MultiplierState)> {
    let g = &instance.grid;
    let nets = instance.netlist.nets();
    let mut state = match warm_lambda {
        Some(prev) => prev.restarted(),
        None => MultiplierState::new(g),
    };
    let mut prev_dir = vec![0.0; g.num_edges()];
    let mut prev_trees: Option<Vec<RouteTree>> = None;
    let mut best: Option<BestIterate> = None;
    let mut records = Vec::new();

    for _ in 0..cfg.max_iterations {
        let k = state.iteration();
        let costs = EffectiveCosts::new(g, state.lambda())?;
        let trees = pool.route_all(g, &costs, nets)?;
        let usage = compute_usage(&trees, g);
        let sg = subgradient(&usage, w);

        let wirelength: f64 = trees.iter().map(|t| t.wirelength).sum();
        let tree_cost: f64 = trees.iter().map(|t| t.cost).sum();
        let total_cost = tree_cost - w as f64 * state.lambda_sum();
        let channel_width = usage.channel_width();
        let total_violation = sg.total_violation();
        let alpha = step_size(cfg, k, &sg)?;

        records.push(IterationRecord {
            k,
            alpha,
            total_cost,
            wirelength,
            channel_width,
            total_violation,
        });

        let improved = match &best {
            None => true,
            Some(b) => b.better(total_violation, channel_width, wirelength),
        };
        if improved {
            best = Some(BestIterate {
                violation: total_violation,
                channel_width,
                wirelength,
                trees: trees.clone(),
            });
        }

        // A feasible point whose routing repeats the previous iteration is a
        // fixed point of the loop; further iterations cannot change anything.
        if total_violation == 0.0 && prev_trees.as_ref() == Some(&trees) {
            break;
        }

        match cfg.method {
            UpdateMethod::PrimalDual => state.update_primal_dual(&sg, alpha),
            UpdateMethod::Projected => state.update_projected(&sg, alpha),
            UpdateMethod::Deflected => {
                prev_dir = state.update_deflected(&sg, &prev_dir, alpha, cfg.beta);
            }
        }
        prev_trees = Some(trees);
    }

    let best = best.expect("at least one iteration ran");
    let feasible = best.violation == 0.0;
    let solution = RoutingSolution {
        delay_proxy: delay_proxy(g, nets, &best.trees)?,
        wirelength: best.wirelength,
        channel_width: best.channel_width,
        total_violation: best.violation,
        trees: best.trees,
        history: vec![WRecord {
            w,
            iterations: records,
            feasible,
        }],
        achieved_w: feasible.then_some(w),
        infeasible_at_w_init: false,
    };
    Ok((solution, state))
}

/// Runs the sub-gradient loop for a single fixed W.
pub fn run_fixed_w(instance: &Instance, cfg: &RouterConfig, w: usize) -> Result<RoutingSolution> {
    cfg.validate()?;
    if w < 1 {
        return Err(Error::InvalidArgument("W must be >= 1".into()));
    }
    let pool = WorkPool::new(cfg.thread_count)?;
    let (mut sol, _) = run_fixed_w_inner(instance, cfg, w, &pool, None)?;
    sol.infeasible_at_w_init = sol.total_violation > 0.0;
    Ok(sol)
}

/// Channel width of a multiplier-free routing; the default sweep start.
pub fn initial_channel_width(instance: &Instance, cfg: &RouterConfig) -> Result<usize> {
    let pool = WorkPool::new(cfg.thread_count)?;
    let costs = EffectiveCosts::from_weights(&instance.grid);
    let trees = pool.route_all(&instance.grid, &costs, instance.netlist.nets())?;
    Ok(compute_usage(&trees, &instance.grid).channel_width().max(1) as usize)
}

/// Sweeps W downward from `w_init` (or the derived start), re-running the
/// fixed-W loop while the previous W stayed violation-free. Returns the
/// solution at the smallest feasible W with the full per-W history.
pub fn run_sweep(instance: &Instance, cfg: &RouterConfig) -> Result<RoutingSolution> {
    cfg.validate()?;
    let pool = WorkPool::new(cfg.thread_count)?;
    let w_start = match cfg.w_init {
        Some(w) => w,
        None => initial_channel_width(instance, cfg)?,
    };

    let (mut best, mut state) = run_fixed_w_inner(instance, cfg, w_start, &pool, None)?;
    let mut history = best.history.clone();
    if best.total_violation > 0.0 {
        best.infeasible_at_w_init = true;
        best.achieved_w = None;
        return Ok(best);
    }

    let mut w = w_start;
    while w > 1 {
        w -= 1;
        let warm = cfg.warm_start_lambda.then_some(&state);
        let (sol, new_state) = run_fixed_w_inner(instance, cfg, w, &pool, warm)?;
        state = new_state;
        history.extend(sol.history.iter().cloned());
        if sol.total_violation == 0.0 {
            best = sol;
        } else {
            break;
        }
    }
    best.history = history;
    Ok(best)
}

/// Entry point selecting fixed-W or sweep mode from the config.
pub fn run(instance: &Instance, cfg: &RouterConfig) -> Result<RoutingSolution> {
    if cfg.w_sweep {
        run_sweep(instance, cfg)
    } else {
        let w = match cfg.w_init {
            Some(w) => w,
            None => initial_channel_width(instance, cfg)?,
        };
        run_fixed_w(instance, cfg, w)
    }
}

/// One row of a speedup measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub threads: usize,
    pub wall_time_s: f64,
    /// `time(1 thread) / time(n threads)`; > 1 means faster than the baseline.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTable {
    pub rows: Vec<SpeedupRow>,
    /// Whether every run produced bit-identical metrics and trees.
    pub metrics_identical: bool,
}

/// Runs the identical fixed-W workload once per thread count and reports wall
/// time and speedup relative to the single-thread run.
pub fn measure_speedup(
    instance: &Instance,
    cfg: &RouterConfig,
    thread_counts: &[usize],
) -> Result<SpeedupTable> {
    if thread_counts.is_empty() {
        return Err(Error::InvalidArgument("thread_counts is empty".into()));
    }
    if thread_counts.iter().any(|&t| t < 1) {
        return Err(Error::InvalidArgument("thread counts must be >= 1".into()));
    }
    let w = match cfg.w_init {
        Some(w) => w,
        None => initial_channel_width(instance, cfg)?,
    };

    let mut times = Vec::with_capacity(thread_counts.len());
    let mut reference: Option<RoutingSolution> = None;
    let mut metrics_identical = true;
    for &threads in thread_counts {
        let run_cfg = RouterConfig {
            thread_count: threads,
            ..cfg.clone()
        };
        let start = Instant::now();
        let sol = run_fixed_w(instance, &run_cfg, w)?;
        times.push(start.elapsed().as_secs_f64());
        match &reference {
            None => reference = Some(sol),
            Some(r) => {
                if r.trees != sol.trees
                    || r.wirelength != sol.wirelength
                    || r.channel_width != sol.channel_width
                    || r.total_violation != sol.total_violation
                {
                    metrics_identical = false;
                }
            }
        }
    }

    let baseline = thread_counts
        .iter()
        .position(|&t| t == 1)
        .map(|i| times[i])
        .unwrap_or(times[0]);
    let rows = thread_counts
        .iter()
        .zip(&times)
        .map(|(&threads, &t)| SpeedupRow {
            threads,
            wall_time_s: t,
            speedup: baseline / t,
        })
        .collect();
    Ok(SpeedupTable {
        rows,
        metrics_identical,
    })
}

/// Max over nets of the most expensive terminal-to-terminal path (in raw
/// weights) inside the net's tree.
pub fn delay_proxy(g: &GridGraph, nets: &[Net], trees: &[RouteTree]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (net, tree) in nets.iter().zip(trees) {
        // adjacency restricted to the tree
        let mut adj: std::collections::HashMap<usize, Vec<(usize, f64)>> =
            std::collections::HashMap::new();
        for &e in &tree.edges {
            let w = g.weight(e)?;
            let (a, b) = e.endpoints();
            let (ai, bi) = (g.vertex_index(a), g.vertex_index(b));
            adj.entry(ai).or_default().push((bi, w));
            adj.entry(bi).or_default().push((ai, w));
        }
        let terminals: std::collections::HashSet<usize> = net
            .terminals()
            .iter()
            .map(|&t| g.vertex_index(t))
            .collect();
        for &src in &terminals {
            // DFS: trees have unique paths, so one pass per source suffices.
            let mut stack = vec![(src, usize::MAX, 0.0)];
            while let Some((v, parent, dist)) = stack.pop() {
                if v != src && terminals.contains(&v) {
                    worst = worst.max(dist);
                }
                if let Some(nexts) = adj.get(&v) {
                    for &(u, w) in nexts {
                        if u != parent {
                            stack.push((u, v, dist + w));
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VertexId;
    use crate::netlist::{parse_instance, Net, Netlist};

    /// Two nets both pinned to the corner (0,0) plus its two neighbors. Every
    /// tree for either net must occupy at least one of the two corner edges
    /// and both corner edges cannot carry both nets, so the exact minimum
    /// channel width is 2 (confirmed by the exhaustive solver in the oracle
    /// tests).
    pub(crate) fn corner_instance() -> Instance {
        parse_instance(
            "grid 2 3\nwidth 4\nnet 1 (0,0) (0,1) (1,0)\nnet 2 (0,0) (0,1) (1,0)\n",
        )
        .unwrap()
    }

    #[test]
    fn single_net_is_immediately_feasible() {
        let inst = parse_instance("grid 4 4\nwidth 3\nnet 1 (0,0) (2,3)\n").unwrap();
        let cfg = RouterConfig::default();
        let sol = run_fixed_w(&inst, &cfg, 3).unwrap();
        assert_eq!(sol.total_violation, 0.0);
        assert_eq!(sol.wirelength, 5.0);
        assert_eq!(sol.achieved_w, Some(3));
        // feasible from the start: routes, confirms the fixed point, stops
        assert_eq!(sol.history[0].iterations.len(), 2);
    }

    #[test]
    fn corner_instance_w1_reports_violation() {
        let inst = corner_instance();
        let cfg = RouterConfig::default();
        let sol = run_fixed_w(&inst, &cfg, 1).unwrap();
        assert!(sol.total_violation > 0.0);
        assert_eq!(sol.achieved_w, None);
        assert!(sol.history[0].iterations.len() <= cfg.max_iterations);
    }

    #[test]
    fn corner_instance_w2_is_feasible() {
        let inst = corner_instance();
        let sol = run_fixed_w(&inst, &RouterConfig::default(), 2).unwrap();
        assert_eq!(sol.total_violation, 0.0);
        assert_eq!(sol.achieved_w, Some(2));
    }

    #[test]
    fn sweep_single_net_reaches_w1() {
        let inst = parse_instance("grid 4 4\nwidth 4\nnet 1 (0,0) (3,3)\n").unwrap();
        let cfg = RouterConfig {
            w_init: Some(4),
            w_sweep: true,
            ..Default::default()
        };
        let sol = run_sweep(&inst, &cfg).unwrap();
        assert_eq!(sol.achieved_w, Some(1));
        assert!(!sol.infeasible_at_w_init);
        assert_eq!(sol.history.len(), 4); // W = 4, 3, 2, 1
    }

    #[test]
    fn sweep_corner_instance_stops_at_two() {
        let inst = corner_instance();
        let cfg = RouterConfig {
            w_init: Some(4),
            w_sweep: true,
            ..Default::default()
        };
        let sol = run_sweep(&inst, &cfg).unwrap();
        assert_eq!(sol.achieved_w, Some(2));
        assert_eq!(sol.total_violation, 0.0);
    }

    #[test]
    fn sweep_disjoint_nets_reach_w1() {
        let inst =
            parse_instance("grid 4 4\nwidth 4\nnet 1 (0,0) (0,3)\nnet 2 (3,0) (3,3)\n").unwrap();
        let cfg = RouterConfig {
            w_init: Some(4),
            w_sweep: true,
            ..Default::default()
        };
        let sol = run_sweep(&inst, &cfg).unwrap();
        assert_eq!(sol.achieved_w, Some(1));
    }

    #[test]
    fn sweep_infeasible_at_w_init_is_flagged() {
        let inst = corner_instance();
        let cfg = RouterConfig {
            w_init: Some(1),
            w_sweep: true,
            ..Default::default()
        };
        let sol = run_sweep(&inst, &cfg).unwrap();
        assert!(sol.infeasible_at_w_init);
        assert!(sol.total_violation > 0.0);
        assert_eq!(sol.achieved_w, None);
    }

    #[test]
    fn warm_start_sweep_still_terminates() {
        let inst = corner_instance();
        let cfg = RouterConfig {
            w_init: Some(4),
            w_sweep: true,
            warm_start_lambda: true,
            ..Default::default()
        };
        let sol = run_sweep(&inst, &cfg).unwrap();
        assert_eq!(sol.achieved_w, Some(2));
    }

    #[test]
    fn metrics_recomputable_from_trees() {
        let inst = crate::netlist::generate_random(10, 10, 20, (2, 4), 5).unwrap();
        let sol = run_fixed_w(&inst, &RouterConfig::default(), 3).unwrap();
        let usage = compute_usage(&sol.trees, &inst.grid);
        assert_eq!(usage.channel_width(), sol.channel_width);
        let wl: f64 = sol.trees.iter().map(|t| t.wirelength).sum();
        assert_eq!(wl, sol.wirelength);
        let sg = subgradient(&usage, 3);
        assert_eq!(sg.total_violation(), sol.total_violation);
    }

    #[test]
    fn best_iterate_dominates_history() {
        let inst = crate::netlist::generate_random(12, 12, 40, (2, 4), 11).unwrap();
        let sol = run_fixed_w(&inst, &RouterConfig::default(), 2).unwrap();
        for rec in &sol.history[0].iterations {
            let best = (sol.total_violation, sol.channel_width, sol.wirelength);
            let rec_key = (rec.total_violation, rec.channel_width, rec.wirelength);
            assert!(best <= rec_key, "best {best:?} vs record {rec_key:?}");
        }
    }

    #[test]
    fn delay_proxy_on_known_tree() {
        let inst = parse_instance("grid 4 4\nwidth 4\nnet 1 (0,0) (0,3)\n").unwrap();
        let sol = run_fixed_w(&inst, &RouterConfig::default(), 4).unwrap();
        assert_eq!(sol.delay_proxy, 3.0);
    }

    #[test]
    fn speedup_single_thread_is_unity() {
        let inst = crate::netlist::generate_random(8, 8, 10, (2, 3), 3).unwrap();
        let cfg = RouterConfig::default();
        let table = measure_speedup(&inst, &cfg, &[1]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].speedup, 1.0);
        assert!(table.metrics_identical);
    }

    #[test]
    fn thread_counts_do_not_change_results() {
        let inst = crate::netlist::generate_random(15, 15, 30, (2, 4), 17).unwrap();
        let base = run_fixed_w(
            &inst,
            &RouterConfig {
                thread_count: 1,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        for threads in [2, 3, 4] {
            let sol = run_fixed_w(
                &inst,
                &RouterConfig {
                    thread_count: threads,
                    ..Default::default()
                },
                3,
            )
            .unwrap();
            assert_eq!(sol.trees, base.trees);
            assert_eq!(sol.wirelength, base.wirelength);
            assert_eq!(sol.history, base.history);
        }
    }

    #[test]
    fn iteration_cap_is_honored() {
        let inst = corner_instance();
        for method in [
            UpdateMethod::PrimalDual,
            UpdateMethod::Projected,
            UpdateMethod::Deflected,
        ] {
            let cfg = RouterConfig {
                method,
                max_iterations: 50,
                ..Default::default()
            };
            let sol = run_fixed_w(&inst, &cfg, 1).unwrap();
            assert!(sol.history[0].iterations.len() <= 50);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = crate::grid::GridGraph::build(2, 2, 1.0).unwrap();
        let net = Net::new(1, vec![VertexId::new(0, 0), VertexId::new(1, 1)], &g).unwrap();
        let inst = Instance::new(g, Netlist::new(vec![net]).unwrap(), 1).unwrap();
        let cfg = RouterConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(run_fixed_w(&inst, &cfg, 1).is_err());
        assert!(run_fixed_w(&inst, &RouterConfig::default(), 0).is_err());
        let cfg = RouterConfig {
            thread_count: 0,
            ..Default::default()
        };
        assert!(run_fixed_w(&inst, &cfg, 1).is_err());
    }
}
