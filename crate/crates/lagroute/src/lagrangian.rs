//! Lagrange multipliers for the relaxed channel-width constraints, the
//! per-edge sub-gradient, the three multiplier update variants, and the two
//! step-size schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGraph;
use crate::steiner::RouteTree;

/// Multiplier update variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMethod {
    /// `lambda' = lambda + alpha * max(0, u - W)`; never decreases.
    PrimalDual,
    /// `lambda' = max(0, lambda + alpha * (u - W))`; may decrease on slack edges.
    Projected,
    /// Projected update along `d = g + beta * d_prev`.
    Deflected,
}

impl std::fmt::Display for UpdateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateMethod::PrimalDual => write!(f, "primal-dual"),
            UpdateMethod::Projected => write!(f, "projected"),
            UpdateMethod::Deflected => write!(f, "deflected"),
        }
    }
}

impl std::str::FromStr for UpdateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal-dual" => Ok(UpdateMethod::PrimalDual),
            "projected" => Ok(UpdateMethod::Projected),
            "deflected" => Ok(UpdateMethod::Deflected),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected primal-dual, projected, or deflected)"
            ))),
        }
    }
}

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `alpha_k = 0.01 / (k + 1)`, a pure iteration-count schedule.
    ParaLar,
    /// `alpha_k = (1/k) / ||T_k||_2`, scaled by the violation residual.
    Kkt,
}

impl std::fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepSchedule::ParaLar => write!(f, "paralar"),
            StepSchedule::Kkt => write!(f, "kkt"),
        }
    }
}

impl std::str::FromStr for StepSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paralar" => Ok(StepSchedule::ParaLar),
            "kkt" => Ok(StepSchedule::Kkt),
            other => Err(Error::InvalidArgument(format!(
                "unknown step schedule '{other}' (expected paralar or kkt)"
            ))),
        }
    }
}

/// Which residual feeds the KKT step-size norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KktOperator {
    /// The projected violation `max(0, u - W)` (default).
    Violation,
    /// The raw sub-gradient `u - W`.
    RawSubgradient,
}

/// Per-edge multipliers plus the iteration counter. `lambda` is indexed by the
/// grid's dense edge index; all entries stay nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierState {
    lambda: Vec<f64>,
    k: usize,
    last_alpha: f64,
}

impl MultiplierState {
    /// All-zero multipliers, iteration counter at 1.
    pub fn new(g: &GridGraph) -> Self {
        MultiplierState {
            lambda: vec![0.0; g.num_edges()],
            k: 1,
            last_alpha: 0.0,
        }
    }

    /// Same multipliers, iteration counter reset to 1. Used when warm-starting
    /// the next W value of a sweep.
    pub fn restarted(&self) -> Self {
        MultiplierState {
            lambda: self.lambda.clone(),
            k: 1,
            last_alpha: 0.0,
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn last_alpha(&self) -> f64 {
        self.last_alpha
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `lambda_e += alpha * max(0, g_e)`. Componentwise nondecreasing.
    pub fn update_primal_dual(&mut self, sg: &SubgradientVector, alpha: f64) {
        debug_assert!(alpha >= 0.0);
        for (l, &v) in self.lambda.iter_mut().zip(sg.violation()) {
            *l += alpha * v;
        }
        self.k += 1;
        self.last_alpha = alpha;
    }

    /// `lambda_e = max(0, lambda_e + alpha * g_e)`.
    pub fn update_projected(&mut self, sg: &SubgradientVector, alpha: f64) {
        debug_assert!(alpha >= 0.0);
        for (l, &ge) in self.lambda.iter_mut().zip(sg.raw()) {
            *l = (*l + alpha * ge).max(0.0);
        }
        self.k += 1;
        self.last_alpha = alpha;
    }

    /// Projected update along the deflected direction `d = g + beta * d_prev`.
    /// Returns the new direction for the next iteration.
    pub fn update_deflected(
        &mut self,
        sg: &SubgradientVector,
        prev_direction: &[f64],
        alpha: f64,
        beta: f64,
    ) -> Vec<f64> {
        debug_assert!(alpha >= 0.0);
        debug_assert!((0.0..1.0).contains(&beta));
        let direction: Vec<f64> = sg
            .raw()
            .iter()
            .zip(prev_direction)
            .map(|(&ge, &de)| ge + beta * de)
            .collect();
        for (l, &de) in self.lambda.iter_mut().zip(&direction) {
            *l = (*l + alpha * de).max(0.0);
        }
        self.k += 1;
        self.last_alpha = alpha;
        direction
    }
}

/// Per-edge usage counts `u_e`: how many route trees contain each edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageVector {
    usage: Vec<u32>,
}

impl UsageVector {
    pub fn get(&self, edge_idx: usize) -> u32 {
        self.usage[edge_idx]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.usage
    }

    /// Largest usage over all edges: the observed channel width.
    pub fn channel_width(&self) -> u32 {
        self.usage.iter().copied().max().unwrap_or(0)
    }
}

/// Counts trees per edge. Integer sums, so the result is independent of tree
/// order and of how partial counts were accumulated.
pub fn compute_usage(trees: &[RouteTree], g: &GridGraph) -> UsageVector {
    let mut usage = vec![0u32; g.num_edges()];
    for t in trees {
        for &e in &t.edges {
            usage[g.edge_index(e).expect("tree edge in grid")] += 1;
        }
    }
    UsageVector { usage }
}

/// The raw sub-gradient `g_e = u_e - W` and its projected violation
/// `v_e = max(0, g_e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientVector {
    g: Vec<f64>,
    v: Vec<f64>,
}

impl SubgradientVector {
    pub fn raw(&self) -> &[f64] {
        &self.g
    }

    pub fn violation(&self) -> &[f64] {
        &self.v
    }

    /// Total constraint violation `sum_e max(0, u_e - W)`.
    pub fn total_violation(&self) -> f64 {
        self.v.iter().sum()
    }

    fn norm(values: &[f64]) -> f64 {
        values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn subgradient(u: &UsageVector, w: usize) -> SubgradientVector {
    let g: Vec<f64> = u.usage.iter().map(|&ue| ue as f64 - w as f64).collect();
    let v: Vec<f64> = g.iter().map(|&ge| ge.max(0.0)).collect();
    SubgradientVector { g, v }
}

/// `alpha_k = 0.01 / (k + 1)`, with 1-based k.
pub fn step_size_paralar(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("iteration counter must be >= 1".into()));
    }
    Ok(0.01 / (k as f64 + 1.0))
}

/// `alpha_k = (1/k) / ||T_k||_2`, where the residual is selected by `op`.
/// A zero residual norm means the current W is satisfied, so alpha is 0.
pub fn step_size_kkt(k: usize, sg: &SubgradientVector, op: KktOperator) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("iteration counter must be >= 1".into()));
    }
    let norm = match op {
        KktOperator::Violation => SubgradientVector::norm(&sg.v),
        KktOperator::RawSubgradient => SubgradientVector::norm(&sg.g),
    };
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 / k as f64) / norm)
}
