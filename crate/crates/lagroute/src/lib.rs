//! Parallel router for nets on weighted grid graphs.
//!
//! The channel-width constraints that couple nets together are relaxed into
//! the objective with per-edge Lagrange multipliers; the resulting problem
//! decomposes per net and is solved by routing every net as a Steiner tree
//! under the effective costs `w_e + lambda_e`, then updating the multipliers
//! by sub-gradient iteration. Three update variants (primal-dual, projected,
//! deflected) and two step-size schedules are provided, along with an exact
//! enumeration oracle for tiny instances and a speedup measurement harness.
//!
//! The `parallel` feature (on by default) routes nets through a rayon work
//! pool; without it everything runs sequentially with identical results.

pub mod error;
pub mod grid;
pub mod lagrangian;
pub mod netlist;
pub mod oracle;
pub mod router;
pub mod steiner;

pub use error::{Error, Result};
pub use grid::{EdgeId, GridGraph, VertexId};
pub use lagrangian::{KktOperator, MultiplierState, StepSchedule, UpdateMethod};
pub use netlist::{generate_random, parse_instance, serialize_instance, Instance, Net, Netlist};
pub use oracle::{exact_route, ExactResult, OracleLimits};
pub use router::{
    measure_speedup, run, run_fixed_w, run_sweep, RouterConfig, RoutingSolution, SpeedupTable,
};
pub use steiner::{route_net, EffectiveCosts, RouteTree};
