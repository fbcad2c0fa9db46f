//! Sequencing of waste-collection micro-routes into vehicle routes.
//!
//! The crate covers the whole study workflow for one city:
//!
//! * [`model`]: single-shift instances, waste scenarios and the empirical
//!   service-time regression;
//! * [`milp`]: the three-index (landfill as intermediate facility) and the
//!   two-index MTZ (transfer station) formulations, with MPS/LP export and
//!   solution extraction;
//! * [`evaluator`]: feasibility and metrics of routing plans;
//! * [`exact`]: brute-force oracle and depth-first branch-and-bound;
//! * [`heuristic`]: greedy construction and simulated annealing;
//! * [`analysis`]: scenario sweeps, transfer trips and shift aggregation.

pub mod analysis;
pub mod evaluator;
pub mod exact;
pub mod heuristic;
pub mod milp;
pub mod model;
pub mod synthetic;

pub use evaluator::{
    evaluate_plan, evaluate_route, PlanMetrics, RouteMetrics, RoutingPlan, TimeAccounting,
};
pub use exact::{solve_brute_force, solve_exact, SearchLimits, SolveResult, SolveStatus};
pub use heuristic::{construct_initial, solve_heuristic, AnnealingParams};
pub use model::{
    load_instance, save_instance, CaseKind, Instance, InstanceData, MicroRoute, Scenario,
    ServiceTimeModel, Stop,
};
