//! Route and plan evaluation.
//!
//! The evaluator is the single feasibility authority of the crate: the
//! solvers, the MILP extractor and the analysis layer all go through
//! [`scan_nodes`] or the public wrappers built on it.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CaseKind, Instance, Stop};

/// Absolute tolerance for distance and time comparisons.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unknown stop {0}")]
    UnknownStop(Stop),
    #[error("route {route} must start and end at the depot")]
    MalformedRoute { route: usize },
    #[error("micro-route {0} appears more than once")]
    DuplicateMicroRoute(u32),
    #[error("micro-route {0} is not visited")]
    MissingMicroRoute(u32),
}

/// How route duration is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAccounting {
    /// Only arcs between two micro-routes are charged (travel plus service at the head).
    Literal,
    /// Every arc's travel time plus the service time of every visited micro-route.
    #[default]
    Full,
}

/// An ordered list of stops beginning and ending at the depot.
pub type Route = Vec<Stop>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub routes: Vec<Route>,
}

impl RoutingPlan {
    pub fn new(routes: Vec<Route>) -> Self {
        RoutingPlan { routes }
    }

    /// Routes that visit at least one micro-route.
    pub fn nonempty_routes(&self) -> usize {
        self.routes
            .iter()
            .filter(|r| r.iter().any(|s| matches!(s, Stop::Micro(_))))
            .count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}

/// Renders a route as `D-8-L-D`.
pub fn format_route(route: &[Stop]) -> String {
    route
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Load carried on leg `leg` exceeds the vehicle capacity.
    Capacity {
        leg: usize,
        load_kg: f64,
    },
    TimeLimit {
        duration_h: f64,
    },
    /// The depot is entered directly from a micro-route.
    MissingLandfillBeforeDepot {
        position: usize,
    },
    /// A landfill stop in a transfer-station route.
    IllegalLandfill {
        position: usize,
    },
    /// The vehicle leaves the depot more than once in the current situation.
    DepotRevisit {
        position: usize,
    },
    /// The vehicle goes to the landfill straight from the depot and then collects.
    LandfillBeforeCollection,
    /// Two consecutive identical stops.
    RepeatedStop {
        position: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub from: Stop,
    pub to: Stop,
    pub load_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    /// Arc distance plus the internal distance of every visited micro-route.
    pub distance: f64,
    /// Distance over inter-stop arcs only (the optimization objective).
    pub arc_distance: f64,
    pub duration: f64,
    pub legs: Vec<Leg>,
    pub waste_collected: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub total_distance: f64,
    pub total_arc_distance: f64,
    pub total_duration: f64,
    pub vehicles_used: usize,
    pub per_route: Vec<RouteMetrics>,
    pub feasible: bool,
}

/// Summary of a route given as matrix nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeScan {
    pub arc_distance: f64,
    pub internal_distance: f64,
    pub duration: f64,
    pub waste: f64,
    pub max_load: f64,
    pub violations: Vec<Violation>,
}

impl NodeScan {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans a route expressed as matrix nodes. The route must start and end
/// at the depot. Loads are charged when leaving a micro-route and reset to
/// zero when leaving the depot or the landfill.
pub fn scan_nodes(
    inst: &Instance,
    nodes: &[usize],
    accounting: TimeAccounting,
    mut legs: Option<&mut Vec<Leg>>,
) -> NodeScan {
    let depot = inst.depot();
    let landfill = inst.landfill();
    let cap_tol = EPS * inst.capacity().max(1.0);
    let mut out = NodeScan::default();
    let mut load = 0.0;
    let mut departures = 0usize;
    let mut idle_landfill_start = false;
    for (pos, pair) in nodes.windows(2).enumerate() {
        let (i, j) = (pair[0], pair[1]);
        if let Some(m) = inst.node_micro(i) {
            load += inst.waste(m);
        } else {
            load = 0.0;
        }
        if i == j && nodes.len() > 2 {
            out.violations
                .push(Violation::RepeatedStop { position: pos + 1 });
        }
        if i == depot {
            departures += 1;
            if inst.case_kind() == CaseKind::CurrentSituation && departures > 1 {
                out.violations
                    .push(Violation::DepotRevisit { position: pos });
            }
            if Some(j) == landfill && pos + 2 < nodes.len() {
                idle_landfill_start = true;
            }
        }
        if j == depot
            && inst.case_kind() == CaseKind::CurrentSituation
            && inst.node_micro(i).is_some()
        {
            out.violations
                .push(Violation::MissingLandfillBeforeDepot { position: pos + 1 });
        }
        if load > inst.capacity() + cap_tol {
            out.violations.push(Violation::Capacity {
                leg: pos,
                load_kg: load,
            });
        }
        out.max_load = out.max_load.max(load);
        out.arc_distance += inst.d(i, j);
        let both_micro = inst.node_micro(i).is_some() && inst.node_micro(j).is_some();
        if accounting == TimeAccounting::Full || both_micro {
            out.duration += inst.h(i, j) + inst.node_service(j);
        }
        if let Some(m) = inst.node_micro(j) {
            out.internal_distance += inst.micro_routes()[m].internal_distance;
            out.waste += inst.waste(m);
        }
        if let Some(legs) = legs.as_deref_mut() {
            legs.push(Leg {
                from: inst.stop(i),
                to: inst.stop(j),
                load_kg: load,
            });
        }
    }
    if idle_landfill_start && nodes.iter().any(|&n| inst.node_micro(n).is_some()) {
        out.violations.push(Violation::LandfillBeforeCollection);
    }
    if out.duration > inst.time_limit() + EPS {
        out.violations.push(Violation::TimeLimit {
            duration_h: out.duration,
        });
    }
    out
}

fn route_nodes(
    inst: &Instance,
    route: &[Stop],
    index: usize,
) -> Result<(Vec<usize>, Vec<Violation>), EvalError> {
    if route.len() < 2 || route[0] != Stop::Depot || route[route.len() - 1] != Stop::Depot {
        return Err(EvalError::MalformedRoute { route: index });
    }
    let mut nodes = Vec::with_capacity(route.len());
    let mut extra = Vec::new();
    for (pos, stop) in route.iter().enumerate() {
        match (stop, inst.case_kind()) {
            (Stop::Landfill, CaseKind::TransferStation) => {
                extra.push(Violation::IllegalLandfill { position: pos });
            }
            _ => nodes.push(inst.node_of(*stop).ok_or(EvalError::UnknownStop(*stop))?),
        }
    }
    Ok((nodes, extra))
}

/// Evaluates one route with full time accounting.
pub fn evaluate_route(inst: &Instance, route: &[Stop]) -> Result<RouteMetrics, EvalError> {
    evaluate_route_with(inst, route, TimeAccounting::Full)
}

pub fn evaluate_route_with(
    inst: &Instance,
    route: &[Stop],
    accounting: TimeAccounting,
) -> Result<RouteMetrics, EvalError> {
    evaluate_route_at(inst, route, accounting, 0)
}

fn evaluate_route_at(
    inst: &Instance,
    route: &[Stop],
    accounting: TimeAccounting,
    index: usize,
) -> Result<RouteMetrics, EvalError> {
    let (nodes, mut violations) = route_nodes(inst, route, index)?;
    let mut legs = Vec::with_capacity(nodes.len().saturating_sub(1));
    let scan = scan_nodes(inst, &nodes, accounting, Some(&mut legs));
    violations.extend(scan.violations);
    Ok(RouteMetrics {
        distance: scan.arc_distance + scan.internal_distance,
        arc_distance: scan.arc_distance,
        duration: scan.duration,
        legs,
        waste_collected: scan.waste,
        feasible: violations.is_empty(),
        violations,
    })
}

/// Evaluates a whole plan: coverage, per-route metrics and totals.
pub fn evaluate_plan(inst: &Instance, plan: &RoutingPlan) -> Result<PlanMetrics, EvalError> {
    evaluate_plan_with(inst, plan, TimeAccounting::Full)
}

pub fn evaluate_plan_with(
    inst: &Instance,
    plan: &RoutingPlan,
    accounting: TimeAccounting,
) -> Result<PlanMetrics, EvalError> {
    let mut seen: HashMap<u32, usize> = HashMap::new();
    let mut per_route = Vec::with_capacity(plan.routes.len());
    for (r, route) in plan.routes.iter().enumerate() {
        for stop in route {
            if let Stop::Micro(id) = stop {
                if inst.micro_index(*id).is_none() {
                    return Err(EvalError::UnknownStop(*stop));
                }
                let count = seen.entry(*id).or_insert(0);
                *count += 1;
                if *count > 1 {
                    return Err(EvalError::DuplicateMicroRoute(*id));
                }
            }
        }
        per_route.push(evaluate_route_at(inst, route, accounting, r)?);
    }
    if let Some(missing) = inst
        .micro_routes()
        .iter()
        .find(|m| !seen.contains_key(&m.id))
    {
        return Err(EvalError::MissingMicroRoute(missing.id));
    }
    Ok(PlanMetrics {
        total_distance: per_route.iter().map(|r| r.distance).sum(),
        total_arc_distance: per_route.iter().map(|r| r.arc_distance).sum(),
        total_duration: per_route.iter().map(|r| r.duration).sum(),
        vehicles_used: plan.nonempty_routes(),
        feasible: per_route.iter().all(|r| r.feasible),
        per_route,
    })
}

/// Packs the depot-to-depot tours of a transfer-station plan into vehicles.
///
/// A vehicle may unload at the station and start another tour as long as
/// the summed duration stays within the shift limit. Tours are placed first
/// fit by decreasing duration. Current-situation plans are returned as is,
/// since a vehicle leaves the depot only once.
pub fn consolidate_tours(inst: &Instance, plan: &RoutingPlan) -> Result<RoutingPlan, EvalError> {
    if inst.case_kind() == CaseKind::CurrentSituation {
        return Ok(plan.clone());
    }
    let mut tours: Vec<(Vec<Stop>, f64)> = Vec::new();
    for (r, route) in plan.routes.iter().enumerate() {
        if route.len() < 2 || route[0] != Stop::Depot || route[route.len() - 1] != Stop::Depot {
            return Err(EvalError::MalformedRoute { route: r });
        }
        let mut current = vec![Stop::Depot];
        for stop in &route[1..] {
            current.push(*stop);
            if *stop == Stop::Depot {
                if current.len() > 2 {
                    let duration =
                        evaluate_route_at(inst, &current, TimeAccounting::Full, r)?.duration;
                    tours.push((std::mem::replace(&mut current, vec![Stop::Depot]), duration));
                } else {
                    current = vec![Stop::Depot];
                }
            }
        }
    }
    // Stable sort keeps the input order among equal durations.
    tours.sort_by(|a, b| b.1.total_cmp(&a.1));
    let limit = inst.time_limit() + EPS;
    let mut vehicles: Vec<(Vec<Stop>, f64)> = Vec::new();
    for (tour, duration) in tours {
        match vehicles
            .iter_mut()
            .find(|(_, used)| *used + duration <= limit)
        {
            Some((route, used)) => {
                route.extend_from_slice(&tour[1..]);
                *used += duration;
            }
            None => vehicles.push((tour, duration)),
        }
    }
    Ok(RoutingPlan::new(
        vehicles.into_iter().map(|(r, _)| r).collect(),
    ))
}

/// Aligned text table with one row per route.
pub fn metrics_table(plan: &RoutingPlan, metrics: &PlanMetrics) -> String {
    let sequences: Vec<String> = plan.routes.iter().map(|r| format_route(r)).collect();
    let width = sequences
        .iter()
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
        .max("Sequence of stops".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5}  {:<width$}  {:>19}  {:>14}  {:>19}  {:>8}",
        "Route",
        "Sequence of stops",
        "Route distance [km]",
        "Route time [h]",
        "MSW collection [kg]",
        "Feasible"
    );
    for (r, (seq, m)) in sequences.iter().zip(&metrics.per_route).enumerate() {
        let _ = writeln!(
            out,
            "{:>5}  {:<width$}  {:>19.2}  {:>14.2}  {:>19.2}  {:>8}",
            r + 1,
            seq,
            m.distance,
            m.duration,
            m.waste_collected,
            if m.feasible { "yes" } else { "no" }
        );
    }
    let _ = writeln!(
        out,
        "{:>5}  {:<width$}  {:>19.2}  {:>14.2}  {:>19.2}  {:>8}",
        "Total",
        format!("{} vehicles", metrics.vehicles_used),
        metrics.total_distance,
        metrics.total_duration,
        metrics
            .per_route
            .iter()
            .map(|m| m.waste_collected)
            .sum::<f64>(),
        if metrics.feasible { "yes" } else { "no" }
    );
    out
}
