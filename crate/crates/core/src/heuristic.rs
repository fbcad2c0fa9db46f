//! Greedy construction and simulated annealing.
//!
//! A plan is held as routes of trips: a trip is the run of micro-routes
//! between two unloads. Transfer-station routes always have a single trip.
//! Every candidate plan goes through the evaluator; infeasible neighbours are
//! rejected, never penalized.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{scan_nodes, RoutingPlan, TimeAccounting};
use crate::exact::{root_lower_bound, SolveResult, SolveStatus};
use crate::model::{CaseKind, Instance, Stop};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("invalid annealing parameters: {0}")]
    InvalidParams(String),
    #[error("micro-route {id} cannot be served by a vehicle on its own")]
    ConstructionFailed { id: u32 },
}

/// Annealing schedule. `None` fields are sized from the instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingParams {
    /// Defaults to 10% of the constructed plan's distance.
    pub initial_temperature: Option<f64>,
    pub cooling_rate: f64,
    /// Defaults to 50 moves per micro-route.
    pub moves_per_epoch: Option<usize>,
    pub min_temperature: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Stop after this many epochs even if the temperature is still high.
    pub max_epochs: Option<usize>,
    pub time_accounting: TimeAccounting,
}

impl Default for AnnealingParams {
    fn default() -> Self {
        AnnealingParams {
            initial_temperature: None,
            cooling_rate: 0.97,
            moves_per_epoch: None,
            min_temperature: 1e-3,
            seed: 0,
            restarts: 4,
            max_epochs: None,
            time_accounting: TimeAccounting::Full,
        }
    }
}

impl AnnealingParams {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        let bad = |msg: String| Err(HeuristicError::InvalidParams(msg));
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad(format!(
                "cooling_rate must be in (0, 1), got {}",
                self.cooling_rate
            ));
        }
        if !(self.min_temperature.is_finite() && self.min_temperature > 0.0) {
            return bad(format!(
                "min_temperature must be > 0, got {}",
                self.min_temperature
            ));
        }
        if let Some(t0) = self.initial_temperature {
            if !(t0.is_finite() && t0 > self.min_temperature) {
                return bad(format!(
                    "initial_temperature {t0} must exceed min_temperature"
                ));
            }
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1".into());
        }
        Ok(())
    }
}

type Trip = Vec<usize>;
type Route = Vec<Trip>;

#[derive(Debug, Clone, PartialEq)]
struct Solution {
    routes: Vec<Route>,
}

struct Ctx<'a> {
    inst: &'a Instance,
    accounting: TimeAccounting,
    cs: bool,
}

impl Ctx<'_> {
    fn nodes(&self, route: &Route) -> Vec<usize> {
        let depot = self.inst.depot();
        let mut nodes = vec![depot];
        for trip in route {
            nodes.extend(trip.iter().map(|&m| self.inst.micro_node(m)));
            if let Some(l) = self.inst.landfill() {
                nodes.push(l);
            }
        }
        nodes.push(depot);
        nodes
    }

    /// Arc distance of a feasible route.
    fn route_cost(&self, route: &Route) -> Option<f64> {
        let scan = scan_nodes(self.inst, &self.nodes(route), self.accounting, None);
        scan.feasible().then_some(scan.arc_distance)
    }

    fn cost(&self, sol: &Solution) -> Option<f64> {
        sol.routes.iter().map(|r| self.route_cost(r)).sum()
    }

    fn to_plan(&self, sol: &Solution) -> RoutingPlan {
        RoutingPlan::new(
            sol.routes
                .iter()
                .map(|r| {
                    self.nodes(r)
                        .into_iter()
                        .map(|n| self.inst.stop(n))
                        .collect()
                })
                .collect(),
        )
    }
}

/// Greedy nearest-feasible construction with full time accounting.
pub fn construct_initial(inst: &Instance, seed: u64) -> Result<RoutingPlan, HeuristicError> {
    construct_initial_with(inst, seed, TimeAccounting::Full)
}

pub fn construct_initial_with(
    inst: &Instance,
    seed: u64,
    accounting: TimeAccounting,
) -> Result<RoutingPlan, HeuristicError> {
    let ctx = Ctx {
        inst,
        accounting,
        cs: inst.case_kind() == CaseKind::CurrentSituation,
    };
    let sol = construct(&ctx, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(ctx.to_plan(&sol))
}

/// Each route starts at a seeded random micro-route and then repeatedly
/// takes the nearest one that keeps it feasible; in the current situation
/// it unloads at the landfill when nothing else fits in the trip.
fn construct(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<Solution, HeuristicError> {
    let inst = ctx.inst;
    let id = |m: usize| inst.micro_routes()[m].id;
    let mut left: Vec<usize> = (0..inst.num_micro()).collect();
    let mut routes = Vec::new();
    while !left.is_empty() {
        let first = left.remove(rng.gen_range(0..left.len()));
        let mut route: Route = vec![vec![first]];
        if ctx.route_cost(&route).is_none() {
            return Err(HeuristicError::ConstructionFailed { id: id(first) });
        }
        loop {
            let last = *route
                .last()
                .and_then(|t| t.last())
                .expect("route has a micro-route");
            let from = inst.micro_node(last);
            let nearest = |from: usize, left: &[usize]| {
                let mut order = left.to_vec();
                order.sort_by(|&a, &b| {
                    inst.d(from, inst.micro_node(a))
                        .total_cmp(&inst.d(from, inst.micro_node(b)))
                        .then(id(a).cmp(&id(b)))
                });
                order
            };
            let mut placed = None;
            for j in nearest(from, &left) {
                route.last_mut().expect("trip").push(j);
                if ctx.route_cost(&route).is_some() {
                    placed = Some(j);
                    break;
                }
                route.last_mut().expect("trip").pop();
            }
            if placed.is_none() && ctx.cs {
                let landfill = inst.landfill().expect("landfill");
                for j in nearest(landfill, &left) {
                    route.push(vec![j]);
                    if ctx.route_cost(&route).is_some() {
                        placed = Some(j);
                        break;
                    }
                    route.pop();
                }
            }
            match placed {
                Some(j) => left.retain(|&m| m != j),
                None => break,
            }
        }
        routes.push(route);
    }
    Ok(Solution { routes })
}

/// Change in arc distance when the stops at positions `a..=b` of `nodes`
/// are reversed. Requires `0 < a < b < nodes.len() - 1`.
pub fn two_opt_delta(inst: &Instance, nodes: &[usize], a: usize, b: usize) -> f64 {
    let (prev, next) = (nodes[a - 1], nodes[b + 1]);
    let mut before = inst.d(prev, nodes[a]) + inst.d(nodes[b], next);
    let mut after = inst.d(prev, nodes[b]) + inst.d(nodes[a], next);
    for k in a..b {
        before += inst.d(nodes[k], nodes[k + 1]);
        after += inst.d(nodes[k + 1], nodes[k]);
    }
    after - before
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MoveKind {
    Relocate,
    Swap,
    TwoOpt,
    Landfill,
    Merge,
    Split,
}

/// Positions `(route, trip, index)` of every micro-route.
fn positions(sol: &Solution) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (r, route) in sol.routes.iter().enumerate() {
        for (t, trip) in route.iter().enumerate() {
            out.extend((0..trip.len()).map(|p| (r, t, p)));
        }
    }
    out
}

fn normalize(sol: &mut Solution) {
    for route in &mut sol.routes {
        route.retain(|t| !t.is_empty());
    }
    sol.routes.retain(|r| !r.is_empty());
}

fn applicable(sol: &Solution, cs: bool) -> Vec<MoveKind> {
    let micros: usize = sol.routes.iter().flatten().map(|t| t.len()).sum();
    let long_trip = sol.routes.iter().flatten().any(|t| t.len() >= 2);
    let multi_trip = sol.routes.iter().any(|r| r.len() >= 2);
    let big_route = sol
        .routes
        .iter()
        .any(|r| r.iter().map(|t| t.len()).sum::<usize>() >= 2);
    let mut kinds = Vec::new();
    if micros >= 1 {
        kinds.push(MoveKind::Relocate);
    }
    if micros >= 2 {
        kinds.push(MoveKind::Swap);
    }
    if long_trip {
        kinds.push(MoveKind::TwoOpt);
    }
    if cs && (long_trip || multi_trip) {
        kinds.push(MoveKind::Landfill);
    }
    if sol.routes.len() >= 2 {
        kinds.push(MoveKind::Merge);
    }
    if big_route {
        kinds.push(MoveKind::Split);
    }
    kinds
}

/// Draws a neighbour of `sol`. Returns the new solution and, for 2-opt, the
/// distance delta computed incrementally.
fn neighbour(ctx: &Ctx, sol: &Solution, rng: &mut ChaCha8Rng) -> Option<(Solution, Option<f64>)> {
    let kinds = applicable(sol, ctx.cs);
    let kind = *kinds.choose(rng)?;
    let mut next = sol.clone();
    let mut delta = None;
    match kind {
        MoveKind::Relocate => {
            let pos = positions(sol);
            let (r, t, p) = pos[rng.gen_range(0..pos.len())];
            let m = next.routes[r][t].remove(p);
            let r2 = rng.gen_range(0..next.routes.len());
            let t2 = rng.gen_range(0..next.routes[r2].len());
            let p2 = rng.gen_range(0..=next.routes[r2][t2].len());
            next.routes[r2][t2].insert(p2, m);
        }
        MoveKind::Swap => {
            let pos = positions(sol);
            let i = rng.gen_range(0..pos.len());
            let mut j = rng.gen_range(0..pos.len() - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (pos[i], pos[j]);
            let (ma, mb) = (sol.routes[a.0][a.1][a.2], sol.routes[b.0][b.1][b.2]);
            next.routes[a.0][a.1][a.2] = mb;
            next.routes[b.0][b.1][b.2] = ma;
        }
        MoveKind::TwoOpt => {
            let trips: Vec<(usize, usize)> = sol
                .routes
                .iter()
                .enumerate()
                .flat_map(|(r, route)| {
                    route
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| t.len() >= 2)
                        .map(move |(t, _)| (r, t))
                })
                .collect();
            let (r, t) = trips[rng.gen_range(0..trips.len())];
            let len = sol.routes[r][t].len();
            let a = rng.gen_range(0..len - 1);
            let b = rng.gen_range(a + 1..len);
            // Offset of the trip inside the route's node list.
            let offset = 1 + sol.routes[r][..t]
                .iter()
                .map(|tr| tr.len() + usize::from(ctx.cs))
                .sum::<usize>();
            let nodes = ctx.nodes(&sol.routes[r]);
            delta = Some(two_opt_delta(ctx.inst, &nodes, offset + a, offset + b));
            next.routes[r][t][a..=b].reverse();
        }
        MoveKind::Landfill => {
            let mut options = Vec::new();
            for (r, route) in sol.routes.iter().enumerate() {
                for (t, trip) in route.iter().enumerate() {
                    options.extend((1..trip.len()).map(|cut| (r, t, Some(cut))));
                    if t + 1 < route.len() {
                        options.push((r, t, None));
                    }
                }
            }
            let (r, t, cut) = options[rng.gen_range(0..options.len())];
            match cut {
                Some(cut) => {
                    let tail = next.routes[r][t].split_off(cut);
                    next.routes[r].insert(t + 1, tail);
                }
                None => {
                    let following = next.routes[r].remove(t + 1);
                    next.routes[r][t].extend(following);
                }
            }
        }
        MoveKind::Merge => {
            let a = rng.gen_range(0..sol.routes.len());
            let mut b = rng.gen_range(0..sol.routes.len() - 1);
            if b >= a {
                b += 1;
            }
            let moved = sol.routes[b].clone();
            if ctx.cs {
                next.routes[a].extend(moved);
            } else {
                next.routes[a][0].extend(moved.into_iter().flatten());
            }
            next.routes.remove(b);
        }
        MoveKind::Split => {
            let candidates: Vec<usize> = (0..sol.routes.len())
                .filter(|&r| sol.routes[r].iter().map(|t| t.len()).sum::<usize>() >= 2)
                .collect();
            let r = candidates[rng.gen_range(0..candidates.len())];
            let flat: Vec<(usize, usize)> = sol.routes[r]
                .iter()
                .enumerate()
                .flat_map(|(t, trip)| (0..trip.len()).map(move |p| (t, p)))
                .collect();
            let (t, p) = flat[rng.gen_range(1..flat.len())];
            let mut head = next.routes[r].clone();
            let mut tail = head.split_off(t);
            if p > 0 {
                let rest = tail[0].split_off(p);
                head.push(std::mem::replace(&mut tail[0], rest));
            }
            next.routes[r] = head;
            next.routes.push(tail);
        }
    }
    normalize(&mut next);
    Some((next, delta))
}

struct RunOutcome {
    seed: u64,
    solution: Solution,
    cost: f64,
    moves: u64,
}

fn anneal(ctx: &Ctx, params: &AnnealingParams, seed: u64) -> Result<RunOutcome, HeuristicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = construct(ctx, &mut rng)?;
    let mut current_cost = ctx.cost(&current).expect("construction is feasible");
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut temperature = params.initial_temperature.unwrap_or(0.1 * current_cost);
    let moves_per_epoch = params.moves_per_epoch.unwrap_or(50 * ctx.inst.num_micro());
    let mut moves = 0u64;
    let mut epoch = 0usize;
    while temperature >= params.min_temperature && params.max_epochs.is_none_or(|max| epoch < max)
    {
        for _ in 0..moves_per_epoch {
            let Some((candidate, delta)) = neighbour(ctx, &current, &mut rng) else {
                break;
            };
            moves += 1;
            let Some(cost) = ctx.cost(&candidate) else {
                continue;
            };
            if let Some(delta) = delta {
                debug_assert!(
                    (current_cost + delta - cost).abs() < 1e-6,
                    "2-opt delta drifted"
                );
            }
            let change = cost - current_cost;
            if change <= 0.0 || rng.gen::<f64>() < (-change / temperature).exp() {
                current = candidate;
                current_cost = cost;
                if current_cost < best_cost - 1e-12 {
                    best = current.clone();
                    best_cost = current_cost;
                }
            }
        }
        temperature *= params.cooling_rate;
        epoch += 1;
    }
    Ok(RunOutcome {
        seed,
        solution: best,
        cost: best_cost,
        moves,
    })
}

/// Simulated annealing with `params.restarts` independent runs seeded
/// `seed, seed + 1, ...`; the cheapest plan wins, ties to the lowest seed.
pub fn solve_heuristic(
    inst: &Instance,
    params: &AnnealingParams,
) -> Result<SolveResult, HeuristicError> {
    let started = Instant::now();
    params.validate()?;
    let ctx = Ctx {
        inst,
        accounting: params.time_accounting,
        cs: inst.case_kind() == CaseKind::CurrentSituation,
    };
    let runs: Vec<Result<RunOutcome, HeuristicError>> = (0..params.restarts as u64)
        .into_par_iter()
        .map(|r| anneal(&ctx, params, params.seed.wrapping_add(r)))
        .collect();
    let mut best: Option<RunOutcome> = None;
    let mut moves = 0;
    for run in runs {
        let run = run?;
        moves += run.moves;
        let better = match &best {
            None => true,
            Some(b) => run.cost < b.cost || (run.cost == b.cost && run.seed < b.seed),
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let plan = ctx.to_plan(&best.solution);
    let lower_bound = root_lower_bound(inst, params.time_accounting).min(best.cost);
    Ok(SolveResult::new(
        plan,
        best.cost,
        lower_bound,
        SolveStatus::FeasibleBound,
        moves,
        started,
    ))
}

/// Node sequence of a plan route, for tests and tools built on the delta.
pub fn route_nodes(inst: &Instance, route: &[Stop]) -> Option<Vec<usize>> {
    route.iter().map(|s| inst.node_of(*s)).collect()
}
