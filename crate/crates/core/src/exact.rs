//! Exact solvers: exhaustive enumeration for tiny instances and a
//! depth-first branch-and-bound.
//!
//! Both minimize the arc distance of the plan; the internal distance of the
//! micro-routes is a constant and is only added back in reported metrics.
//! Transfer-station plans are returned one depot-to-depot tour per route.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{evaluate_plan_with, scan_nodes, RoutingPlan, TimeAccounting, EPS};
use crate::model::{CaseKind, Instance, Stop};

/// Largest instance accepted by [`solve_brute_force`].
pub const BRUTE_FORCE_MAX: usize = 7;
pub const ENUMERATE_MAX: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("enumeration is limited to {max} micro-routes, instance has {n}")]
    TooLarge { n: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleBound,
    Infeasible,
    LimitReached,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleBound => "feasible_bound",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::LimitReached => "limit_reached",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchLimits {
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<f64>,
    pub time_accounting: TimeAccounting,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: None,
            max_seconds: None,
            time_accounting: TimeAccounting::Full,
        }
    }
}

/// Outcome of any solver. Non-finite numbers serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub plan: RoutingPlan,
    /// Arc distance of `plan`, infinite when there is none.
    pub objective: f64,
    pub lower_bound: f64,
    pub status: SolveStatus,
    pub gap: f64,
    pub nodes_explored: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveResult {
    pub(crate) fn new(
        plan: RoutingPlan,
        objective: f64,
        lower_bound: f64,
        status: SolveStatus,
        nodes_explored: u64,
        started: Instant,
    ) -> Self {
        let gap = match status {
            SolveStatus::Optimal => 0.0,
            _ if !objective.is_finite() => f64::INFINITY,
            _ if objective <= EPS => 0.0,
            _ => ((objective - lower_bound) / objective).max(0.0),
        };
        SolveResult {
            plan,
            objective,
            lower_bound,
            status,
            gap,
            nodes_explored,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }

    pub fn has_plan(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::FeasibleBound
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

/// Route duration charge of arc `i -> j` under `accounting`.
pub(crate) fn arc_time(inst: &Instance, accounting: TimeAccounting, i: usize, j: usize) -> f64 {
    let both_micro = inst.node_micro(i).is_some() && inst.node_micro(j).is_some();
    if accounting == TimeAccounting::Full || both_micro {
        inst.h(i, j) + inst.node_service(j)
    } else {
        0.0
    }
}

fn nodes_to_plan(inst: &Instance, path: &[usize]) -> RoutingPlan {
    let depot = inst.depot();
    let mut routes = Vec::new();
    let mut current: Vec<Stop> = Vec::new();
    for &node in path {
        current.push(inst.stop(node));
        if node == depot && current.len() > 1 {
            routes.push(std::mem::take(&mut current));
        }
    }
    RoutingPlan::new(routes)
}

fn plan_arc_distance(inst: &Instance, plan: &RoutingPlan, accounting: TimeAccounting) -> f64 {
    let metrics = evaluate_plan_with(inst, plan, accounting).expect("solver plans are well formed");
    debug_assert!(metrics.feasible, "solver produced an infeasible plan");
    metrics.total_arc_distance
}

/// Exhaustive search over set partitions, orders and landfill patterns.
/// Every plan with one route per block of a set partition, in every order.
/// Current-situation routes additionally take every subset of landfill
/// visits after a micro-route, so plans without a final landfill visit are
/// included. Feasibility is not checked.
pub fn enumerate_plans(inst: &Instance) -> Result<Vec<RoutingPlan>, ExactError> {
    let n = inst.num_micro();
    if n > ENUMERATE_MAX {
        return Err(ExactError::TooLarge {
            n,
            max: ENUMERATE_MAX,
        });
    }
    let ids: Vec<u32> = inst.micro_routes().iter().map(|m| m.id).collect();
    let mut plans = Vec::new();
    for partition in set_partitions(&ids) {
        let mut partial: Vec<Vec<Vec<Stop>>> = vec![vec![]];
        for block in &partition {
            let options = block_routes(inst.case_kind(), block);
            partial = partial
                .into_iter()
                .flat_map(|routes| {
                    options.iter().map(move |r| {
                        let mut next = routes.clone();
                        next.push(r.clone());
                        next
                    })
                })
                .collect();
        }
        plans.extend(partial.into_iter().map(RoutingPlan::new));
    }
    Ok(plans)
}

fn set_partitions(items: &[u32]) -> Vec<Vec<Vec<u32>>> {
    let Some((&first, rest)) = items.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for partition in set_partitions(rest) {
        for b in 0..partition.len() {
            let mut p = partition.clone();
            p[b].insert(0, first);
            out.push(p);
        }
        let mut p = partition;
        p.insert(0, vec![first]);
        out.push(p);
    }
    out
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn block_routes(case: CaseKind, block: &[u32]) -> Vec<Vec<Stop>> {
    let mut out = Vec::new();
    for order in permutations(block) {
        let patterns = match case {
            CaseKind::CurrentSituation => 1u32 << order.len(),
            CaseKind::TransferStation => 1,
        };
        for mask in 0..patterns {
            let mut route = vec![Stop::Depot];
            for (p, id) in order.iter().enumerate() {
                route.push(Stop::Micro(*id));
                if mask & (1 << p) != 0 {
                    route.push(Stop::Landfill);
                }
            }
            route.push(Stop::Depot);
            out.push(route);
        }
    }
    out
}

pub fn solve_brute_force(inst: &Instance) -> Result<SolveResult, ExactError> {
    solve_brute_force_with(inst, TimeAccounting::Full)
}

pub fn solve_brute_force_with(
    inst: &Instance,
    accounting: TimeAccounting,
) -> Result<SolveResult, ExactError> {
    let started = Instant::now();
    let n = inst.num_micro();
    if n > BRUTE_FORCE_MAX {
        return Err(ExactError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let full = (1usize << n) - 1;
    let mut best_route: Vec<Option<(f64, Vec<usize>)>> = vec![None; full + 1];
    let mut evaluated = 0u64;
    for (mask, slot) in best_route.iter_mut().enumerate().skip(1) {
        let members: Vec<usize> = (0..n).filter(|m| mask >> m & 1 == 1).collect();
        for_each_route(inst, &members, |nodes| {
            evaluated += 1;
            let scan = scan_nodes(inst, nodes, accounting, None);
            if scan.feasible() && slot.as_ref().is_none_or(|(c, _)| scan.arc_distance < *c) {
                *slot = Some((scan.arc_distance, nodes.to_vec()));
            }
        });
    }
    // best_cover[mask]: cheapest partition of `mask` into routes.
    let mut best_cover: Vec<Option<(f64, usize)>> = vec![None; full + 1];
    best_cover[0] = Some((0.0, 0));
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if let (Some((c, _)), Some((r, _))) = (&best_route[block], &best_cover[mask ^ block]) {
                let total = c + r;
                if best_cover[mask].is_none_or(|(b, _)| total < b) {
                    best_cover[mask] = Some((total, block));
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let Some(_) = best_cover[full] else {
        return Ok(SolveResult::new(
            RoutingPlan::default(),
            f64::INFINITY,
            f64::INFINITY,
            SolveStatus::Infeasible,
            evaluated,
            started,
        ));
    };
    let mut path = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let (_, block) = best_cover[mask].expect("reachable cover");
        path.extend_from_slice(&best_route[block].as_ref().expect("covered block").1);
        mask ^= block;
    }
    let plan = nodes_to_plan(inst, &path);
    let objective = if n == 0 {
        0.0
    } else {
        plan_arc_distance(inst, &plan, accounting)
    };
    Ok(SolveResult::new(
        plan,
        objective,
        objective,
        SolveStatus::Optimal,
        evaluated,
        started,
    ))
}

/// Calls `visit` with the node sequence of every single-vehicle route over
/// exactly `members`: all orders, and for the current situation every choice
/// of landfill visits between consecutive micro-routes plus the final one.
fn for_each_route(inst: &Instance, members: &[usize], mut visit: impl FnMut(&[usize])) {
    let depot = inst.depot();
    let landfill = inst.landfill();
    let k = members.len();
    let gaps = if landfill.is_some() { k - 1 } else { 0 };
    let mut order: Vec<usize> = members.to_vec();
    let mut nodes = Vec::with_capacity(2 * k + 2);
    permute(&mut order, 0, &mut |perm| {
        for pattern in 0..1usize << gaps {
            nodes.clear();
            nodes.push(depot);
            for (pos, &m) in perm.iter().enumerate() {
                nodes.push(inst.micro_node(m));
                if let Some(l) = landfill {
                    if pos + 1 == k || pattern >> pos & 1 == 1 {
                        nodes.push(l);
                    }
                }
            }
            nodes.push(depot);
            visit(&nodes);
        }
    });
}

fn permute(items: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        f(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, f);
        items.swap(start, i);
    }
}

/// Depth-first branch-and-bound without a starting incumbent.
pub fn solve_exact(inst: &Instance, limits: SearchLimits) -> SolveResult {
    solve_exact_warm(inst, limits, None)
}

/// Branch-and-bound seeded with `incumbent` when it is a feasible plan.
pub fn solve_exact_warm(
    inst: &Instance,
    limits: SearchLimits,
    incumbent: Option<&RoutingPlan>,
) -> SolveResult {
    let started = Instant::now();
    if inst.num_micro() > MAX_MICRO {
        return SolveResult::new(
            RoutingPlan::default(),
            f64::INFINITY,
            0.0,
            SolveStatus::LimitReached,
            0,
            started,
        );
    }
    let mut search = Search::new(inst, limits, started);
    if let Some(plan) = incumbent {
        if let Ok(m) = evaluate_plan_with(inst, plan, limits.time_accounting) {
            if m.feasible {
                search.best = m.total_arc_distance;
                search.best_plan = Some(plan.clone());
            }
        }
    }
    let outcome = search.dfs();
    let nodes = search.nodes;
    match (outcome, search.best_plan) {
        (Ok(()), Some(plan)) => {
            let objective = plan_arc_distance(inst, &plan, limits.time_accounting);
            SolveResult::new(
                plan,
                objective,
                objective,
                SolveStatus::Optimal,
                nodes,
                started,
            )
        }
        (Ok(()), None) => SolveResult::new(
            RoutingPlan::default(),
            f64::INFINITY,
            f64::INFINITY,
            SolveStatus::Infeasible,
            nodes,
            started,
        ),
        (Err(lb), Some(plan)) => {
            let objective = plan_arc_distance(inst, &plan, limits.time_accounting);
            SolveResult::new(
                plan,
                objective,
                lb.min(objective),
                SolveStatus::FeasibleBound,
                nodes,
                started,
            )
        }
        (Err(lb), None) => SolveResult::new(
            RoutingPlan::default(),
            f64::INFINITY,
            lb,
            SolveStatus::LimitReached,
            nodes,
            started,
        ),
    }
}

/// The branch-and-bound bound at the root: a lower bound on the arc
/// distance of every feasible plan (infinite when none exists).
pub fn root_lower_bound(inst: &Instance, accounting: TimeAccounting) -> f64 {
    if inst.num_micro() > MAX_MICRO {
        return 0.0;
    }
    let limits = SearchLimits {
        time_accounting: accounting,
        ..SearchLimits::default()
    };
    Search::new(inst, limits, Instant::now()).bound()
}

/// Visited sets are bit masks.
const MAX_MICRO: usize = 64;

const TAIL_DEPOT: usize = usize::MAX;
const TAIL_LANDFILL: usize = usize::MAX - 1;

#[derive(Debug, Clone, Copy)]
struct State {
    visited: u64,
    pos: usize,
    open: bool,
    load: f64,
    time: f64,
    cost: f64,
    req: usize,
    path_len: usize,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Visit(usize),
    Landfill,
    Close,
}

struct Search<'a> {
    inst: &'a Instance,
    n: usize,
    cs: bool,
    depot: usize,
    landfill: usize,
    capacity: f64,
    cap_tol: f64,
    time_limit: f64,
    all: u64,
    q: Vec<f64>,
    node: Vec<usize>,
    /// Arc time charge between nodes, row-major.
    t: Vec<f64>,
    size: usize,
    /// Lower bound on the time from leaving a micro-route to the route end.
    ret: Vec<f64>,
    ret_landfill: f64,
    /// Feasible incoming arcs per micro-route, cheapest first.
    incoming: Vec<Vec<(f64, usize)>>,
    min_in_time: Vec<f64>,
    by_depot_distance: Vec<usize>,
    by_landfill_distance: Vec<usize>,
    by_id: Vec<usize>,
    state: State,
    path: Vec<usize>,
    best: f64,
    best_plan: Option<RoutingPlan>,
    nodes: u64,
    limits: SearchLimits,
    started: Instant,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, limits: SearchLimits, started: Instant) -> Self {
        let n = inst.num_micro();
        let size = inst.num_nodes();
        let accounting = limits.time_accounting;
        let cs = inst.case_kind() == CaseKind::CurrentSituation;
        let depot = inst.depot();
        let landfill = inst.landfill().unwrap_or(usize::MAX);
        let capacity = inst.capacity();
        let time_limit = inst.time_limit();
        let cap_tol = EPS * capacity.max(1.0);
        let q: Vec<f64> = (0..n).map(|m| inst.waste(m)).collect();
        let node: Vec<usize> = (0..n).map(|m| inst.micro_node(m)).collect();
        let mut t = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    t[i * size + j] = arc_time(inst, accounting, i, j);
                }
            }
        }
        let mut sp = t.clone();
        for k in 0..size {
            for i in 0..size {
                for j in 0..size {
                    let via = sp[i * size + k] + sp[k * size + j];
                    if via < sp[i * size + j] {
                        sp[i * size + j] = via;
                    }
                }
            }
        }
        let ret_landfill = if cs { sp[landfill * size + depot] } else { 0.0 };
        let ret: Vec<f64> = node
            .iter()
            .map(|&v| {
                if cs {
                    sp[v * size + landfill] + ret_landfill
                } else {
                    sp[v * size + depot]
                }
            })
            .collect();
        let start: Vec<f64> = node.iter().map(|&v| sp[depot * size + v]).collect();
        let fits_time = |x: f64| x <= time_limit + EPS;

        let mut incoming = Vec::with_capacity(n);
        let mut min_in_time = Vec::with_capacity(n);
        for j in 0..n {
            let vj = node[j];
            let mut arcs: Vec<(f64, usize, f64)> = Vec::new();
            if q[j] <= capacity + cap_tol {
                if fits_time(t[depot * size + vj] + ret[j]) {
                    let close = if cs { inst.d(landfill, depot) } else { 0.0 };
                    arcs.push((inst.d(depot, vj) + close, TAIL_DEPOT, t[depot * size + vj]));
                }
                if cs && fits_time(sp[depot * size + landfill] + t[landfill * size + vj] + ret[j]) {
                    arcs.push((inst.d(landfill, vj), TAIL_LANDFILL, t[landfill * size + vj]));
                }
            }
            for i in 0..n {
                let vi = node[i];
                if i != j
                    && q[i] + q[j] <= capacity + cap_tol
                    && fits_time(start[i] + t[vi * size + vj] + ret[j])
                {
                    arcs.push((inst.d(vi, vj), i, t[vi * size + vj]));
                }
            }
            min_in_time.push(arcs.iter().map(|a| a.2).fold(f64::INFINITY, f64::min));
            arcs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            incoming.push(arcs.into_iter().map(|(c, tail, _)| (c, tail)).collect());
        }
        let sorted_by = |key: &dyn Fn(usize) -> f64| {
            let mut v: Vec<usize> = (0..n).collect();
            v.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
            v
        };
        let by_depot_distance = sorted_by(&|m| inst.d(node[m], depot));
        let by_landfill_distance = if cs {
            sorted_by(&|m| inst.d(node[m], landfill))
        } else {
            Vec::new()
        };
        let mut by_id: Vec<usize> = (0..n).collect();
        by_id.sort_by_key(|&m| inst.micro_routes()[m].id);

        Search {
            inst,
            n,
            cs,
            depot,
            landfill,
            capacity,
            cap_tol,
            time_limit,
            all: if n == 64 { u64::MAX } else { (1u64 << n) - 1 },
            q,
            node,
            t,
            size,
            ret,
            ret_landfill,
            incoming,
            min_in_time,
            by_depot_distance,
            by_landfill_distance,
            by_id,
            state: State {
                visited: 0,
                pos: depot,
                open: false,
                load: 0.0,
                time: 0.0,
                cost: 0.0,
                req: 0,
                path_len: 0,
            },
            path: Vec::with_capacity(4 * n + 4),
            best: f64::INFINITY,
            best_plan: None,
            nodes: 0,
            limits,
            started,
            aborted: false,
        }
    }

    fn time(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.size + j]
    }

    fn current_micro(&self) -> Option<usize> {
        if self.state.open {
            self.inst.node_micro(self.state.pos)
        } else {
            None
        }
    }

    /// Number of bins of size Q needed for the unvisited demands plus `extra`.
    fn bins(&self, unvisited: u64, extra: Option<f64>) -> usize {
        let half = self.capacity / 2.0 + self.cap_tol;
        let mut sum = 0.0;
        let mut big = 0usize;
        let items = (0..self.n)
            .filter(|&m| unvisited >> m & 1 == 1)
            .map(|m| self.q[m]);
        for q in items.chain(extra) {
            sum += q;
            if q > half {
                big += 1;
            }
        }
        let by_volume = (sum / self.capacity - 1e-9).ceil().max(0.0) as usize;
        by_volume.max(big)
    }

    /// Sum of the `count` cheapest arcs into `target` from distinct tails.
    fn cheapest_arrivals(
        &self,
        order: &[usize],
        target: usize,
        unvisited: u64,
        count: usize,
    ) -> f64 {
        let cur = self.current_micro();
        let mut taken = 0;
        let mut total = 0.0;
        for &m in order {
            if taken == count {
                break;
            }
            if unvisited >> m & 1 == 1 || Some(m) == cur {
                total += self.inst.d(self.node[m], target);
                taken += 1;
            }
        }
        if taken < count {
            f64::INFINITY
        } else {
            total
        }
    }

    fn bound(&self) -> f64 {
        let s = &self.state;
        let unvisited = self.all & !s.visited;
        let cur = self.current_micro();
        let mut lb = s.cost;
        for j in 0..self.n {
            if unvisited >> j & 1 == 0 {
                continue;
            }
            let cheapest = self.incoming[j].iter().find(|&&(_, tail)| match tail {
                TAIL_DEPOT | TAIL_LANDFILL => true,
                i => unvisited >> i & 1 == 1 || Some(i) == cur,
            });
            match cheapest {
                Some(&(c, _)) => lb += c,
                None => return f64::INFINITY,
            }
        }
        let load_item = cur.map(|_| s.load);
        if self.cs {
            if s.open {
                lb += self.inst.d(self.landfill, self.depot);
            }
            let needed = usize::from(cur.is_some() || unvisited != 0);
            let arrivals = self.bins(unvisited, load_item).max(needed);
            lb += self.cheapest_arrivals(
                &self.by_landfill_distance,
                self.landfill,
                unvisited,
                arrivals,
            );
        } else {
            let mut tours = self.bins(unvisited, load_item).max(usize::from(s.open));
            let need: f64 = (0..self.n)
                .filter(|&j| unvisited >> j & 1 == 1)
                .map(|j| self.min_in_time[j])
                .sum();
            let available = if s.open {
                self.time_limit - s.time
            } else {
                0.0
            };
            if need > available + EPS {
                let extra = ((need - available) / self.time_limit - 1e-9)
                    .ceil()
                    .max(0.0) as usize;
                tours = tours.max(usize::from(s.open) + extra);
            }
            lb += self.cheapest_arrivals(&self.by_depot_distance, self.depot, unvisited, tours);
        }
        lb
    }

    fn children(&self) -> Vec<Move> {
        let s = &self.state;
        let unvisited = self.all & !s.visited;
        let ids = |m: usize| self.inst.micro_routes()[m].id;
        let mut moves = Vec::new();
        let from = if s.open { s.pos } else { self.depot };
        let (load, time) = if s.open { (s.load, s.time) } else { (0.0, 0.0) };
        let mut micros: Vec<usize> = (0..self.n)
            .filter(|&j| unvisited >> j & 1 == 1)
            .filter(|&j| load + self.q[j] <= self.capacity + self.cap_tol)
            .filter(|&j| {
                time + self.time(from, self.node[j]) + self.ret[j] <= self.time_limit + EPS
            })
            .collect();
        micros.sort_by(|&a, &b| {
            self.inst
                .d(from, self.node[a])
                .total_cmp(&self.inst.d(from, self.node[b]))
                .then(ids(a).cmp(&ids(b)))
        });
        moves.extend(micros.into_iter().map(Move::Visit));
        if s.open {
            let req_done = s.visited >> s.req & 1 == 1;
            let at_micro = self.inst.node_micro(s.pos).is_some();
            if self.cs && at_micro {
                if time + self.time(s.pos, self.landfill) + self.ret_landfill
                    <= self.time_limit + EPS
                {
                    moves.push(Move::Landfill);
                }
            } else if req_done && time + self.time(s.pos, self.depot) <= self.time_limit + EPS {
                moves.push(Move::Close);
            }
        }
        moves
    }

    fn apply(&mut self, mv: Move) -> State {
        let saved = self.state;
        let unvisited = self.all & !saved.visited;
        let first_unvisited = self
            .by_id
            .iter()
            .copied()
            .find(|&m| unvisited >> m & 1 == 1);
        let s = &mut self.state;
        match mv {
            Move::Visit(j) => {
                let v = self.node[j];
                if !s.open {
                    s.req = first_unvisited.expect("unvisited micro-route");
                    s.open = true;
                    s.pos = self.depot;
                    s.load = 0.0;
                    s.time = 0.0;
                    self.path.push(self.depot);
                }
                s.cost += self.inst.d(s.pos, v);
                s.time += self.t[s.pos * self.size + v];
                s.load += self.q[j];
                s.visited |= 1 << j;
                s.pos = v;
            }
            Move::Landfill => {
                s.cost += self.inst.d(s.pos, self.landfill);
                s.time += self.t[s.pos * self.size + self.landfill];
                s.load = 0.0;
                s.pos = self.landfill;
            }
            Move::Close => {
                s.cost += self.inst.d(s.pos, self.depot);
                s.open = false;
                s.pos = self.depot;
            }
        }
        self.path.push(self.state.pos);
        self.state.path_len = self.path.len();
        saved
    }

    fn undo(&mut self, saved: State) {
        self.state = saved;
        self.path.truncate(saved.path_len);
    }

    fn limit_hit(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if let Some(max) = self.limits.max_nodes {
            if self.nodes > max {
                self.aborted = true;
            }
        }
        if let Some(secs) = self.limits.max_seconds {
            if self.nodes.is_multiple_of(256) && self.started.elapsed().as_secs_f64() >= secs {
                self.aborted = true;
            }
        }
        self.aborted
    }

    /// Returns `Err(bound)` when the search was cut short; `bound` is a lower
    /// bound on every plan in the unexplored part of this subtree.
    fn dfs(&mut self) -> Result<(), f64> {
        self.nodes += 1;
        let bound = self.bound();
        if bound + EPS >= self.best {
            return Ok(());
        }
        if !self.state.open && self.state.visited == self.all {
            self.best = self.state.cost;
            self.best_plan = Some(nodes_to_plan(self.inst, &self.path));
            return Ok(());
        }
        if self.limit_hit() {
            return Err(bound);
        }
        let moves = self.children();
        for (k, &mv) in moves.iter().enumerate() {
            let saved = self.apply(mv);
            let outcome = self.dfs();
            self.undo(saved);
            if let Err(mut lb) = outcome {
                for &rest in &moves[k + 1..] {
                    let saved = self.apply(rest);
                    lb = lb.min(self.bound());
                    self.undo(saved);
                }
                return Err(lb);
            }
        }
        Ok(())
    }
}
