//! Solver-independent MILP formulations.
//!
//! Two models are built from an [`Instance`]:
//!
//! * [`build_cs_model`]: three-index vehicle-flow model for the current
//!   situation, where the landfill is an intermediate facility that can be
//!   visited several times per route;
//! * [`build_ts_model`]: two-index model with MTZ load and time potentials
//!   for the transfer-station case.
//!
//! Both come in a literal variant, faithful to the printed formulation, and
//! a corrected variant (the default) whose feasible set matches the
//! evaluator exactly.

mod export;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{self, RoutingPlan, TimeAccounting};
use crate::model::{CaseKind, Instance, Stop};

pub use export::{export_model, ExportFormat};

/// Tolerance on integrality and constraint satisfaction.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("model requires a {expected} instance, got {found}")]
    WrongCaseKind { expected: CaseKind, found: CaseKind },
    #[error("binary variable {name} has fractional value {value}")]
    FractionalSolution { name: String, value: f64 },
    #[error("constraint {0} is violated")]
    ConstraintViolation(String),
    #[error("active arcs do not form depot-anchored tours")]
    DisconnectedTour,
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("name collision on {0}")]
    NameCollision(String),
    #[error("name {0} exceeds 255 characters")]
    NameTooLong(String),
    #[error("plan uses arc {from}->{to}, which has no variable in the model")]
    UnrepresentableArc { from: Stop, to: Stop },
    #[error("plan has {routes} routes but the model allows {max}")]
    TooManyRoutes { routes: usize, max: usize },
    #[error(transparent)]
    Eval(#[from] evaluator::EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    pub fn satisfied(&self, values: &[f64], tol: f64) -> bool {
        let lhs = self.activity(values);
        let slack = tol * self.rhs.abs().max(1.0);
        match self.sense {
            ConstraintSense::Le => lhs <= self.rhs + slack,
            ConstraintSense::Ge => lhs >= self.rhs - slack,
            ConstraintSense::Eq => (lhs - self.rhs).abs() <= slack,
        }
    }
}

/// Variable families; node indices refer to the instance's matrix nodes and
/// `k` is the 1-based route index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKey {
    X { i: usize, j: usize, k: usize },
    V { i: usize, j: usize, k: usize },
    Y { i: usize, j: usize },
    U { i: usize },
    T { i: usize },
}

/// Constraint families; every row name starts with the family tag. Tags are
/// short so that small instances keep names within eight characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFamily {
    Visit,
    Start,
    Flow,
    EmptyAfterLandfill,
    EmptyAfterDepot,
    LoadBalance,
    CapacityLink,
    Active,
    Duration,
    Successor,
    Predecessor,
    LoadOrder,
    TimeOrder,
    Return,
}

impl RowFamily {
    pub fn tag(self) -> &'static str {
        match self {
            RowFamily::Visit => "VISIT",
            RowFamily::Start => "START",
            RowFamily::Flow => "FLOW",
            RowFamily::EmptyAfterLandfill => "LFE",
            RowFamily::EmptyAfterDepot => "DPE",
            RowFamily::LoadBalance => "LOAD",
            RowFamily::CapacityLink => "LK",
            RowFamily::Active => "AC",
            RowFamily::Duration => "DUR",
            RowFamily::Successor => "SUCC",
            RowFamily::Predecessor => "PRED",
            RowFamily::LoadOrder => "MTZQ",
            RowFamily::TimeOrder => "MTZT",
            RowFamily::Return => "RET",
        }
    }
}

/// Degree-row variant of the transfer-station model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeRepair {
    /// Successor and predecessor sums range over micro-routes only; the
    /// model is infeasible for any instance with positive waste.
    Literal,
    #[default]
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    CurrentSituation {
        routes: usize,
        accounting: TimeAccounting,
    },
    TransferStation {
        repair: DegreeRepair,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub formulation: Formulation,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimized.
    pub objective: Vec<(usize, f64)>,
    keys: Vec<VariableKey>,
    lookup: HashMap<VariableKey, usize>,
}

impl MilpModel {
    pub fn empty(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            formulation: Formulation::TransferStation {
                repair: DegreeRepair::Repaired,
            },
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            keys: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    pub fn var(&self, key: VariableKey) -> Option<usize> {
        self.lookup.get(&key).copied()
    }

    pub fn key(&self, var: usize) -> VariableKey {
        self.keys[var]
    }

    pub fn count_family(&self, pred: impl Fn(&VariableKey) -> bool) -> usize {
        self.keys.iter().filter(|k| pred(k)).count()
    }

    /// Number of rows in a constraint family.
    pub fn count_rows(&self, family: RowFamily) -> usize {
        let prefix = format!("{}_", family.tag());
        self.constraints
            .iter()
            .filter(|c| c.name.starts_with(&prefix))
            .count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Names of constraints (and `bound:VAR` pseudo-rows) violated by `values`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (v, var) in self.variables.iter().enumerate() {
            let x = values[v];
            let slack = tol * x.abs().max(1.0);
            if x < var.lower - slack || x > var.upper + slack {
                out.push(format!("bound:{}", var.name));
            }
        }
        out.extend(
            self.constraints
                .iter()
                .filter(|c| !c.satisfied(values, tol))
                .map(|c| c.name.clone()),
        );
        out
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        self.violations(values, tol).is_empty()
    }

    /// Dense value vector from a `{name: value}` assignment; absent variables are zero.
    pub fn values_from_assignment(
        &self,
        assignment: &HashMap<String, f64>,
    ) -> Result<Vec<f64>, MilpError> {
        let by_name: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut values = vec![0.0; self.variables.len()];
        for (name, &value) in assignment {
            let idx = by_name
                .get(name.as_str())
                .ok_or_else(|| MilpError::UnknownVariable(name.clone()))?;
            values[*idx] = value;
        }
        Ok(values)
    }

    pub fn assignment_from_values(&self, values: &[f64]) -> HashMap<String, f64> {
        self.variables
            .iter()
            .zip(values)
            .filter(|(_, &x)| x != 0.0)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }

    fn add_var(
        &mut self,
        key: VariableKey,
        name: String,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> usize {
        let idx = self.variables.len();
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.keys.push(key);
        self.lookup.insert(key, idx);
        idx
    }

    fn add_row(
        &mut self,
        name: String,
        terms: Vec<(usize, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

fn label(inst: &Instance, node: usize) -> String {
    match inst.stop(node) {
        Stop::Depot => "0".to_string(),
        Stop::Landfill => "L".to_string(),
        Stop::Micro(id) => id.to_string(),
    }
}

/// Three-index model for the current situation.
///
/// Variables `X_i_j_k` (arc used by route `k`) and `V_i_j_k` (load on the
/// arc). Arcs from a micro-route straight to the depot are not created, so
/// the no-direct-return equation contributes no rows. With
/// [`TimeAccounting::Full`] the capacity rows also cover the micro-route to
/// landfill arcs, arrivals from the landfill count in the load balance, and
/// the duration row charges every arc and every service time.
pub fn build_cs_model(inst: &Instance, accounting: TimeAccounting) -> Result<MilpModel, MilpError> {
    if inst.case_kind() != CaseKind::CurrentSituation {
        return Err(MilpError::WrongCaseKind {
            expected: CaseKind::CurrentSituation,
            found: inst.case_kind(),
        });
    }
    let routes = inst.max_routes();
    let nodes = inst.canonical_nodes();
    let depot = inst.depot();
    let landfill = inst.landfill().expect("current situation has a landfill");
    let micros: Vec<usize> = (0..inst.num_micro()).map(|m| inst.micro_node(m)).collect();
    let cap = inst.capacity();
    let full = accounting == TimeAccounting::Full;
    let lab: Vec<String> = (0..inst.num_nodes()).map(|n| label(inst, n)).collect();

    let mut model = MilpModel::empty(inst.name().unwrap_or("current_situation"));
    model.formulation = Formulation::CurrentSituation { routes, accounting };

    let arc_exists = |i: usize, j: usize| i != j && !(j == depot && inst.node_micro(i).is_some());

    for k in 1..=routes {
        for &i in &nodes {
            for &j in &nodes {
                if arc_exists(i, j) {
                    let name = format!("X_{}_{}_{}", lab[i], lab[j], k);
                    let x =
                        model.add_var(VariableKey::X { i, j, k }, name, VarKind::Binary, 0.0, 1.0);
                    model.objective.push((x, inst.d(i, j)));
                }
            }
        }
    }
    for k in 1..=routes {
        for &i in &nodes {
            for &j in &nodes {
                if arc_exists(i, j) {
                    let name = format!("V_{}_{}_{}", lab[i], lab[j], k);
                    model.add_var(
                        VariableKey::V { i, j, k },
                        name,
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                    );
                }
            }
        }
    }
    let x = |model: &MilpModel, i: usize, j: usize, k: usize| model.var(VariableKey::X { i, j, k });
    let v = |model: &MilpModel, i: usize, j: usize, k: usize| model.var(VariableKey::V { i, j, k });

    // every micro-route is left exactly once
    for &i in &micros {
        let terms = (1..=routes)
            .flat_map(|k| nodes.iter().filter_map(move |&j| Some((k, j))))
            .filter_map(|(k, j)| x(&model, i, j, k).map(|var| (var, 1.0)))
            .collect();
        model.add_row(format!("VISIT_{}", lab[i]), terms, ConstraintSense::Eq, 1.0);
    }
    // at most one depot departure per route
    for k in 1..=routes {
        let terms = micros
            .iter()
            .chain(std::iter::once(&landfill))
            .filter_map(|&i| x(&model, depot, i, k).map(|var| (var, 1.0)))
            .collect();
        model.add_row(format!("START_{k}"), terms, ConstraintSense::Le, 1.0);
    }
    // flow conservation
    for k in 1..=routes {
        for &j in &nodes {
            let mut terms: Vec<(usize, f64)> = nodes
                .iter()
                .filter_map(|&i| x(&model, i, j, k).map(|var| (var, 1.0)))
                .collect();
            terms.extend(
                nodes
                    .iter()
                    .filter_map(|&i| x(&model, j, i, k).map(|var| (var, -1.0))),
            );
            model.add_row(
                format!("FLOW_{}_{}", lab[j], k),
                terms,
                ConstraintSense::Eq,
                0.0,
            );
        }
    }
    // empty after the landfill, empty after the depot
    for k in 1..=routes {
        for &i in micros.iter().chain(std::iter::once(&depot)) {
            if let Some(var) = v(&model, landfill, i, k) {
                model.add_row(
                    format!("LFE_{}_{}", lab[i], k),
                    vec![(var, 1.0)],
                    ConstraintSense::Eq,
                    0.0,
                );
            }
        }
    }
    for k in 1..=routes {
        for &i in micros.iter().chain(std::iter::once(&landfill)) {
            if let Some(var) = v(&model, depot, i, k) {
                model.add_row(
                    format!("DPE_{}_{}", lab[i], k),
                    vec![(var, 1.0)],
                    ConstraintSense::Eq,
                    0.0,
                );
            }
        }
    }
    // load balance: in + q_j <= out + Q (1 - visited_by_k)
    for k in 1..=routes {
        for &j in &micros {
            let preds: Vec<usize> = if full {
                nodes.iter().copied().filter(|&i| i != j).collect()
            } else {
                micros
                    .iter()
                    .copied()
                    .filter(|&i| i != j)
                    .chain(std::iter::once(depot))
                    .collect()
            };
            let mut terms = Vec::new();
            for &i in &preds {
                if let Some(var) = v(&model, i, j, k) {
                    terms.push((var, 1.0));
                }
            }
            for &i in micros
                .iter()
                .filter(|&&i| i != j)
                .chain(std::iter::once(&landfill))
            {
                if let Some(var) = v(&model, j, i, k) {
                    terms.push((var, -1.0));
                }
            }
            for &i in &preds {
                if let Some(var) = x(&model, i, j, k) {
                    terms.push((var, cap));
                }
            }
            let q = inst.node_waste(j);
            model.add_row(
                format!("LOAD_{}_{}", lab[j], k),
                terms,
                ConstraintSense::Le,
                cap - q,
            );
        }
    }
    // capacity linking
    for k in 1..=routes {
        for &i in &micros {
            let heads: Vec<usize> = if full {
                micros
                    .iter()
                    .copied()
                    .chain(std::iter::once(landfill))
                    .collect()
            } else {
                micros.clone()
            };
            for j in heads {
                if let (Some(vv), Some(xv)) = (v(&model, i, j, k), x(&model, i, j, k)) {
                    model.add_row(
                        format!("LK_{}_{}_{}", lab[i], lab[j], k),
                        vec![(vv, 1.0), (xv, -cap)],
                        ConstraintSense::Le,
                        0.0,
                    );
                }
            }
        }
    }
    // arcs among micro-routes and landfill only if the route leaves the depot to a micro-route
    let inner: Vec<usize> = micros
        .iter()
        .copied()
        .chain(std::iter::once(landfill))
        .collect();
    for k in 1..=routes {
        for &i in &inner {
            for &j in &inner {
                if let Some(xv) = x(&model, i, j, k) {
                    let mut terms = vec![(xv, 1.0)];
                    terms.extend(
                        micros
                            .iter()
                            .filter_map(|&g| x(&model, depot, g, k).map(|var| (var, -1.0))),
                    );
                    model.add_row(
                        format!("AC_{}_{}_{}", lab[i], lab[j], k),
                        terms,
                        ConstraintSense::Le,
                        0.0,
                    );
                }
            }
        }
    }
    // route duration
    for k in 1..=routes {
        let mut terms = Vec::new();
        for &i in &nodes {
            for &j in &nodes {
                let charged =
                    full || (inst.node_micro(i).is_some() && inst.node_micro(j).is_some());
                if !charged {
                    continue;
                }
                if let Some(xv) = x(&model, i, j, k) {
                    terms.push((xv, inst.node_service(j) + inst.h(i, j)));
                }
            }
        }
        model.add_row(
            format!("DUR_{k}"),
            terms,
            ConstraintSense::Le,
            inst.time_limit(),
        );
    }
    Ok(model)
}

/// Two-index MTZ model for the transfer-station case.
///
/// Variables `Y_i_j`, load potentials `U_i` bounded by `[q_i, Q]` and time
/// potentials `T_i` bounded by `[0, T]`. The repaired variant lets the
/// degree sums run over the depot as well and uses big-M values that are
/// valid for every feasible tour; the literal variant keeps `T` as big-M.
pub fn build_ts_model(inst: &Instance, repair: DegreeRepair) -> Result<MilpModel, MilpError> {
    if inst.case_kind() != CaseKind::TransferStation {
        return Err(MilpError::WrongCaseKind {
            expected: CaseKind::TransferStation,
            found: inst.case_kind(),
        });
    }
    let nodes = inst.canonical_nodes();
    let depot = inst.depot();
    let micros: Vec<usize> = (0..inst.num_micro()).map(|m| inst.micro_node(m)).collect();
    let cap = inst.capacity();
    let horizon = inst.time_limit();
    let repaired = repair == DegreeRepair::Repaired;
    let lab: Vec<String> = (0..inst.num_nodes()).map(|n| label(inst, n)).collect();

    let mut model = MilpModel::empty(inst.name().unwrap_or("transfer_station"));
    model.formulation = Formulation::TransferStation { repair };

    for &i in &nodes {
        for &j in &nodes {
            if i != j {
                let y = model.add_var(
                    VariableKey::Y { i, j },
                    format!("Y_{}_{}", lab[i], lab[j]),
                    VarKind::Binary,
                    0.0,
                    1.0,
                );
                model.objective.push((y, inst.d(i, j)));
            }
        }
    }
    // q_i <= u_i <= Q
    for &i in &micros {
        model.add_var(
            VariableKey::U { i },
            format!("U_{}", lab[i]),
            VarKind::Continuous,
            inst.node_waste(i),
            cap,
        );
    }
    // 0 <= t_i <= T
    for &i in &nodes {
        model.add_var(
            VariableKey::T { i },
            format!("T_{}", lab[i]),
            VarKind::Continuous,
            0.0,
            horizon,
        );
    }
    let y = |model: &MilpModel, i: usize, j: usize| model.var(VariableKey::Y { i, j });
    let u = |model: &MilpModel, i: usize| model.var(VariableKey::U { i }).expect("load variable");
    let t = |model: &MilpModel, i: usize| model.var(VariableKey::T { i }).expect("time variable");
    let range: &[usize] = if repaired { &nodes } else { &micros };

    // one successor, one predecessor
    for &i in &micros {
        let terms = range
            .iter()
            .filter_map(|&j| y(&model, i, j).map(|v| (v, 1.0)))
            .collect();
        model.add_row(format!("SUCC_{}", lab[i]), terms, ConstraintSense::Eq, 1.0);
    }
    for &i in &micros {
        let terms = range
            .iter()
            .filter_map(|&j| y(&model, j, i).map(|v| (v, 1.0)))
            .collect();
        model.add_row(format!("PRED_{}", lab[i]), terms, ConstraintSense::Eq, 1.0);
    }
    // u_i - u_j + Q y_ij <= Q - q_j
    for &i in &micros {
        for &j in &micros {
            if i != j {
                let terms = vec![
                    (u(&model, i), 1.0),
                    (u(&model, j), -1.0),
                    (y(&model, i, j).unwrap(), cap),
                ];
                model.add_row(
                    format!("MTZQ_{}_{}", lab[i], lab[j]),
                    terms,
                    ConstraintSense::Le,
                    cap - inst.node_waste(j),
                );
            }
        }
    }
    // t_i - t_j + M y_ij <= M - s_j - h_ij
    for &i in &nodes {
        for &j in &micros {
            if i != j {
                let s = inst.node_service(j);
                let big_m = if repaired {
                    horizon + s + inst.h(i, j)
                } else {
                    horizon
                };
                let terms = vec![
                    (t(&model, i), 1.0),
                    (t(&model, j), -1.0),
                    (y(&model, i, j).unwrap(), big_m),
                ];
                model.add_row(
                    format!("MTZT_{}_{}", lab[i], lab[j]),
                    terms,
                    ConstraintSense::Le,
                    big_m - s - inst.h(i, j),
                );
            }
        }
    }
    // return to the depot within the shift
    for &i in &micros {
        let h = inst.h(i, depot);
        let yv = y(&model, i, depot).unwrap();
        let (terms, rhs) = if repaired {
            (vec![(t(&model, i), 1.0), (yv, h)], horizon)
        } else {
            (vec![(t(&model, i), 1.0), (yv, horizon)], 2.0 * horizon - h)
        };
        model.add_row(format!("RET_{}", lab[i]), terms, ConstraintSense::Le, rhs);
    }
    Ok(model)
}

fn is_binary_value(x: f64) -> bool {
    x.abs() <= FEAS_TOL || (x - 1.0).abs() <= FEAS_TOL
}

/// Turns a feasible MILP assignment into a routing plan.
pub fn extract_plan(
    inst: &Instance,
    model: &MilpModel,
    assignment: &HashMap<String, f64>,
) -> Result<RoutingPlan, MilpError> {
    let values = model.values_from_assignment(assignment)?;
    extract_plan_values(inst, model, &values)
}

pub fn extract_plan_values(
    inst: &Instance,
    model: &MilpModel,
    values: &[f64],
) -> Result<RoutingPlan, MilpError> {
    for (var, &x) in model.variables.iter().zip(values) {
        if var.kind == VarKind::Binary && !is_binary_value(x) {
            return Err(MilpError::FractionalSolution {
                name: var.name.clone(),
                value: x,
            });
        }
    }
    if let Some(name) = model.violations(values, FEAS_TOL).into_iter().next() {
        return Err(MilpError::ConstraintViolation(name));
    }
    let plan = match model.formulation {
        Formulation::CurrentSituation { routes, .. } => {
            if inst.case_kind() != CaseKind::CurrentSituation {
                return Err(MilpError::WrongCaseKind {
                    expected: CaseKind::CurrentSituation,
                    found: inst.case_kind(),
                });
            }
            extract_cs(inst, model, values, routes)?
        }
        Formulation::TransferStation { .. } => {
            if inst.case_kind() != CaseKind::TransferStation {
                return Err(MilpError::WrongCaseKind {
                    expected: CaseKind::TransferStation,
                    found: inst.case_kind(),
                });
            }
            extract_ts(inst, model, values)?
        }
    };
    evaluator::evaluate_plan(inst, &plan)?;
    Ok(plan)
}

fn extract_cs(
    inst: &Instance,
    model: &MilpModel,
    values: &[f64],
    routes: usize,
) -> Result<RoutingPlan, MilpError> {
    let nodes = inst.canonical_nodes();
    let depot = inst.depot();
    let landfill = inst.landfill().expect("landfill");
    let mut plan = Vec::new();
    for k in 1..=routes {
        // Successor lists in canonical order, with the depot last so that
        // landfill trips are exhausted before the route closes.
        let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut active = 0usize;
        for &i in &nodes {
            let mut heads: Vec<usize> = nodes
                .iter()
                .copied()
                .filter(|&j| j != depot)
                .chain(std::iter::once(depot))
                .filter(|&j| {
                    model
                        .var(VariableKey::X { i, j, k })
                        .is_some_and(|v| values[v] > 0.5)
                })
                .collect();
            active += heads.len();
            heads.reverse();
            if !heads.is_empty() {
                succ.insert(i, heads);
            }
        }
        if active == 0 {
            continue;
        }
        let mut route = vec![Stop::Depot];
        let mut cur = depot;
        let mut used = 0usize;
        loop {
            let next = match succ.get_mut(&cur).and_then(|h| h.pop()) {
                Some(n) => n,
                None => return Err(MilpError::DisconnectedTour),
            };
            used += 1;
            route.push(inst.stop(next));
            cur = next;
            if cur == depot {
                break;
            }
            if cur != landfill && route.len() > 2 * inst.num_nodes() + 2 {
                return Err(MilpError::DisconnectedTour);
            }
        }
        if used != active {
            return Err(MilpError::DisconnectedTour);
        }
        plan.push(route);
    }
    Ok(RoutingPlan::new(plan))
}

fn extract_ts(
    inst: &Instance,
    model: &MilpModel,
    values: &[f64],
) -> Result<RoutingPlan, MilpError> {
    let nodes = inst.canonical_nodes();
    let depot = inst.depot();
    let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut active = 0usize;
    for &i in &nodes {
        let mut heads: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&j| {
                model
                    .var(VariableKey::Y { i, j })
                    .is_some_and(|v| values[v] > 0.5)
            })
            .collect();
        active += heads.len();
        heads.reverse();
        if !heads.is_empty() {
            succ.insert(i, heads);
        }
    }
    let mut plan = Vec::new();
    let mut used = 0usize;
    while let Some(first) = succ.get_mut(&depot).and_then(|h| h.pop()) {
        used += 1;
        let mut route = vec![Stop::Depot, inst.stop(first)];
        let mut cur = first;
        while cur != depot {
            let next = succ
                .get_mut(&cur)
                .and_then(|h| h.pop())
                .ok_or(MilpError::DisconnectedTour)?;
            used += 1;
            route.push(inst.stop(next));
            cur = next;
            if route.len() > inst.num_nodes() + 1 {
                return Err(MilpError::DisconnectedTour);
            }
        }
        plan.push(route);
    }
    if used != active {
        return Err(MilpError::DisconnectedTour);
    }
    Ok(RoutingPlan::new(plan))
}

/// Canonical assignment induced by a plan: arc variables from the route
/// arcs (route `r` becomes `k = r + 1`), loads from the evaluator's leg
/// loads, and time potentials from cumulative tour durations.
///
/// Route structure the model cannot represent (an arc without a variable)
/// is reported as [`MilpError::UnrepresentableArc`]; such a plan is
/// infeasible for the model.
pub fn assignment_from_plan(
    inst: &Instance,
    model: &MilpModel,
    plan: &RoutingPlan,
) -> Result<Vec<f64>, MilpError> {
    let mut values = vec![0.0; model.variables.len()];
    match model.formulation {
        Formulation::CurrentSituation { routes, .. } => {
            if plan.routes.len() > routes {
                return Err(MilpError::TooManyRoutes {
                    routes: plan.routes.len(),
                    max: routes,
                });
            }
            for (r, route) in plan.routes.iter().enumerate() {
                let k = r + 1;
                let mut load = 0.0;
                for pair in route.windows(2) {
                    let i = inst
                        .node_of(pair[0])
                        .ok_or(evaluator::EvalError::UnknownStop(pair[0]))?;
                    let j = inst
                        .node_of(pair[1])
                        .ok_or(evaluator::EvalError::UnknownStop(pair[1]))?;
                    load = match inst.node_micro(i) {
                        Some(m) => load + inst.waste(m),
                        None => 0.0,
                    };
                    let (Some(xv), Some(vv)) = (
                        model.var(VariableKey::X { i, j, k }),
                        model.var(VariableKey::V { i, j, k }),
                    ) else {
                        return Err(MilpError::UnrepresentableArc {
                            from: pair[0],
                            to: pair[1],
                        });
                    };
                    values[xv] += 1.0;
                    values[vv] += load;
                }
            }
        }
        Formulation::TransferStation { .. } => {
            let depot = inst.depot();
            for m in 0..inst.num_micro() {
                let node = inst.micro_node(m);
                values[model.var(VariableKey::U { i: node }).unwrap()] = inst.waste(m);
            }
            for route in &plan.routes {
                let mut load = 0.0;
                let mut time = 0.0;
                for pair in route.windows(2) {
                    let i = inst
                        .node_of(pair[0])
                        .ok_or(evaluator::EvalError::UnknownStop(pair[0]))?;
                    let j = inst
                        .node_of(pair[1])
                        .ok_or(evaluator::EvalError::UnknownStop(pair[1]))?;
                    let yv = model.var(VariableKey::Y { i, j }).ok_or(
                        MilpError::UnrepresentableArc {
                            from: pair[0],
                            to: pair[1],
                        },
                    )?;
                    values[yv] += 1.0;
                    if i == depot {
                        load = 0.0;
                        time = 0.0;
                    }
                    if let Some(m) = inst.node_micro(j) {
                        load += inst.waste(m);
                        time += inst.h(i, j) + inst.service(m);
                        values[model.var(VariableKey::U { i: j }).unwrap()] = load;
                        values[model.var(VariableKey::T { i: j }).unwrap()] = time;
                    }
                }
            }
        }
    }
    Ok(values)
}
