//! Instances, scenario scaling and the empirical service-time model.
//!
//! An [`Instance`] describes one shift: the micro-routes to sequence, the
//! asymmetric distance and travel-time matrices between stops (exit of `i`
//! to entrance of `j`), the vehicle capacity and the shift duration limit.
//! Units are fixed throughout: kilometers, kilograms and hours.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while building, loading or scaling an instance.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("infeasible demand: micro-route {id} carries {waste:.2} kg, vehicle capacity is {capacity:.2} kg")]
    InfeasibleDemand { id: u32, waste: f64, capacity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Vehicles unload at the landfill and must visit it before returning to the depot.
    CurrentSituation,
    /// The depot doubles as a transfer station; vehicles unload there.
    TransferStation,
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseKind::CurrentSituation => f.write_str("current_situation"),
            CaseKind::TransferStation => f.write_str("transfer_station"),
        }
    }
}

/// A stop of a route. Serialized as `"depot"`, `"landfill"` or the micro-route id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stop {
    Depot,
    Landfill,
    Micro(u32),
}

impl fmt::Display for Stop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stop::Depot => f.write_str("D"),
            Stop::Landfill => f.write_str("L"),
            Stop::Micro(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StopRepr {
    Id(u32),
    Name(String),
}

impl Serialize for Stop {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Stop::Depot => serializer.serialize_str("depot"),
            Stop::Landfill => serializer.serialize_str("landfill"),
            Stop::Micro(id) => serializer.serialize_u32(*id),
        }
    }
}

impl<'de> Deserialize<'de> for Stop {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match StopRepr::deserialize(deserializer)? {
            StopRepr::Id(id) => Ok(Stop::Micro(id)),
            StopRepr::Name(name) => match name.as_str() {
                "depot" => Ok(Stop::Depot),
                "landfill" => Ok(Stop::Landfill),
                other => Err(serde::de::Error::custom(format!(
                    "unknown stop {other:?}, expected \"depot\", \"landfill\" or a micro-route id"
                ))),
            },
        }
    }
}

/// A fixed collection zone with a predetermined internal path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroRoute {
    pub id: u32,
    #[serde(rename = "internal_distance_km")]
    pub internal_distance: f64,
    #[serde(rename = "base_waste_kg")]
    pub base_waste: f64,
    #[serde(rename = "area_km2", default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    /// Fixed service time taken from company records instead of the regression.
    #[serde(
        rename = "service_time_h",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub service_time_override: Option<f64>,
}

impl MicroRoute {
    pub fn new(id: u32, internal_distance: f64, base_waste: f64) -> Self {
        MicroRoute {
            id,
            internal_distance,
            base_waste,
            area: None,
            service_time_override: None,
        }
    }
}

/// Linear regression of the average speed inside a micro-route on its
/// waste density: `speed = intercept - slope * (waste / distance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTimeModel {
    pub intercept: f64,
    pub slope: f64,
    pub min_speed_floor: f64,
}

impl Default for ServiceTimeModel {
    fn default() -> Self {
        ServiceTimeModel {
            intercept: 35.0,
            slope: 0.0979,
            min_speed_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceTime {
    /// Waste per kilometer of internal path, kg/km.
    pub density: f64,
    /// Average speed inside the micro-route, km/h.
    pub speed: f64,
    pub hours: f64,
    /// The regression fell below `min_speed_floor` and was clamped.
    pub clamped: bool,
}

impl ServiceTimeModel {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if !(self.intercept.is_finite() && self.intercept > 0.0) {
            return Err(invariant("service_time_model.intercept must be > 0"));
        }
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(invariant("service_time_model.slope must be >= 0"));
        }
        if !(self.min_speed_floor.is_finite() && self.min_speed_floor > 0.0) {
            return Err(invariant("service_time_model.min_speed_floor must be > 0"));
        }
        Ok(())
    }

    pub fn service_time(&self, internal_distance: f64, waste: f64) -> ServiceTime {
        let density = waste / internal_distance;
        let raw = self.intercept - self.slope * density;
        let clamped = raw < self.min_speed_floor;
        let speed = if clamped { self.min_speed_floor } else { raw };
        ServiceTime {
            density,
            speed,
            hours: internal_distance / speed,
            clamped,
        }
    }
}

/// Free-function form of [`ServiceTimeModel::service_time`].
pub fn service_time(model: &ServiceTimeModel, internal_distance: f64, waste: f64) -> ServiceTime {
    model.service_time(internal_distance, waste)
}

/// A waste-generation scenario expressed as a fraction of the base amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub waste_fraction: f64,
}

impl Scenario {
    pub fn new(waste_fraction: f64) -> Result<Self, InstanceError> {
        if !(waste_fraction.is_finite() && waste_fraction > 0.0) {
            return Err(invariant(format!(
                "waste fraction must be > 0, got {waste_fraction}"
            )));
        }
        Ok(Scenario { waste_fraction })
    }
}

/// Large-vehicle shuttle between the transfer station and the landfill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferLink {
    pub large_capacity: f64,
    pub roundtrip_to_landfill: f64,
}

/// Serialized form of an instance, field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceData {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub case_kind: CaseKind,
    #[serde(rename = "capacity_Q")]
    pub capacity: f64,
    #[serde(rename = "time_limit_T")]
    pub time_limit: f64,
    #[serde(
        rename = "max_routes_K",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub max_routes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_time_model: Option<ServiceTimeModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waste_fraction: Option<f64>,
    pub micro_routes: Vec<MicroRoute>,
    pub stops: Vec<Stop>,
    #[serde(rename = "d_km")]
    pub distance: Vec<Vec<f64>>,
    #[serde(rename = "h_h")]
    pub travel_time: Vec<Vec<f64>>,
}

/// A validated single-shift instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    data: InstanceData,
    size: usize,
    d: Vec<f64>,
    h: Vec<f64>,
    depot: usize,
    landfill: Option<usize>,
    micro_nodes: Vec<usize>,
    node_micro: Vec<Option<usize>>,
    by_id: HashMap<u32, usize>,
    waste: Vec<f64>,
    service: Vec<f64>,
    clamped: Vec<bool>,
}

fn invariant(msg: impl Into<String>) -> InstanceError {
    InstanceError::InvariantViolation(msg.into())
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

impl Instance {
    /// Validates `data`, including the per-micro-route demand check.
    pub fn from_data(data: InstanceData) -> Result<Self, InstanceError> {
        let inst = Self::from_data_unchecked_demand(data)?;
        inst.check_demand()?;
        Ok(inst)
    }

    /// Validates every structural invariant but accepts micro-routes whose
    /// scaled waste exceeds the vehicle capacity.
    pub fn from_data_unchecked_demand(data: InstanceData) -> Result<Self, InstanceError> {
        if !(data.capacity.is_finite() && data.capacity > 0.0) {
            return Err(invariant("capacity_Q must be > 0"));
        }
        if !(data.time_limit.is_finite() && data.time_limit > 0.0) {
            return Err(invariant("time_limit_T must be > 0"));
        }
        let fraction = data.waste_fraction.unwrap_or(1.0);
        if !(fraction.is_finite() && fraction > 0.0) {
            return Err(invariant("waste_fraction must be > 0"));
        }
        match data.case_kind {
            CaseKind::CurrentSituation => {
                if data.transfer.is_some() {
                    return Err(invariant(
                        "transfer is only allowed for transfer_station instances",
                    ));
                }
                if data.max_routes == Some(0) {
                    return Err(invariant("max_routes_K must be >= 1"));
                }
            }
            CaseKind::TransferStation => {
                if data.max_routes.is_some() {
                    return Err(invariant(
                        "max_routes_K is only allowed for current_situation instances",
                    ));
                }
            }
        }
        if let Some(t) = &data.transfer {
            if !(t.large_capacity.is_finite() && t.large_capacity > 0.0) {
                return Err(invariant("transfer.large_capacity must be > 0"));
            }
            if !finite_nonneg(t.roundtrip_to_landfill) {
                return Err(invariant("transfer.roundtrip_to_landfill must be >= 0"));
            }
        }
        let model = data.service_time_model.unwrap_or_default();
        model.validate()?;

        let mut by_id = HashMap::new();
        for (m, mr) in data.micro_routes.iter().enumerate() {
            if by_id.insert(mr.id, m).is_some() {
                return Err(invariant(format!("duplicate micro-route id {}", mr.id)));
            }
            if !(mr.internal_distance.is_finite() && mr.internal_distance > 0.0) {
                return Err(invariant(format!(
                    "micro-route {} has internal distance {} (must be > 0)",
                    mr.id, mr.internal_distance
                )));
            }
            if !finite_nonneg(mr.base_waste) {
                return Err(invariant(format!(
                    "micro-route {} has negative or non-finite waste {}",
                    mr.id, mr.base_waste
                )));
            }
            if let Some(s) = mr.service_time_override {
                if !finite_nonneg(s) {
                    return Err(invariant(format!(
                        "micro-route {} has invalid service_time_h",
                        mr.id
                    )));
                }
            }
        }

        let size = data.stops.len();
        let mut depot = None;
        let mut landfill = None;
        let mut node_micro = vec![None; size];
        let mut micro_nodes = vec![usize::MAX; data.micro_routes.len()];
        let mut seen = HashSet::new();
        for (node, stop) in data.stops.iter().enumerate() {
            if !seen.insert(*stop) {
                return Err(invariant(format!("stop {stop} listed twice")));
            }
            match stop {
                Stop::Depot => depot = Some(node),
                Stop::Landfill => landfill = Some(node),
                Stop::Micro(id) => {
                    let m = *by_id
                        .get(id)
                        .ok_or_else(|| invariant(format!("stop {id} has no micro-route record")))?;
                    micro_nodes[m] = node;
                    node_micro[node] = Some(m);
                }
            }
        }
        let depot = depot.ok_or_else(|| invariant("stops lack the depot"))?;
        match (data.case_kind, landfill) {
            (CaseKind::CurrentSituation, None) => {
                return Err(invariant(
                    "current_situation instance lacks the landfill stop",
                ));
            }
            (CaseKind::TransferStation, Some(_)) => {
                return Err(invariant(
                    "landfill stop is only addressable in current_situation instances",
                ));
            }
            _ => {}
        }
        if let Some(m) = micro_nodes.iter().position(|&n| n == usize::MAX) {
            return Err(invariant(format!(
                "micro-route {} is missing from stops",
                data.micro_routes[m].id
            )));
        }

        let d = flatten_matrix("d_km", &data.distance, size, &data.stops)?;
        let h = flatten_matrix("h_h", &data.travel_time, size, &data.stops)?;

        let mut inst = Instance {
            data,
            size,
            d,
            h,
            depot,
            landfill,
            micro_nodes,
            node_micro,
            by_id,
            waste: Vec::new(),
            service: Vec::new(),
            clamped: Vec::new(),
        };
        inst.derive();
        Ok(inst)
    }

    fn derive(&mut self) {
        let fraction = self.waste_fraction();
        let model = self.service_model();
        self.waste.clear();
        self.service.clear();
        self.clamped.clear();
        for mr in &self.data.micro_routes {
            let q = mr.base_waste * fraction;
            let st = model.service_time(mr.internal_distance, q);
            self.waste.push(q);
            match mr.service_time_override {
                Some(s) => {
                    self.service.push(s);
                    self.clamped.push(false);
                }
                None => {
                    self.service.push(st.hours);
                    self.clamped.push(st.clamped);
                }
            }
        }
    }

    /// Rejects the instance when some micro-route alone exceeds capacity.
    pub fn check_demand(&self) -> Result<(), InstanceError> {
        for (m, mr) in self.data.micro_routes.iter().enumerate() {
            if self.waste[m] > self.data.capacity {
                return Err(InstanceError::InfeasibleDemand {
                    id: mr.id,
                    waste: self.waste[m],
                    capacity: self.data.capacity,
                });
            }
        }
        Ok(())
    }

    /// Returns the instance under `scenario`; waste fractions compose multiplicatively.
    pub fn scale(&self, scenario: Scenario) -> Result<Instance, InstanceError> {
        let scenario = Scenario::new(scenario.waste_fraction)?;
        let mut scaled = self.clone();
        scaled.data.waste_fraction = Some(self.waste_fraction() * scenario.waste_fraction);
        scaled.derive();
        scaled.check_demand()?;
        Ok(scaled)
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn name(&self) -> Option<&str> {
        self.data.name.as_deref()
    }

    pub fn case_kind(&self) -> CaseKind {
        self.data.case_kind
    }

    pub fn capacity(&self) -> f64 {
        self.data.capacity
    }

    pub fn time_limit(&self) -> f64 {
        self.data.time_limit
    }

    /// Route budget K of the three-index model; defaults to the number of micro-routes.
    pub fn max_routes(&self) -> usize {
        self.data
            .max_routes
            .unwrap_or(self.data.micro_routes.len())
            .max(1)
    }

    pub fn transfer(&self) -> Option<TransferLink> {
        self.data.transfer
    }

    pub fn service_model(&self) -> ServiceTimeModel {
        self.data.service_time_model.unwrap_or_default()
    }

    pub fn waste_fraction(&self) -> f64 {
        self.data.waste_fraction.unwrap_or(1.0)
    }

    pub fn micro_routes(&self) -> &[MicroRoute] {
        &self.data.micro_routes
    }

    pub fn num_micro(&self) -> usize {
        self.data.micro_routes.len()
    }

    /// Number of stops (rows of the matrices).
    pub fn num_nodes(&self) -> usize {
        self.size
    }

    pub fn stops(&self) -> &[Stop] {
        &self.data.stops
    }

    pub fn stop(&self, node: usize) -> Stop {
        self.data.stops[node]
    }

    pub fn depot(&self) -> usize {
        self.depot
    }

    pub fn landfill(&self) -> Option<usize> {
        self.landfill
    }

    /// Matrix node of micro-route index `m`.
    pub fn micro_node(&self, m: usize) -> usize {
        self.micro_nodes[m]
    }

    /// Micro-route index of matrix node `node`, if it is a micro-route.
    pub fn node_micro(&self, node: usize) -> Option<usize> {
        self.node_micro[node]
    }

    pub fn micro_index(&self, id: u32) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn node_of(&self, stop: Stop) -> Option<usize> {
        match stop {
            Stop::Depot => Some(self.depot),
            Stop::Landfill => self.landfill,
            Stop::Micro(id) => self.micro_index(id).map(|m| self.micro_nodes[m]),
        }
    }

    /// Nodes in canonical order: depot, landfill (if any), then micro-routes
    /// in the order they are listed.
    pub fn canonical_nodes(&self) -> Vec<usize> {
        let mut nodes = vec![self.depot];
        nodes.extend(self.landfill);
        nodes.extend(self.micro_nodes.iter().copied());
        nodes
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.size + j]
    }

    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.size + j]
    }

    /// Effective (scaled) waste of micro-route index `m`, kg.
    #[inline]
    pub fn waste(&self, m: usize) -> f64 {
        self.waste[m]
    }

    /// Effective service time of micro-route index `m`, hours.
    #[inline]
    pub fn service(&self, m: usize) -> f64 {
        self.service[m]
    }

    /// Service time charged on arrival at `node`; zero for depot and landfill.
    #[inline]
    pub fn node_service(&self, node: usize) -> f64 {
        self.node_micro[node].map_or(0.0, |m| self.service[m])
    }

    #[inline]
    pub fn node_waste(&self, node: usize) -> f64 {
        self.node_micro[node].map_or(0.0, |m| self.waste[m])
    }

    pub fn service_clamped(&self, m: usize) -> bool {
        self.clamped[m]
    }

    pub fn total_waste(&self) -> f64 {
        self.waste.iter().sum()
    }

    pub fn total_internal_distance(&self) -> f64 {
        self.data
            .micro_routes
            .iter()
            .map(|m| m.internal_distance)
            .sum()
    }

    /// Returns a copy with every distance multiplied by `factor`.
    pub fn with_scaled_distances(&self, factor: f64) -> Result<Instance, InstanceError> {
        let mut data = self.data.clone();
        for row in &mut data.distance {
            for x in row {
                *x *= factor;
            }
        }
        Instance::from_data_unchecked_demand(data)
    }
}

fn flatten_matrix(
    label: &str,
    rows: &[Vec<f64>],
    size: usize,
    stops: &[Stop],
) -> Result<Vec<f64>, InstanceError> {
    if rows.len() != size {
        return Err(invariant(format!(
            "{label} has {} rows but there are {size} stops",
            rows.len()
        )));
    }
    let mut flat = Vec::with_capacity(size * size);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != size {
            return Err(invariant(format!(
                "{label} row {} ({}) has {} entries, expected {size}",
                i,
                stops[i],
                row.len()
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !finite_nonneg(x) {
                return Err(invariant(format!(
                    "{label}[{}][{}] = {x} is negative or not finite",
                    stops[i], stops[j]
                )));
            }
            if i == j && x != 0.0 {
                return Err(invariant(format!(
                    "{label} diagonal entry for {} is {x}, expected 0",
                    stops[i]
                )));
            }
            flat.push(x);
        }
    }
    Ok(flat)
}

/// Parses and validates an instance from its JSON encoding.
pub fn load_instance(bytes: &[u8]) -> Result<Instance, InstanceError> {
    let data: InstanceData =
        serde_json::from_slice(bytes).map_err(|e| InstanceError::Schema(e.to_string()))?;
    Instance::from_data(data)
}

/// Serializes an instance to pretty-printed JSON.
pub fn save_instance(instance: &Instance) -> Vec<u8> {
    let mut out =
        serde_json::to_vec_pretty(instance.data()).expect("instance data always serializes");
    out.push(b'\n');
    out
}

/// Free-function form of [`Instance::scale`].
pub fn scale_scenario(instance: &Instance, scenario: Scenario) -> Result<Instance, InstanceError> {
    instance.scale(scenario)
}
