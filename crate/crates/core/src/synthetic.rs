//! Generated instances for tests, examples and benchmarks.
//!
//! Geometry is planar: micro-routes sit in a city box around the origin,
//! the depot just outside it and the landfill further away. Distances are
//! Euclidean times a road factor and travel times assume a constant speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CaseKind, Instance, InstanceData, MicroRoute, Stop, TransferLink};

const ROAD_FACTOR: f64 = 1.3;
const SPEED_KMH: f64 = 35.0;

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * ROAD_FACTOR
}

fn matrices(points: &[Point]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|&a| points.iter().map(|&b| dist(a, b)).collect())
        .collect();
    let h = d
        .iter()
        .map(|row| row.iter().map(|x| x / SPEED_KMH).collect())
        .collect();
    (d, h)
}

struct Layout {
    name: String,
    case_kind: CaseKind,
    capacity: f64,
    time_limit: f64,
    micro_routes: Vec<MicroRoute>,
    depot: Point,
    landfill: Point,
    micro_points: Vec<Point>,
    transfer: Option<TransferLink>,
}

impl Layout {
    fn build(self) -> Instance {
        let mut stops = vec![Stop::Depot];
        let mut points = vec![self.depot];
        if self.case_kind == CaseKind::CurrentSituation {
            stops.push(Stop::Landfill);
            points.push(self.landfill);
        }
        stops.extend(self.micro_routes.iter().map(|m| Stop::Micro(m.id)));
        points.extend(self.micro_points.iter().copied());
        let (d, h) = matrices(&points);
        Instance::from_data(InstanceData {
            name: Some(self.name),
            case_kind: self.case_kind,
            capacity: self.capacity,
            time_limit: self.time_limit,
            max_routes: None,
            transfer: self.transfer,
            service_time_model: None,
            waste_fraction: None,
            micro_routes: self.micro_routes,
            stops,
            distance: d,
            travel_time: h,
        })
        .expect("generated instances are valid")
    }
}

/// A small random instance with ids `1..=n`.
///
/// Capacity varies between 10 and 20 t and the shift between 6 and 9 h, so
/// both limits bind on a fair share of seeds.
pub fn random_instance(case_kind: CaseKind, n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity = rng.gen_range(10_000.0..20_000.0);
    let time_limit = rng.gen_range(6.0..9.0);
    let depot = (rng.gen_range(5.0..7.0), rng.gen_range(-1.0..1.0));
    let angle: f64 = rng.gen_range(-1.0..1.0);
    let reach = rng.gen_range(8.0..16.0);
    let landfill = (depot.0 + reach * angle.cos(), depot.1 + reach * angle.sin());
    let mut micro_routes = Vec::with_capacity(n);
    let mut micro_points = Vec::with_capacity(n);
    for id in 1..=n as u32 {
        let internal = rng.gen_range(15.0..45.0);
        let density = rng.gen_range(60.0..230.0);
        micro_routes.push(MicroRoute::new(id, internal, density * internal));
        micro_points.push((rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)));
    }
    let transfer = (case_kind == CaseKind::TransferStation).then(|| TransferLink {
        large_capacity: 25_000.0,
        roundtrip_to_landfill: 2.0 * dist(depot, landfill),
    });
    Layout {
        name: format!("random-{case_kind}-{n}-{seed}"),
        case_kind,
        capacity,
        time_limit,
        micro_routes,
        depot,
        landfill,
        micro_points,
        transfer,
    }
    .build()
}

/// Day-shift micro-routes: id, internal distance in km, average waste in kg.
pub const DAY_SHIFT: [(u32, f64, f64); 17] = [
    (16, 52.68, 8_186.0),
    (17, 63.74, 8_997.0),
    (18, 53.22, 10_674.0),
    (19, 53.93, 10_502.0),
    (20, 53.87, 9_796.0),
    (21, 91.89, 7_390.0),
    (22, 38.11, 9_524.0),
    (23, 114.81, 6_601.0),
    (24, 102.49, 10_239.0),
    (25, 89.67, 7_139.0),
    (26, 85.03, 9_565.0),
    (27, 74.70, 7_982.0),
    (28, 58.71, 8_618.0),
    (29, 73.38, 8_240.0),
    (30, 55.85, 11_175.0),
    (31, 48.20, 8_733.0),
    (32, 102.77, 5_471.0),
];

pub const NIGHT_SHIFT: [(u32, f64, f64); 15] = [
    (1, 44.80, 11_352.0),
    (2, 47.29, 9_285.0),
    (3, 42.96, 10_952.0),
    (4, 44.62, 11_246.0),
    (5, 43.61, 11_183.0),
    (6, 45.78, 10_096.0),
    (7, 45.77, 10_095.0),
    (8, 47.09, 11_811.0),
    (9, 45.63, 10_993.0),
    (10, 46.68, 8_950.0),
    (11, 45.02, 9_254.0),
    (12, 45.18, 11_183.0),
    (13, 49.59, 9_920.0),
    (14, 43.04, 10_245.0),
    (15, 46.11, 12_063.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Day,
    Night,
}

/// Where the vehicles are based in a city instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    /// Depot plus landfill, no transfer station.
    Current,
    /// Transfer station at the depot.
    StationAtDepot,
    /// Transfer station in an industrial area on the landfill side.
    StationIndustrial,
}

/// A city shift with the real micro-route sizes and invented positions.
///
/// The city is a 10 x 8 km box, the depot lies 2 km from its edge and the
/// landfill 14 km beyond the depot. Positions are drawn from `seed`.
pub fn city_shift(shift: Shift, site: Site, seed: u64) -> Instance {
    let table: &[(u32, f64, f64)] = match shift {
        Shift::Day => &DAY_SHIFT,
        Shift::Night => &NIGHT_SHIFT,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let micro_points: Vec<Point> = table
        .iter()
        .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-4.0..4.0)))
        .collect();
    let depot_a = (7.0, 0.0);
    let landfill = (7.0 + 14.0 / ROAD_FACTOR, -1.0);
    let station_b = (9.0, -5.0);
    let (case_kind, depot, transfer) = match site {
        Site::Current => (CaseKind::CurrentSituation, depot_a, None),
        Site::StationAtDepot => (
            CaseKind::TransferStation,
            depot_a,
            Some(TransferLink {
                large_capacity: 25_000.0,
                roundtrip_to_landfill: 25.31,
            }),
        ),
        Site::StationIndustrial => (
            CaseKind::TransferStation,
            station_b,
            Some(TransferLink {
                large_capacity: 25_000.0,
                roundtrip_to_landfill: 28.43,
            }),
        ),
    };
    let shift_name = match shift {
        Shift::Day => "day",
        Shift::Night => "night",
    };
    Layout {
        name: format!("city-{shift_name}-{case_kind}"),
        case_kind,
        capacity: 15_750.0,
        time_limit: 8.0,
        micro_routes: table
            .iter()
            .map(|&(id, km, kg)| MicroRoute::new(id, km, kg))
            .collect(),
        depot,
        landfill,
        micro_points,
        transfer,
    }
    .build()
}

/// A current-situation instance and its transfer-station twin in which the
/// landfill can only be reached through the depot.
///
/// Every landfill detour `i -> L -> j` then costs exactly the station detour
/// `i -> 0 -> j` plus a round trip depot-landfill, and the large vehicle is
/// at least as big as a collection vehicle. The station case can never be
/// longer in total.
pub fn dominated_pair(n: usize, seed: u64) -> (Instance, Instance) {
    let base = random_instance(CaseKind::TransferStation, n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let reach = rng.gen_range(5.0..15.0);
    let mut ts_data = base.data().clone();
    ts_data.name = Some(format!("dominated-ts-{n}-{seed}"));
    ts_data.transfer = Some(TransferLink {
        large_capacity: 25_000.0,
        roundtrip_to_landfill: 2.0 * reach,
    });

    let mut cs_data = ts_data.clone();
    cs_data.name = Some(format!("dominated-cs-{n}-{seed}"));
    cs_data.case_kind = CaseKind::CurrentSituation;
    cs_data.transfer = None;
    cs_data.stops.insert(1, Stop::Landfill);
    // Landfill is inserted as node 1; old node k > 0 becomes k + 1.
    let extend = |matrix: &Vec<Vec<f64>>, leg: f64| -> Vec<Vec<f64>> {
        let size = matrix.len();
        let mut out = vec![vec![0.0; size + 1]; size + 1];
        let old = |k: usize| if k == 0 { 0 } else { k - 1 };
        for i in 0..=size {
            for j in 0..=size {
                out[i][j] = match (i, j) {
                    (1, 1) => 0.0,
                    (1, j) => matrix[0][old(j)] + leg,
                    (i, 1) => matrix[old(i)][0] + leg,
                    (i, j) => matrix[old(i)][old(j)],
                };
            }
        }
        out
    };
    cs_data.distance = extend(&ts_data.distance, reach);
    cs_data.travel_time = extend(&ts_data.travel_time, reach / SPEED_KMH);
    (
        Instance::from_data(cs_data).expect("generated instances are valid"),
        Instance::from_data(ts_data).expect("generated instances are valid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(CaseKind::CurrentSituation, 5, 11);
        let b = random_instance(CaseKind::CurrentSituation, 5, 11);
        assert_eq!(a, b);
        assert_ne!(a, random_instance(CaseKind::CurrentSituation, 5, 12));
    }

    #[test]
    fn city_day_shift_has_seventeen_micro_routes() {
        let inst = city_shift(Shift::Day, Site::Current, 1);
        assert_eq!(inst.num_micro(), 17);
        assert!((inst.total_waste() - 148_832.0).abs() < 1e-6);
        let gap = inst.d(inst.depot(), inst.landfill().unwrap());
        assert!((gap - 14.0).abs() < 0.2, "{gap}");
    }

    #[test]
    fn dominated_pair_routes_landfill_through_depot() {
        let (cs, ts) = dominated_pair(4, 3);
        let l = cs.landfill().unwrap();
        let reach = ts.transfer().unwrap().roundtrip_to_landfill / 2.0;
        for m in 0..cs.num_micro() {
            let i = cs.micro_node(m);
            let t = ts.micro_node(m);
            assert!((cs.d(i, l) - (ts.d(t, ts.depot()) + reach)).abs() < 1e-12);
            assert_eq!(cs.d(i, cs.depot()), ts.d(t, ts.depot()));
        }
        assert!((cs.d(l, cs.depot()) - reach).abs() < 1e-12);
    }
}
