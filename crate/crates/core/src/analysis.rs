//! Scenario sweeps and the transfer-station comparison.
//!
//! A case (current situation or one transfer-station site) is a pair of
//! shift instances. Each shift is solved on its own; distances of the two
//! shifts add up and the fleet is the larger of the two shift fleets.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{consolidate_tours, evaluate_plan_with};
use crate::exact::{solve_brute_force_with, solve_exact, SearchLimits, SolveResult};
use crate::heuristic::{solve_heuristic, AnnealingParams};
use crate::model::{CaseKind, Instance, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("percent difference against a zero reference value")]
    DivisionByZero,
    #[error("shift pair mismatch: {0}")]
    MismatchedShifts(String),
    #[error("infeasible input: {0}")]
    InfeasibleInput(String),
    #[error("solver failed: {0}")]
    Solver(String),
}

/// Relative reduction of `value_ts` with respect to `value_cs`, in percent.
/// Positive means the transfer-station case is smaller.
pub fn percent_diff(value_cs: f64, value_ts: f64) -> Result<f64, AnalysisError> {
    if value_cs == 0.0 {
        return Err(AnalysisError::DivisionByZero);
    }
    Ok((value_cs - value_ts) * 100.0 / value_cs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferTrips {
    pub trips: u64,
    pub distance: f64,
}

/// Large-vehicle trips needed to move a shift's waste from the station.
pub fn transfer_trips(shift_waste: f64, large_capacity: f64, roundtrip: f64) -> TransferTrips {
    assert!(large_capacity > 0.0, "large_capacity must be positive");
    let trips = if shift_waste <= 0.0 {
        0
    } else {
        (shift_waste / large_capacity - 1e-9).ceil() as u64
    };
    TransferTrips {
        trips,
        distance: trips as f64 * roundtrip,
    }
}

/// Day and night instances of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPair {
    pub day: Instance,
    pub night: Instance,
}

impl ShiftPair {
    pub fn new(day: Instance, night: Instance) -> Result<Self, AnalysisError> {
        let mismatch = |what: &str| {
            Err(AnalysisError::MismatchedShifts(format!(
                "{what} differs between shifts"
            )))
        };
        if day.case_kind() != night.case_kind() {
            return mismatch("case_kind");
        }
        if day.capacity() != night.capacity() {
            return mismatch("capacity_Q");
        }
        if day.time_limit() != night.time_limit() {
            return mismatch("time_limit_T");
        }
        Ok(ShiftPair { day, night })
    }

    pub fn case_kind(&self) -> CaseKind {
        self.day.case_kind()
    }

    pub fn total_waste(&self) -> f64 {
        self.day.total_waste() + self.night.total_waste()
    }
}

/// Distance and fleet of one solved shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftOutcome {
    /// Arc plus internal distance of the collection routes.
    pub route_distance: f64,
    pub vehicles: usize,
    pub transfer: Option<TransferTrips>,
    pub feasible: bool,
}

impl ShiftOutcome {
    pub fn total_distance(&self) -> f64 {
        self.route_distance + self.transfer.map_or(0.0, |t| t.distance)
    }
}

/// Measures a solved shift. Transfer-station tours are packed into vehicles
/// before counting, and the station-to-landfill shuttle is added when the
/// instance declares one.
pub fn shift_outcome(inst: &Instance, result: &SolveResult) -> Result<ShiftOutcome, AnalysisError> {
    if !result.has_plan() {
        return Err(AnalysisError::InfeasibleInput(format!(
            "solver status {}",
            result.status
        )));
    }
    let accounting = crate::evaluator::TimeAccounting::Full;
    let metrics = evaluate_plan_with(inst, &result.plan, accounting)
        .map_err(|e| AnalysisError::InfeasibleInput(e.to_string()))?;
    let packed = consolidate_tours(inst, &result.plan)
        .map_err(|e| AnalysisError::InfeasibleInput(e.to_string()))?;
    let transfer = match (inst.case_kind(), inst.transfer()) {
        (CaseKind::TransferStation, Some(link)) => Some(transfer_trips(
            inst.total_waste(),
            link.large_capacity,
            link.roundtrip_to_landfill,
        )),
        _ => None,
    };
    Ok(ShiftOutcome {
        route_distance: metrics.total_distance,
        vehicles: packed.nonempty_routes(),
        transfer,
        feasible: metrics.feasible,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total_distance: f64,
    pub vehicles: usize,
    pub transfer_trips: u64,
}

/// Sums both shifts; the fleet is the larger shift fleet, shuttle excluded.
pub fn aggregate_shifts(
    day: &ShiftOutcome,
    night: &ShiftOutcome,
) -> Result<Aggregate, AnalysisError> {
    for (label, shift) in [("day", day), ("night", night)] {
        if !shift.feasible {
            return Err(AnalysisError::InfeasibleInput(format!(
                "{label} shift plan is infeasible"
            )));
        }
    }
    Ok(Aggregate {
        total_distance: day.total_distance() + night.total_distance(),
        vehicles: day.vehicles.max(night.vehicles),
        transfer_trips: day.transfer.map_or(0, |t| t.trips) + night.transfer.map_or(0, |t| t.trips),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverChoice {
    Exact(SearchLimits),
    Heuristic(AnnealingParams),
    Brute,
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Heuristic(AnnealingParams::default())
    }
}

pub fn solve_with(inst: &Instance, solver: &SolverChoice) -> Result<SolveResult, AnalysisError> {
    match solver {
        SolverChoice::Exact(limits) => Ok(solve_exact(inst, *limits)),
        SolverChoice::Heuristic(params) => {
            solve_heuristic(inst, params).map_err(|e| AnalysisError::Solver(e.to_string()))
        }
        SolverChoice::Brute => solve_brute_force_with(inst, crate::evaluator::TimeAccounting::Full)
            .map_err(|e| AnalysisError::Solver(e.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub name: String,
    pub pair: ShiftPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepInput {
    pub cs: SweepCase,
    pub ts: Vec<SweepCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseCell {
    pub total_distance: f64,
    pub vehicles: usize,
    pub day: ShiftOutcome,
    pub night: ShiftOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub waste_fraction: f64,
    pub total_waste_kg: f64,
    pub cs: Option<CaseCell>,
    pub ts: Vec<Option<CaseCell>>,
    pub ts_pct_diff: Vec<Option<f64>>,
    pub ts_vehicles_pct_diff: Vec<Option<f64>>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Averages {
    pub ts_pct_diff: Vec<Option<f64>>,
    pub ts_vehicles_pct_diff: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub cs_name: String,
    pub ts_names: Vec<String>,
    pub rows: Vec<ScenarioRow>,
    pub averages: Averages,
}

fn solve_case(case: &SweepCase, fraction: f64, solver: &SolverChoice) -> Result<CaseCell, String> {
    let scenario = Scenario::new(fraction).map_err(|e| e.to_string())?;
    let mut shifts = Vec::with_capacity(2);
    for (label, inst) in [("day", &case.pair.day), ("night", &case.pair.night)] {
        let scaled = inst
            .scale(scenario)
            .map_err(|e| format!("{} {label}: {e}", case.name))?;
        let result =
            solve_with(&scaled, solver).map_err(|e| format!("{} {label}: {e}", case.name))?;
        shifts.push(
            shift_outcome(&scaled, &result).map_err(|e| format!("{} {label}: {e}", case.name))?,
        );
    }
    let night = shifts.pop().expect("night");
    let day = shifts.pop().expect("day");
    let agg = aggregate_shifts(&day, &night).map_err(|e| format!("{}: {e}", case.name))?;
    Ok(CaseCell {
        total_distance: agg.total_distance,
        vehicles: agg.vehicles,
        day,
        night,
    })
}

fn sweep_row(input: &SweepInput, fraction: f64, solver: &SolverChoice) -> ScenarioRow {
    let mut errors = Vec::new();
    let mut cell = |case: &SweepCase| match solve_case(case, fraction, solver) {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let cs = cell(&input.cs);
    let ts: Vec<Option<CaseCell>> = input.ts.iter().map(&mut cell).collect();
    let diff = |pick: fn(&CaseCell) -> f64| -> Vec<Option<f64>> {
        ts.iter()
            .map(|t| match (&cs, t) {
                (Some(c), Some(t)) => percent_diff(pick(c), pick(t)).ok(),
                _ => None,
            })
            .collect()
    };
    let ts_pct_diff = diff(|c| c.total_distance);
    let ts_vehicles_pct_diff = diff(|c| c.vehicles as f64);
    ScenarioRow {
        waste_fraction: fraction,
        total_waste_kg: fraction * input.cs.pair.total_waste(),
        cs,
        ts,
        ts_pct_diff,
        ts_vehicles_pct_diff,
        errors,
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Scales every case to each fraction, solves both shifts and compares.
/// Rows are computed in parallel; a row whose case fails carries the error.
pub fn run_sweep(input: &SweepInput, fractions: &[f64], solver: &SolverChoice) -> ScenarioReport {
    let rows: Vec<ScenarioRow> = fractions
        .par_iter()
        .map(|&f| sweep_row(input, f, solver))
        .collect();
    let k = input.ts.len();
    let averages = Averages {
        ts_pct_diff: (0..k)
            .map(|i| mean(rows.iter().map(|r| r.ts_pct_diff[i])))
            .collect(),
        ts_vehicles_pct_diff: (0..k)
            .map(|i| mean(rows.iter().map(|r| r.ts_vehicles_pct_diff[i])))
            .collect(),
    };
    ScenarioReport {
        cs_name: input.cs.name.clone(),
        ts_names: input.ts.iter().map(|c| c.name.clone()).collect(),
        rows,
        averages,
    }
}

fn fmt2(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.2}"))
}

fn report_header(report: &ScenarioReport) -> Vec<String> {
    let mut header = vec![
        "waste_fraction".to_string(),
        "total_waste_kg".into(),
        format!("{}_distance_km", report.cs_name),
        format!("{}_vehicles", report.cs_name),
    ];
    for name in &report.ts_names {
        header.push(format!("{name}_distance_km"));
        header.push(format!("{name}_pct_diff"));
        header.push(format!("{name}_vehicles"));
        header.push(format!("{name}_vehicles_pct_diff"));
    }
    header.push("error".into());
    header
}

fn report_records(report: &ScenarioReport) -> Vec<Vec<String>> {
    let mut records = Vec::new();
    for row in &report.rows {
        let mut rec = vec![
            format!("{:.2}", row.waste_fraction),
            format!("{:.2}", row.total_waste_kg),
            fmt2(row.cs.as_ref().map(|c| c.total_distance)),
            row.cs
                .as_ref()
                .map_or_else(String::new, |c| c.vehicles.to_string()),
        ];
        for (i, cell) in row.ts.iter().enumerate() {
            rec.push(fmt2(cell.as_ref().map(|c| c.total_distance)));
            rec.push(fmt2(row.ts_pct_diff[i]));
            rec.push(
                cell.as_ref()
                    .map_or_else(String::new, |c| c.vehicles.to_string()),
            );
            rec.push(fmt2(row.ts_vehicles_pct_diff[i]));
        }
        rec.push(row.errors.join("; "));
        records.push(rec);
    }
    let mut avg = vec![
        "average".to_string(),
        String::new(),
        String::new(),
        String::new(),
    ];
    for i in 0..report.ts_names.len() {
        avg.push(String::new());
        avg.push(fmt2(report.averages.ts_pct_diff[i]));
        avg.push(String::new());
        avg.push(fmt2(report.averages.ts_vehicles_pct_diff[i]));
    }
    avg.push(String::new());
    records.push(avg);
    records
}

fn write_csv(header: &[String], records: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for rec in records {
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Machine-readable report, values rounded to two decimals.
pub fn report_csv(report: &ScenarioReport) -> String {
    write_csv(&report_header(report), &report_records(report))
}

/// Aligned text version of [`report_csv`].
pub fn report_text(report: &ScenarioReport) -> String {
    let header = report_header(report);
    let records = report_records(report);
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            records
                .iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&records) {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| {
                if c + 1 == row.len() {
                    v.clone()
                } else {
                    format!("{v:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Fraction against distance and fleet for each case, one row per fraction.
pub fn plot_csv(report: &ScenarioReport) -> String {
    let names: Vec<&String> = std::iter::once(&report.cs_name)
        .chain(&report.ts_names)
        .collect();
    let mut header = vec!["waste_fraction".to_string()];
    header.extend(names.iter().map(|n| format!("{n}_distance_km")));
    header.extend(names.iter().map(|n| format!("{n}_vehicles")));
    let records: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let cells: Vec<&Option<CaseCell>> = std::iter::once(&row.cs).chain(&row.ts).collect();
            let mut rec = vec![format!("{:.2}", row.waste_fraction)];
            rec.extend(
                cells
                    .iter()
                    .map(|c| fmt2(c.as_ref().map(|c| c.total_distance))),
            );
            rec.extend(cells.iter().map(|c| {
                c.as_ref()
                    .map_or_else(String::new, |c| c.vehicles.to_string())
            }));
            rec
        })
        .collect();
    write_csv(&header, &records)
}
