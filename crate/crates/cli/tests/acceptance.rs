//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use microroute::analysis::{
    aggregate_shifts, percent_diff, run_sweep, transfer_trips, ShiftOutcome, ShiftPair,
    SolverChoice, SweepCase, SweepInput,
};
use microroute::evaluator::evaluate_plan;
use microroute::exact::{enumerate_plans, solve_brute_force};
use microroute::milp::{
    assignment_from_plan, build_cs_model, build_ts_model, DegreeRepair, MilpModel, FEAS_TOL,
};
use microroute::synthetic::{city_shift, dominated_pair, random_instance, Shift, Site};
use microroute::{
    save_instance, solve_exact, solve_heuristic, AnnealingParams, CaseKind, Instance, SearchLimits,
    ServiceTimeModel, SolveResult, TimeAccounting,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Inclusive tolerance; the epsilon absorbs binary representation of cents.
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol + 1e-9
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn service_times() -> Verdict {
    let started = Instant::now();
    let fractions = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.05, 1.1];
    let hours = [1.67, 1.88, 2.13, 2.47, 2.93, 3.62, 4.09, 4.71];
    let speeds = [22.77, 20.32, 17.88, 15.43, 12.99, 10.54, 9.32, 8.09];
    let model = ServiceTimeModel::default();
    let mut worst: f64 = 0.0;
    for (i, f) in fractions.iter().enumerate() {
        let st = model.service_time(38.11, 9_524.0 * f);
        worst = worst
            .max((st.hours - hours[i]).abs())
            .max((st.speed - speeds[i]).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst <= 0.01 && secs < 1.0,
        format!("max deviation {worst:.4}, {secs:.3} s"),
    )
}

fn transfer_arithmetic() -> Verdict {
    let t = transfer_trips(158_628.0, 25_000.0, 25.31);
    verdict(
        t.trips == 7 && round2(t.distance) == 177.17,
        format!("{} trips, {:.2} km", t.trips, t.distance),
    )
}

fn outcome(total: f64, transfer: Option<(u64, f64)>) -> ShiftOutcome {
    let transfer =
        transfer.map(|(trips, distance)| microroute::analysis::TransferTrips { trips, distance });
    ShiftOutcome {
        route_distance: total - transfer.map_or(0.0, |t| t.distance),
        vehicles: 0,
        transfer,
        feasible: true,
    }
}

fn comparison_metric() -> Verdict {
    let pct = percent_diff(2_673.45, 2_511.74).unwrap();
    let cs = aggregate_shifts(&outcome(1_116.04, None), &outcome(1_557.41, None)).unwrap();
    let ts1 = aggregate_shifts(
        &outcome(1_517.76, Some((6, 128.46))),
        &outcome(993.99, Some((7, 177.17))),
    )
    .unwrap();
    let ts2 = aggregate_shifts(
        &outcome(1_552.53, Some((6, 143.40))),
        &outcome(1_156.76, Some((7, 199.01))),
    )
    .unwrap();
    let ok = close(pct, 6.05, 0.005)
        && close(cs.total_distance, 2_673.45, 0.01)
        && close(ts1.total_distance, 2_511.74, 0.01)
        && close(ts2.total_distance, 2_709.29, 0.01);
    verdict(
        ok,
        format!(
            "{pct:.4}%, totals {:.2} / {:.2} / {:.2} km",
            cs.total_distance, ts1.total_distance, ts2.total_distance
        ),
    )
}

/// The random campaign shared by the oracle and heuristic criteria.
fn campaign() -> Vec<Instance> {
    let mut out = Vec::new();
    for case in [CaseKind::CurrentSituation, CaseKind::TransferStation] {
        for i in 0..100u64 {
            out.push(random_instance(case, 2 + (i as usize % 6), 1000 + i));
        }
    }
    out
}

fn oracle_equivalence(instances: &[Instance], optima: &mut Vec<SolveResult>) -> Verdict {
    let started = Instant::now();
    let mut mismatches = 0;
    for inst in instances {
        let brute = solve_brute_force(inst).expect("campaign sizes are within the oracle limit");
        let exact = solve_exact(inst, SearchLimits::default());
        let same = brute.status == exact.status
            && (!brute.has_plan() || rel_eq(brute.objective, exact.objective));
        if !same {
            mismatches += 1;
        }
        optima.push(brute);
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 300.0,
        format!(
            "{} instances, {mismatches} mismatches, {secs:.1} s",
            instances.len()
        ),
    )
}

fn model_for(inst: &Instance) -> MilpModel {
    match inst.case_kind() {
        CaseKind::CurrentSituation => build_cs_model(inst, TimeAccounting::Full).unwrap(),
        CaseKind::TransferStation => build_ts_model(inst, DegreeRepair::Repaired).unwrap(),
    }
}

fn milp_equivalence() -> Verdict {
    let mut instances = 0;
    let mut plans = 0usize;
    let mut disagreements = 0;
    let mut wrong_optima = 0;
    for case in [CaseKind::CurrentSituation, CaseKind::TransferStation] {
        for i in 0..12u64 {
            let inst = random_instance(case, 2 + (i as usize % 4), 4000 + i);
            let model = model_for(&inst);
            let mut best = f64::INFINITY;
            for plan in enumerate_plans(&inst).unwrap() {
                plans += 1;
                let eval_ok = evaluate_plan(&inst, &plan)
                    .map(|m| m.feasible)
                    .unwrap_or(false);
                let values = assignment_from_plan(&inst, &model, &plan).ok();
                let milp_ok = values
                    .as_ref()
                    .is_some_and(|v| model.is_feasible(v, FEAS_TOL));
                if eval_ok != milp_ok {
                    disagreements += 1;
                }
                if let Some(v) = values.filter(|_| milp_ok) {
                    best = best.min(model.objective_value(&v));
                }
            }
            let brute = solve_brute_force(&inst).unwrap();
            let agrees = if brute.has_plan() {
                rel_eq(best, brute.objective)
            } else {
                best.is_infinite()
            };
            if !agrees {
                wrong_optima += 1;
            }
            instances += 1;
        }
    }
    verdict(
        disagreements == 0 && wrong_optima == 0,
        format!(
            "{instances} instances, {plans} plans, {disagreements} feasibility disagreements, \
             {wrong_optima} optimum mismatches"
        ),
    )
}

fn heuristic_quality(instances: &[Instance], optima: &[SolveResult]) -> Verdict {
    let started = Instant::now();
    let mut pairs = 0;
    let mut within = 0;
    let mut infeasible = 0;
    for (inst, opt) in instances.iter().zip(optima) {
        for seed in 0..3u64 {
            pairs += 1;
            let params = AnnealingParams {
                seed,
                ..AnnealingParams::default()
            };
            match solve_heuristic(inst, &params) {
                Ok(h) => {
                    let feasible = evaluate_plan(inst, &h.plan).is_ok_and(|m| m.feasible);
                    if !feasible {
                        infeasible += 1;
                    } else if h.objective <= opt.objective * 1.02 + 1e-9 {
                        within += 1;
                    }
                }
                // Only acceptable when the instance has no feasible plan.
                Err(_) if !opt.has_plan() => within += 1,
                Err(_) => infeasible += 1,
            }
        }
    }
    let share = within as f64 / pairs as f64;
    verdict(
        share >= 0.95 && infeasible == 0,
        format!(
            "{within}/{pairs} within 2% ({:.1}%), {infeasible} infeasible, {:.1} s",
            share * 100.0,
            started.elapsed().as_secs_f64()
        ),
    )
}

fn city_run() -> Verdict {
    let inst = city_shift(Shift::Day, Site::Current, 1);
    let started = Instant::now();
    let h = solve_heuristic(&inst, &AnnealingParams::default());
    let h_secs = started.elapsed().as_secs_f64();
    let h_ok = h
        .as_ref()
        .is_ok_and(|r| evaluate_plan(&inst, &r.plan).is_ok_and(|m| m.feasible));
    let limits = SearchLimits {
        max_seconds: Some(1800.0),
        ..SearchLimits::default()
    };
    let e = solve_exact(&inst, limits);
    let e_ok = e.has_plan() && e.gap <= 0.25;
    verdict(
        h_ok && h_secs < 60.0 && e_ok,
        format!(
            "{} micro-routes; heuristic {:.2} km in {h_secs:.1} s; exact {} gap {:.2}% in {:.1} s",
            inst.num_micro(),
            h.as_ref().map_or(f64::NAN, |r| r.objective),
            e.status,
            e.gap * 100.0,
            e.wall_time
        ),
    )
}

fn directional() -> Verdict {
    let mut worse = 0;
    let mut unsolved = 0;
    let mut margins = Vec::new();
    for seed in 0..10u64 {
        let n = 2 + (seed as usize % 5);
        let (cs, ts) = dominated_pair(n, 6000 + seed);
        let input = SweepInput {
            cs: SweepCase {
                name: "CS".into(),
                pair: ShiftPair::new(cs.clone(), cs).unwrap(),
            },
            ts: vec![SweepCase {
                name: "TS".into(),
                pair: ShiftPair::new(ts.clone(), ts).unwrap(),
            }],
        };
        let report = run_sweep(
            &input,
            &[1.0],
            &SolverChoice::Exact(SearchLimits::default()),
        );
        let row = &report.rows[0];
        match (&row.cs, &row.ts[0]) {
            (Some(c), Some(t)) => {
                let feasible = [&c.day, &c.night, &t.day, &t.night]
                    .iter()
                    .all(|s| s.feasible);
                if !feasible {
                    unsolved += 1;
                }
                if t.total_distance > c.total_distance + 1e-9 {
                    worse += 1;
                }
                margins.push(c.total_distance - t.total_distance);
            }
            _ => unsolved += 1,
        }
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        worse == 0 && unsolved == 0,
        format!("10 instances, {worse} with TS longer, {unsolved} unsolved, smallest margin {min:.2} km"),
    )
}

fn mroute(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_mroute"))
        .args(args)
        .output()
        .expect("binary runs");
    (o.status.code(), o.stdout)
}

/// Runs every command into `dir` and returns (name, bytes) of each output.
fn command_outputs(dir: &Path, inputs: &Path) -> Vec<(String, Vec<u8>)> {
    let p = |name: &str| inputs.join(name).to_str().unwrap().to_string();
    let o = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let cs = format!("{},{}", p("cs-day.json"), p("cs-night.json"));
    let ts = format!("TS={},{}", p("ts-day.json"), p("ts-night.json"));
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "validate",
            vec!["validate".into(), p("cs-day.json"), p("ts-day.json")],
        ),
        (
            "solve-h",
            vec![
                "solve".into(),
                p("cs-day.json"),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                o("h"),
            ],
        ),
        (
            "solve-e",
            vec![
                "solve".into(),
                p("ts-day.json"),
                "--solver".into(),
                "exact".into(),
                "--out".into(),
                o("e"),
            ],
        ),
        (
            "solve-b",
            vec![
                "solve".into(),
                p("cs-small.json"),
                "--solver".into(),
                "brute".into(),
                "--out".into(),
                o("b"),
            ],
        ),
        (
            "sweep",
            vec![
                "sweep".into(),
                "--cs".into(),
                cs,
                "--ts".into(),
                ts,
                "--fractions".into(),
                "0.9,1.0".into(),
                "--seed".into(),
                "1".into(),
                "--out".into(),
                o("s"),
            ],
        ),
        (
            "export-mps",
            vec![
                "export".into(),
                p("cs-small.json"),
                "--format".into(),
                "mps".into(),
            ],
        ),
        (
            "export-lp",
            vec![
                "export".into(),
                p("ts-day.json"),
                "--format".into(),
                "lp".into(),
            ],
        ),
    ];
    let mut outputs = Vec::new();
    for (name, args) in runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, stdout) = mroute(&args);
        outputs.push((format!("{name} exit"), format!("{code:?}").into_bytes()));
        outputs.push((format!("{name} stdout"), stdout));
    }
    for f in [
        "h/plan.json",
        "h/metrics.txt",
        "h/result.json",
        "e/plan.json",
        "e/result.json",
        "b/result.json",
        "s/report.csv",
        "s/report.txt",
        "s/report.json",
        "s/plot.csv",
    ] {
        outputs.push((
            f.to_string(),
            std::fs::read(dir.join(f)).unwrap_or_default(),
        ));
    }
    outputs
}

fn determinism() -> Verdict {
    let inputs = tempfile::TempDir::new().unwrap();
    let shrink = |inst: Instance, keep: usize| {
        let mut data = inst.data().clone();
        let landfill = usize::from(inst.case_kind() == CaseKind::CurrentSituation);
        let nodes = 1 + landfill + keep;
        data.micro_routes.truncate(keep);
        data.stops.truncate(nodes);
        data.distance.truncate(nodes);
        data.travel_time.truncate(nodes);
        for row in data.distance.iter_mut().chain(data.travel_time.iter_mut()) {
            row.truncate(nodes);
        }
        Instance::from_data(data).unwrap()
    };
    let files = [
        (
            "cs-day.json",
            shrink(city_shift(Shift::Day, Site::Current, 3), 8),
        ),
        (
            "cs-night.json",
            shrink(city_shift(Shift::Night, Site::Current, 3), 8),
        ),
        (
            "ts-day.json",
            shrink(city_shift(Shift::Day, Site::StationAtDepot, 3), 8),
        ),
        (
            "ts-night.json",
            shrink(city_shift(Shift::Night, Site::StationAtDepot, 3), 8),
        ),
        (
            "cs-small.json",
            random_instance(CaseKind::CurrentSituation, 5, 8),
        ),
    ];
    for (name, inst) in &files {
        std::fs::write(inputs.path().join(name), save_instance(inst)).unwrap();
    }
    let a = tempfile::TempDir::new().unwrap();
    let b = tempfile::TempDir::new().unwrap();
    let first = command_outputs(a.path(), inputs.path());
    let second = command_outputs(b.path(), inputs.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let failed: Vec<&str> = first
        .iter()
        .filter(|(name, bytes)| name.ends_with(" exit") && bytes.as_slice() != b"Some(0)")
        .map(|(name, _)| name.as_str())
        .collect();
    let empty = first.iter().filter(|(_, bytes)| bytes.is_empty()).count();
    verdict(
        differing.is_empty() && failed.is_empty() && empty == 0,
        format!(
            "{} outputs compared, differing {differing:?}, failed {failed:?}, {empty} empty",
            first.len()
        ),
    )
}

fn main() {
    let instances = campaign();
    let mut optima = Vec::new();
    let results = [
        ("1 service-time model", service_times()),
        ("2 transfer-trip arithmetic", transfer_arithmetic()),
        ("3 comparison metric", comparison_metric()),
        (
            "4 oracle equivalence",
            oracle_equivalence(&instances, &mut optima),
        ),
        ("5 MILP/evaluator equivalence", milp_equivalence()),
        (
            "6 heuristic quality",
            heuristic_quality(&instances, &optima),
        ),
        ("7 desk-scale city run", city_run()),
        ("8 directional property", directional()),
        ("9 determinism", determinism()),
    ];
    let mut failures = 0;
    for (name, v) in &results {
        println!(
            "criterion {name}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        eprintln!("{failures} criteria failed");
        std::process::exit(1);
    }
}
