use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microroute::synthetic::{city_shift, random_instance, Shift, Site};
use microroute::{save_instance, CaseKind, Instance, InstanceData, MicroRoute, Stop};
use tempfile::TempDir;

fn mroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, inst: &Instance) -> String {
    let path = dir.join(name);
    std::fs::write(&path, save_instance(inst)).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One micro-route four kilometres from the station each way.
fn single(time_limit: f64) -> Instance {
    Instance::from_data(InstanceData {
        name: Some("single".into()),
        case_kind: CaseKind::TransferStation,
        capacity: 10_000.0,
        time_limit,
        max_routes: None,
        transfer: None,
        service_time_model: None,
        waste_fraction: None,
        micro_routes: vec![MicroRoute::new(1, 20.0, 5_000.0)],
        stops: vec![Stop::Depot, Stop::Micro(1)],
        distance: vec![vec![0.0, 4.0], vec![4.0, 0.0]],
        travel_time: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
    })
    .unwrap()
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn validate_reports_each_file() {
    let dir = TempDir::new().unwrap();
    let good = write(
        dir.path(),
        "good.json",
        &random_instance(CaseKind::CurrentSituation, 3, 1),
    );
    let o = mroute(&["validate", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(": OK"));

    let mut neg: serde_json::Value = serde_json::from_slice(&read(PathBuf::from(&good))).unwrap();
    neg["d_km"][0][2] = serde_json::json!(-1.0);
    let neg_path = dir.path().join("neg.json");
    std::fs::write(&neg_path, neg.to_string()).unwrap();
    let o = mroute(&["validate", &good, neg_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stdout(&o).contains("neg.json: InvariantViolation"),
        "{}",
        stdout(&o)
    );

    let mut no_landfill = random_instance(CaseKind::TransferStation, 3, 1)
        .data()
        .clone();
    no_landfill.case_kind = CaseKind::CurrentSituation;
    no_landfill.transfer = None;
    let text = serde_json::to_string(&no_landfill).unwrap();
    let path = dir.path().join("nolf.json");
    std::fs::write(&path, text).unwrap();
    let o = mroute(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("landfill"), "{}", stdout(&o));

    let o = mroute(&[
        "validate",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_single_micro_route_by_hand() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "one.json", &single(8.0));
    let out = dir.path().join("out");
    let o = mroute(&[
        "solve",
        &path,
        "--solver",
        "exact",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("objective: 8.00 km"), "{}", stdout(&o));
    assert!(stdout(&o).contains("status: optimal"));
    let result: serde_json::Value = serde_json::from_slice(&read(out.join("result.json"))).unwrap();
    assert_eq!(result["objective"], 8.0);
    assert!(out.join("plan.json").exists() && out.join("metrics.txt").exists());
}

#[test]
fn solve_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    // The service time alone exceeds the shift.
    let tight = write(dir.path(), "tight.json", &single(0.5));
    for solver in ["exact", "brute"] {
        let o = mroute(&["solve", &tight, "--solver", solver, "--out", out]);
        assert_eq!(o.status.code(), Some(3), "{solver}: {}", stderr(&o));
    }
    let o = mroute(&["solve", &tight, "--solver", "heuristic", "--out", out]);
    assert_eq!(o.status.code(), Some(3));

    let city = write(
        dir.path(),
        "city.json",
        &city_shift(Shift::Day, Site::Current, 1),
    );
    let o = mroute(&[
        "solve",
        &city,
        "--solver",
        "exact",
        "--max-nodes",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = mroute(&["solve", &city, "--solver", "brute", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = mroute(&["solve", &city, "--case", "ts", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = mroute(&["solve", &city, "--solver", "simplex"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn heuristic_seeds_give_feasible_plans() {
    let dir = TempDir::new().unwrap();
    let path = write(
        dir.path(),
        "r.json",
        &random_instance(CaseKind::CurrentSituation, 7, 3),
    );
    for seed in ["7", "8"] {
        let out = dir.path().join(seed);
        let o = mroute(&[
            "solve",
            &path,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let metrics = String::from_utf8(read(out.join("metrics.txt"))).unwrap();
        assert!(
            metrics.lines().last().unwrap().trim_end().ends_with("yes"),
            "{metrics}"
        );
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "one.json", &single(8.0));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"solver": "exact", "format": "json", "max_nodes": 1000}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = mroute(&[
        "solve",
        &path,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["objective"], 8.0);
    let o = mroute(&[
        "solve",
        &path,
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "text",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout(&o).starts_with("status:"));

    std::fs::write(&cfg, r#"{"solvr": "exact"}"#).unwrap();
    let o = mroute(&["solve", &path, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn city_pair(dir: &Path, site: Site, tag: &str, n: usize) -> String {
    let mut paths = Vec::new();
    for (shift, name) in [(Shift::Day, "day"), (Shift::Night, "night")] {
        let mut data = city_shift(shift, site, 5).data().clone();
        let keep = n.min(data.micro_routes.len());
        data.micro_routes.truncate(keep);
        // Depot, landfill when present, then micro-routes in order.
        let nodes = 1 + usize::from(site == Site::Current) + keep;
        data.stops.truncate(nodes);
        data.distance.truncate(nodes);
        data.travel_time.truncate(nodes);
        for row in data.distance.iter_mut().chain(data.travel_time.iter_mut()) {
            row.truncate(nodes);
        }
        paths.push(write(
            dir,
            &format!("{tag}-{name}.json"),
            &Instance::from_data(data).unwrap(),
        ));
    }
    paths.join(",")
}

#[test]
fn sweep_writes_reports() {
    let dir = TempDir::new().unwrap();
    let cs = city_pair(dir.path(), Site::Current, "cs", 6);
    let ts = format!(
        "TS1={}",
        city_pair(dir.path(), Site::StationAtDepot, "ts", 6)
    );
    let out = dir.path().join("out");
    let o = mroute(&[
        "sweep",
        "--cs",
        &cs,
        "--ts",
        &ts,
        "--fractions",
        "0.5,1.0",
        "--solver",
        "brute",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.csv", "report.txt", "report.json", "plot.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&read(out.join("report.json"))).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let w0 = rows[0]["total_waste_kg"].as_f64().unwrap();
    let w1 = rows[1]["total_waste_kg"].as_f64().unwrap();
    assert!((w1 - 2.0 * w0).abs() < 1e-9 * w1);
    let csv = String::from_utf8(read(out.join("report.csv"))).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("average"));

    let o = mroute(&["sweep", "--cs", &cs, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = mroute(&["sweep", "--cs", &cs, "--ts", &ts, "--fractions", "0,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_fraction_average_equals_the_row() {
    let dir = TempDir::new().unwrap();
    let cs = city_pair(dir.path(), Site::Current, "cs", 5);
    let ts = format!(
        "A={}",
        city_pair(dir.path(), Site::StationIndustrial, "ts", 5)
    );
    let o = mroute(&[
        "sweep",
        "--cs",
        &cs,
        "--ts",
        &ts,
        "--fractions",
        "1.0",
        "--solver",
        "exact",
        "--format",
        "csv",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rd = csv_rows(&stdout(&o));
    let avg = rd.pop().unwrap();
    let row = rd.pop().unwrap();
    assert_eq!(row[5], avg[5]);
    assert_eq!(row[7], avg[7]);
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn export_counts_and_warning() {
    let dir = TempDir::new().unwrap();
    let mut data = random_instance(CaseKind::CurrentSituation, 2, 4)
        .data()
        .clone();
    data.max_routes = Some(2);
    let cs = write(dir.path(), "cs.json", &Instance::from_data(data).unwrap());
    let out = dir.path().join("m.mps");
    let o = mroute(&["export", &cs, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o).trim(),
        "variables: 40 (20 binary), constraints: 50"
    );
    let o = mroute(&[
        "export",
        &cs,
        "--time-accounting",
        "literal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        stdout(&o).trim(),
        "variables: 40 (20 binary), constraints: 46"
    );

    let ts = write(
        dir.path(),
        "ts.json",
        &random_instance(CaseKind::TransferStation, 3, 4),
    );
    let o = mroute(&[
        "export",
        &ts,
        "--degree-repair",
        "literal",
        "--format",
        "lp",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
    assert!(stdout(&o).starts_with("\\ Problem:"));
    let o = mroute(&["export", &ts]);
    assert!(!stderr(&o).contains("warning"));
    assert!(stdout(&o).starts_with("NAME"));
    let o = mroute(&["export", &ts, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        dir.path(),
        "r.json",
        &random_instance(CaseKind::TransferStation, 7, 9),
    );
    let cs = city_pair(dir.path(), Site::Current, "cs", 5);
    let ts = format!("T={}", city_pair(dir.path(), Site::StationAtDepot, "ts", 5));
    let run = |tag: &str| {
        let out = dir.path().join(tag);
        let o = out.to_str().unwrap();
        assert!(
            mroute(&["solve", &inst, "--seed", "3", "--out", &format!("{o}/h")])
                .status
                .success()
        );
        assert!(mroute(&[
            "solve",
            &inst,
            "--solver",
            "exact",
            "--out",
            &format!("{o}/e")
        ])
        .status
        .success());
        assert!(mroute(&[
            "sweep",
            "--cs",
            &cs,
            "--ts",
            &ts,
            "--fractions",
            "0.8,1.0",
            "--seed",
            "2",
            "--out",
            &format!("{o}/s")
        ])
        .status
        .success());
        let e = mroute(&["export", &inst, "--format", "lp"]);
        std::fs::write(out.join("model.lp"), e.stdout).unwrap();
        out
    };
    let a = run("a");
    let b = run("b");
    for f in [
        "h/plan.json",
        "h/result.json",
        "h/metrics.txt",
        "e/plan.json",
        "e/result.json",
        "s/report.csv",
        "s/report.txt",
        "s/report.json",
        "s/plot.csv",
        "model.lp",
    ] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}
