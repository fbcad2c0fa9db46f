//! `mroute`: validate instances, solve shifts, run waste scenarios and export
//! the MILP models.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible, 4 limit reached
//! without a plan.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use microroute::analysis::{
    plot_csv, report_csv, report_text, run_sweep, shift_outcome, ShiftPair, SolverChoice,
    SweepCase, SweepInput,
};
use microroute::evaluator::{consolidate_tours, evaluate_plan, metrics_table};
use microroute::exact::{solve_brute_force_with, solve_exact, SearchLimits, SolveStatus};
use microroute::heuristic::{solve_heuristic, AnnealingParams, HeuristicError};
use microroute::milp::{
    build_cs_model, build_ts_model, export_model, DegreeRepair, ExportFormat, VariableKey,
};
use microroute::model::{load_instance, CaseKind, Instance, InstanceError};
use microroute::TimeAccounting;

const DEFAULT_FRACTIONS: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.05, 1.1];

#[derive(Parser, Debug)]
#[command(
    name = "mroute",
    version,
    about = "Micro-route sequencing for waste collection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check instance files against the schema and invariants.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Solve one shift.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Solve every case at every waste fraction and compare.
    Sweep {
        /// Current-situation shifts as `day.json,night.json`.
        #[arg(long)]
        cs: Option<String>,
        /// Transfer-station shifts as `NAME=day.json,night.json`; repeatable.
        #[arg(long)]
        ts: Vec<String>,
        /// Comma-separated waste fractions.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Write the MILP of an instance as MPS or LP.
    Export {
        instance: PathBuf,
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        #[arg(long, value_enum)]
        time_accounting: Option<AccountingArg>,
        #[arg(long, value_enum)]
        degree_repair: Option<RepairArg>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct SolveOpts {
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_seconds: Option<f64>,
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long, value_enum)]
    time_accounting: Option<AccountingArg>,
    /// Format of the summary on standard output.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum CaseArg {
    Cs,
    Ts,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SolverArg {
    Exact,
    Heuristic,
    Brute,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum AccountingArg {
    Literal,
    Full,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RepairArg {
    Literal,
    Repaired,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum FormatArg {
    Mps,
    Lp,
    Csv,
    Text,
    Json,
}

/// Config file; every field mirrors a flag and flags win.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    case: Option<CaseArg>,
    solver: Option<SolverArg>,
    seed: Option<u64>,
    max_seconds: Option<f64>,
    max_nodes: Option<u64>,
    time_accounting: Option<AccountingArg>,
    degree_repair: Option<RepairArg>,
    format: Option<FormatArg>,
    out: Option<PathBuf>,
    fractions: Option<Vec<f64>>,
    cs: Option<String>,
    ts: Option<Vec<String>>,
    annealing: Option<AnnealingParams>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { paths } => cmd_validate(&paths),
        Command::Solve { instance, opts } => cmd_solve(&instance, &opts),
        Command::Sweep {
            cs,
            ts,
            fractions,
            opts,
        } => cmd_sweep(cs, ts, fractions, &opts),
        Command::Export {
            instance,
            case,
            time_accounting,
            degree_repair,
            format,
            out,
            config,
        } => cmd_export(
            &instance,
            case,
            time_accounting,
            degree_repair,
            format,
            out,
            config,
        ),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// `Kind: detail`, with the variant name as the kind.
fn describe(e: &InstanceError) -> String {
    match e {
        InstanceError::Schema(msg) => format!("Schema: {msg}"),
        InstanceError::InvariantViolation(msg) => format!("InvariantViolation: {msg}"),
        InstanceError::InfeasibleDemand { .. } => format!("InfeasibleDemand: {e}"),
    }
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    load_instance(&bytes)
        .map_err(|e| Failure::input(format!("{}: {}", path.display(), describe(&e))))
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn accounting(arg: Option<AccountingArg>) -> TimeAccounting {
    match arg {
        Some(AccountingArg::Literal) => TimeAccounting::Literal,
        Some(AccountingArg::Full) | None => TimeAccounting::Full,
    }
}

fn check_case(inst: &Instance, case: Option<CaseArg>) -> Outcome {
    let expected = match case {
        None => return Ok(()),
        Some(CaseArg::Cs) => CaseKind::CurrentSituation,
        Some(CaseArg::Ts) => CaseKind::TransferStation,
    };
    if inst.case_kind() != expected {
        return Err(Failure::input(format!(
            "--case expects {expected}, instance is {}",
            inst.case_kind()
        )));
    }
    Ok(())
}

/// Solver settings after merging flags over the config file.
struct Settings {
    solver: SolverChoice,
    format: FormatArg,
    out: PathBuf,
    case: Option<CaseArg>,
}

fn settings(opts: &SolveOpts, cfg: &FileConfig) -> Result<Settings, Failure> {
    let time_accounting = accounting(opts.time_accounting.or(cfg.time_accounting));
    let solver = match opts.solver.or(cfg.solver).unwrap_or(SolverArg::Heuristic) {
        SolverArg::Exact => SolverChoice::Exact(SearchLimits {
            max_nodes: opts.max_nodes.or(cfg.max_nodes),
            max_seconds: opts.max_seconds.or(cfg.max_seconds),
            time_accounting,
        }),
        SolverArg::Heuristic => {
            let mut params = cfg.annealing.unwrap_or_default();
            if let Some(seed) = opts.seed.or(cfg.seed) {
                params.seed = seed;
            }
            params.time_accounting = time_accounting;
            params
                .validate()
                .map_err(|e| Failure::input(e.to_string()))?;
            SolverChoice::Heuristic(params)
        }
        SolverArg::Brute => SolverChoice::Brute,
    };
    let format = opts.format.or(cfg.format).unwrap_or(FormatArg::Text);
    Ok(Settings {
        solver,
        format,
        out: opts
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        case: opts.case.or(cfg.case),
    })
}

fn cmd_validate(paths: &[PathBuf]) -> Outcome {
    let mut bad = 0;
    for path in paths {
        match read_instance(path) {
            Ok(inst) => println!(
                "{}: OK ({}, {} micro-routes)",
                path.display(),
                inst.case_kind(),
                inst.num_micro()
            ),
            Err(f) => {
                println!("{}", f.message);
                bad += 1;
            }
        }
    }
    if bad > 0 {
        return Err(Failure::input(format!(
            "{bad} of {} files invalid",
            paths.len()
        )));
    }
    Ok(())
}

fn cmd_solve(path: &Path, opts: &SolveOpts) -> Outcome {
    let cfg = load_config(opts.config.as_ref())?;
    let s = settings(opts, &cfg)?;
    let inst = read_instance(path)?;
    check_case(&inst, s.case)?;
    let result = match &s.solver {
        SolverChoice::Exact(limits) => solve_exact(&inst, *limits),
        SolverChoice::Heuristic(params) => match solve_heuristic(&inst, params) {
            Ok(r) => r,
            Err(e @ HeuristicError::ConstructionFailed { .. }) => {
                return Err(Failure {
                    code: 3,
                    message: e.to_string(),
                });
            }
            Err(e) => return Err(Failure::input(e.to_string())),
        },
        SolverChoice::Brute => {
            let accounting = accounting(opts.time_accounting.or(cfg.time_accounting));
            solve_brute_force_with(&inst, accounting).map_err(|e| Failure::input(e.to_string()))?
        }
    };
    eprintln!("solved in {:.3} s", result.wall_time);
    match result.status {
        SolveStatus::Infeasible => {
            write_file(&s.out.join("result.json"), result.to_json().as_bytes())?;
            return Err(Failure {
                code: 3,
                message: "instance is infeasible".into(),
            });
        }
        SolveStatus::LimitReached => {
            write_file(&s.out.join("result.json"), result.to_json().as_bytes())?;
            return Err(Failure {
                code: 4,
                message: "search limit reached without a feasible plan".into(),
            });
        }
        SolveStatus::Optimal | SolveStatus::FeasibleBound => {}
    }
    let vehicles =
        consolidate_tours(&inst, &result.plan).map_err(|e| Failure::input(e.to_string()))?;
    let metrics = evaluate_plan(&inst, &vehicles).map_err(|e| Failure::input(e.to_string()))?;
    let table = metrics_table(&vehicles, &metrics);
    write_file(&s.out.join("plan.json"), vehicles.to_json().as_bytes())?;
    write_file(&s.out.join("metrics.txt"), table.as_bytes())?;
    write_file(&s.out.join("result.json"), result.to_json().as_bytes())?;
    match s.format {
        FormatArg::Json => print!("{}", result.to_json()),
        _ => {
            let outcome =
                shift_outcome(&inst, &result).map_err(|e| Failure::input(e.to_string()))?;
            println!("status: {}", result.status);
            println!("objective: {:.2} km", result.objective);
            println!("lower bound: {:.2} km", result.lower_bound);
            println!("gap: {:.2}%", result.gap * 100.0);
            println!("distance: {:.2} km", outcome.route_distance);
            if let Some(t) = outcome.transfer {
                println!("transfer trips: {} ({:.2} km)", t.trips, t.distance);
            }
            println!("vehicles: {}", outcome.vehicles);
            print!("{table}");
        }
    }
    Ok(())
}

fn parse_pair(spec: &str) -> Result<ShiftPair, Failure> {
    let parts: Vec<&str> = spec.split(',').collect();
    let [day, night] = parts.as_slice() else {
        return Err(Failure::input(format!(
            "expected `day.json,night.json`, got `{spec}`"
        )));
    };
    let day = read_instance(Path::new(day))?;
    let night = read_instance(Path::new(night))?;
    ShiftPair::new(day, night).map_err(|e| Failure::input(e.to_string()))
}

fn cmd_sweep(
    cs: Option<String>,
    ts: Vec<String>,
    fractions: Option<Vec<f64>>,
    opts: &SolveOpts,
) -> Outcome {
    let cfg = load_config(opts.config.as_ref())?;
    let s = settings(opts, &cfg)?;
    let cs = cs
        .or_else(|| cfg.cs.clone())
        .ok_or_else(|| Failure::input("--cs is required"))?;
    let ts = if ts.is_empty() {
        cfg.ts.clone().unwrap_or_default()
    } else {
        ts
    };
    if ts.is_empty() {
        return Err(Failure::input(
            "at least one --ts NAME=day.json,night.json is required",
        ));
    }
    let fractions = fractions
        .or_else(|| cfg.fractions.clone())
        .unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
    if let Some(f) = fractions.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Failure::input(format!("fractions must be > 0, got {f}")));
    }
    let cs_pair = parse_pair(&cs)?;
    if cs_pair.case_kind() != CaseKind::CurrentSituation {
        return Err(Failure::input("--cs instances must be current_situation"));
    }
    let mut cases = Vec::new();
    for spec in &ts {
        let (name, files) = spec.split_once('=').ok_or_else(|| {
            Failure::input(format!("expected NAME=day.json,night.json, got `{spec}`"))
        })?;
        let pair = parse_pair(files)?;
        if pair.case_kind() != CaseKind::TransferStation {
            return Err(Failure::input(format!(
                "--ts {name} instances must be transfer_station"
            )));
        }
        cases.push(SweepCase {
            name: name.to_string(),
            pair,
        });
    }
    let input = SweepInput {
        cs: SweepCase {
            name: "CS".into(),
            pair: cs_pair,
        },
        ts: cases,
    };
    let report = run_sweep(&input, &fractions, &s.solver);
    let csv = report_csv(&report);
    let text = report_text(&report);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&s.out.join("report.csv"), csv.as_bytes())?;
    write_file(&s.out.join("report.txt"), text.as_bytes())?;
    write_file(&s.out.join("report.json"), json.as_bytes())?;
    write_file(&s.out.join("plot.csv"), plot_csv(&report).as_bytes())?;
    match s.format {
        FormatArg::Csv => print!("{csv}"),
        FormatArg::Json => print!("{json}"),
        _ => print!("{text}"),
    }
    for row in &report.rows {
        for e in &row.errors {
            eprintln!("fraction {}: {e}", row.waste_fraction);
        }
    }
    if report.rows.iter().all(|r| !r.errors.is_empty()) {
        return Err(Failure {
            code: 3,
            message: "no scenario row could be solved".into(),
        });
    }
    Ok(())
}

fn cmd_export(
    path: &Path,
    case: Option<CaseArg>,
    time_accounting: Option<AccountingArg>,
    degree_repair: Option<RepairArg>,
    format: Option<FormatArg>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Outcome {
    let cfg = load_config(config.as_ref())?;
    let inst = read_instance(path)?;
    check_case(&inst, case.or(cfg.case))?;
    let format = match format.or(cfg.format).unwrap_or(FormatArg::Mps) {
        FormatArg::Mps => ExportFormat::Mps,
        FormatArg::Lp => ExportFormat::Lp,
        other => {
            return Err(Failure::input(format!(
                "export supports mps or lp, not {other:?}"
            )))
        }
    };
    let model = match inst.case_kind() {
        CaseKind::CurrentSituation => {
            build_cs_model(&inst, accounting(time_accounting.or(cfg.time_accounting)))
        }
        CaseKind::TransferStation => {
            let repair = match degree_repair.or(cfg.degree_repair) {
                Some(RepairArg::Literal) => {
                    eprintln!(
                        "warning: literal degree rows only range over micro-routes; \
                         no route can leave or reach the depot, so the model is infeasible"
                    );
                    DegreeRepair::Literal
                }
                _ => DegreeRepair::Repaired,
            };
            build_ts_model(&inst, repair)
        }
    }
    .map_err(|e| Failure::input(e.to_string()))?;
    let bytes = export_model(&model, format).map_err(|e| Failure::input(e.to_string()))?;
    let binaries =
        model.count_family(|k| matches!(k, VariableKey::X { .. } | VariableKey::Y { .. }));
    let summary = format!(
        "variables: {} ({} binary), constraints: {}",
        model.variables.len(),
        binaries,
        model.constraints.len()
    );
    match out.or(cfg.out) {
        Some(file) => {
            write_file(&file, &bytes)?;
            println!("{summary}");
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::input(e.to_string()))?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}
