//! Exhaustive plan enumeration against the MILP constraint systems.

use microroute::evaluator::evaluate_plan;
use microroute::exact::enumerate_plans;
use microroute::milp::{
    assignment_from_plan, build_cs_model, build_ts_model, DegreeRepair, MilpModel, FEAS_TOL,
};
use microroute::synthetic::random_instance;
use microroute::{solve_brute_force, CaseKind, Instance, TimeAccounting};

fn model_for(inst: &Instance) -> MilpModel {
    match inst.case_kind() {
        CaseKind::CurrentSituation => build_cs_model(inst, TimeAccounting::Full).unwrap(),
        CaseKind::TransferStation => build_ts_model(inst, DegreeRepair::Repaired).unwrap(),
    }
}

struct Tally {
    plans: usize,
    feasible: usize,
}

fn check(inst: &Instance) -> Tally {
    let model = model_for(inst);
    let mut tally = Tally {
        plans: 0,
        feasible: 0,
    };
    let mut best_milp = f64::INFINITY;
    for plan in enumerate_plans(inst).unwrap() {
        tally.plans += 1;
        let eval_ok = evaluate_plan(inst, &plan)
            .map(|m| m.feasible)
            .unwrap_or(false);
        let assignment = assignment_from_plan(inst, &model, &plan);
        let milp_ok = assignment
            .as_ref()
            .map(|v| model.is_feasible(v, FEAS_TOL))
            .unwrap_or(false);
        assert_eq!(
            eval_ok,
            milp_ok,
            "{}: plan {:?} evaluator={eval_ok} milp={milp_ok} violations={:?}",
            inst.name().unwrap_or("?"),
            plan.routes,
            assignment.map(|v| model.violations(&v, FEAS_TOL))
        );
        if milp_ok {
            tally.feasible += 1;
            let v = assignment.unwrap();
            best_milp = best_milp.min(model.objective_value(&v));
        }
    }
    let brute = solve_brute_force(inst).unwrap();
    if tally.feasible == 0 {
        assert!(!brute.has_plan());
    } else {
        let tol = 1e-9 * brute.objective.abs().max(1.0);
        assert!(
            (best_milp - brute.objective).abs() <= tol,
            "milp {best_milp} vs brute {}",
            brute.objective
        );
    }
    tally
}

#[test]
fn current_situation_enumeration_agrees() {
    let mut feasible = 0;
    for seed in 0..12u64 {
        let n = 2 + (seed as usize % 4);
        let t = check(&random_instance(CaseKind::CurrentSituation, n, 500 + seed));
        assert!(t.plans > 0);
        feasible += t.feasible;
    }
    assert!(feasible > 0);
}

#[test]
fn transfer_station_enumeration_agrees() {
    let mut feasible = 0;
    for seed in 0..12u64 {
        let n = 2 + (seed as usize % 4);
        let t = check(&random_instance(CaseKind::TransferStation, n, 700 + seed));
        feasible += t.feasible;
    }
    assert!(feasible > 0);
}
