//! Exported MPS files parsed back with an independent reader.

use std::collections::HashMap;

use microroute::milp::{
    build_cs_model, build_ts_model, export_model, DegreeRepair, ExportFormat, MilpModel,
};
use microroute::synthetic::random_instance;
use microroute::{CaseKind, TimeAccounting};
use mps::model::Model;
use mps::Parser;

/// The reader keeps 12 characters of each value field.
fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= 1e-9 * b.abs().max(1.0))
}

fn roundtrip(model: &MilpModel) {
    let bytes = export_model(model, ExportFormat::Mps).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let parsed = Parser::<f64>::parse(&text).unwrap_or_else(|e| panic!("{e:?}"));
    assert_eq!(parsed.rows.len(), model.constraints.len() + 1);
    let columns: std::collections::HashSet<&str> = parsed.columns.iter().map(|c| c.name).collect();
    assert_eq!(columns.len(), model.variables.len());

    let read = Model::try_from(parsed).unwrap();
    let mut coef: HashMap<(String, String), f64> = HashMap::new();
    for ((row, col), v) in &read.values.0 {
        coef.insert((row.clone(), col.clone()), *v);
    }
    for c in &model.constraints {
        for &(var, a) in &c.terms {
            let got = coef
                .get(&(c.name.clone(), model.variables[var].name.clone()))
                .copied();
            assert!(
                close(got, a),
                "{} / {}: {got:?} vs {a}",
                c.name,
                model.variables[var].name
            );
        }
    }
    for &(var, a) in &model.objective {
        if a != 0.0 {
            let got = coef
                .get(&("OBJ".to_string(), model.variables[var].name.clone()))
                .copied();
            assert!(close(got, a), "OBJ / {}", model.variables[var].name);
        }
    }
    let rhs: HashMap<&str, f64> = read
        .rhs
        .0
        .values()
        .flat_map(|m| m.iter().map(|(r, v)| (r.as_str(), *v)))
        .collect();
    for c in &model.constraints {
        assert!(
            close(
                Some(rhs.get(c.name.as_str()).copied().unwrap_or(0.0)),
                c.rhs
            ),
            "{}",
            c.name
        );
    }
}

#[test]
fn current_situation_models_roundtrip() {
    for seed in 0..5 {
        let inst = random_instance(CaseKind::CurrentSituation, 2 + seed as usize, seed);
        roundtrip(&build_cs_model(&inst, TimeAccounting::Full).unwrap());
        roundtrip(&build_cs_model(&inst, TimeAccounting::Literal).unwrap());
    }
}

#[test]
fn transfer_station_models_roundtrip() {
    for seed in 0..5 {
        let inst = random_instance(CaseKind::TransferStation, 2 + seed as usize, seed);
        roundtrip(&build_ts_model(&inst, DegreeRepair::Repaired).unwrap());
        roundtrip(&build_ts_model(&inst, DegreeRepair::Literal).unwrap());
    }
}

#[test]
fn long_names_switch_to_free_format() {
    let inst = microroute::synthetic::city_shift(
        microroute::synthetic::Shift::Night,
        microroute::synthetic::Site::Current,
        2,
    );
    let model = build_cs_model(&inst, TimeAccounting::Full).unwrap();
    let text = String::from_utf8(export_model(&model, ExportFormat::Mps).unwrap()).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("    X_0_1_1 "))
        .unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[..2], ["X_0_1_1", "OBJ"]);
    assert_eq!(
        fields[2].parse::<f64>().unwrap(),
        inst.d(0, inst.micro_node(0))
    );
}
