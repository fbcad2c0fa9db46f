//! MPS and CPLEX-LP writers.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConstraintSense, MilpError, MilpModel, VarKind};

const MAX_NAME: usize = 255;
const OBJ_ROW: &str = "OBJ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Mps,
    Lp,
}

/// Writes `model` in the requested format. Output is deterministic: columns
/// follow variable order and rows follow constraint order.
pub fn export_model(model: &MilpModel, format: ExportFormat) -> Result<Vec<u8>, MilpError> {
    check_names(model)?;
    let text = match format {
        ExportFormat::Mps => write_mps(model),
        ExportFormat::Lp => write_lp(model),
    };
    Ok(text.into_bytes())
}

fn check_names(model: &MilpModel) -> Result<(), MilpError> {
    let mut vars = HashSet::new();
    for v in &model.variables {
        if v.name.len() > MAX_NAME {
            return Err(MilpError::NameTooLong(v.name.clone()));
        }
        if !vars.insert(v.name.as_str()) {
            return Err(MilpError::NameCollision(v.name.clone()));
        }
    }
    let mut rows = HashSet::from([OBJ_ROW.to_string(), "obj".to_string()]);
    for c in &model.constraints {
        if c.name.len() > MAX_NAME {
            return Err(MilpError::NameTooLong(c.name.clone()));
        }
        if !rows.insert(c.name.clone()) {
            return Err(MilpError::NameCollision(c.name.clone()));
        }
    }
    Ok(())
}

/// Closest decimal that fits a 12-character fixed MPS field.
fn num12(x: f64) -> String {
    let s = num(x);
    if s.len() <= 12 {
        return s;
    }
    let fixed = (0..12).map(|p| format!("{x:.p$}"));
    let sci = (0..7).map(|p| format!("{x:.p$e}"));
    fixed
        .chain(sci)
        .filter(|t| t.len() <= 12)
        .min_by(|a, b| {
            let err = |t: &String| (t.parse::<f64>().unwrap_or(f64::INFINITY) - x).abs();
            err(a).total_cmp(&err(b))
        })
        .unwrap_or(s)
}

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Column-major view: for each variable, its (row, coefficient) entries with
/// duplicates merged.
fn columns(model: &MilpModel) -> Vec<Vec<(usize, f64)>> {
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, coef) in &c.terms {
            match cols[v].last_mut() {
                Some((row, acc)) if *row == r => *acc += coef,
                _ => cols[v].push((r, coef)),
            }
        }
    }
    cols
}

/// Field layout of the data sections. Fixed columns are used whenever every
/// name fits in eight characters; otherwise fields are separated by spaces
/// and values keep full precision.
struct Fields {
    fixed: bool,
}

impl Fields {
    fn line(&self, out: &mut String, head: &str, a: &str, b: &str, value: Option<f64>) {
        if self.fixed {
            match value {
                Some(x) => writeln!(out, "{head}{a:<8}  {b:<8}  {:>12}", num12(x)),
                None => writeln!(out, "{head}{a:<8}  {b}"),
            }
        } else {
            match value {
                Some(x) => writeln!(out, "{head}{a}  {b}  {}", num(x)),
                None => writeln!(out, "{head}{a}  {b}"),
            }
        }
        .expect("writing to a string");
    }
}

fn write_mps(model: &MilpModel) -> String {
    let fixed = model
        .variables
        .iter()
        .map(|v| v.name.len())
        .chain(model.constraints.iter().map(|c| c.name.len()))
        .all(|l| l <= 8);
    let f = Fields { fixed };
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for c in &model.constraints {
        let tag = match c.sense {
            ConstraintSense::Le => "L",
            ConstraintSense::Ge => "G",
            ConstraintSense::Eq => "E",
        };
        let _ = writeln!(out, " {tag}  {}", c.name);
    }
    out.push_str("COLUMNS\n");
    let mut obj = vec![0.0; model.variables.len()];
    for &(v, c) in &model.objective {
        obj[v] += c;
    }
    let cols = columns(model);
    let mut in_int = false;
    for (v, var) in model.variables.iter().enumerate() {
        let is_int = var.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(
                out,
                "    MARKER                 'MARKER'                 {tag}"
            );
            in_int = is_int;
        }
        let entries = &cols[v];
        if obj[v] != 0.0 || entries.is_empty() {
            f.line(&mut out, "    ", &var.name, OBJ_ROW, Some(obj[v]));
        }
        for &(r, coef) in entries {
            f.line(
                &mut out,
                "    ",
                &var.name,
                &model.constraints[r].name,
                Some(coef),
            );
        }
    }
    if in_int {
        out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    }
    out.push_str("RHS\n");
    for c in model.constraints.iter().filter(|c| c.rhs != 0.0) {
        f.line(&mut out, "    ", "RHS", &c.name, Some(c.rhs));
    }
    out.push_str("BOUNDS\n");
    for var in &model.variables {
        let (lo, up) = (var.lower, var.upper);
        if lo == up {
            f.line(&mut out, " FX ", "BND", &var.name, Some(lo));
            continue;
        }
        if lo == f64::NEG_INFINITY {
            f.line(&mut out, " MI ", "BND", &var.name, None);
        } else if lo != 0.0 {
            f.line(&mut out, " LO ", "BND", &var.name, Some(lo));
        }
        if up.is_finite() {
            f.line(&mut out, " UP ", "BND", &var.name, Some(up));
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        if let Some(first) = model.variables.first() {
            let _ = write!(out, " 0 {}", first.name);
        }
        return;
    }
    for (n, &(v, c)) in terms.iter().enumerate() {
        if n > 0 && n % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { "-" } else { "+" };
        if n == 0 && c >= 0.0 {
            let _ = write!(out, " {} {}", num(c), model.variables[v].name);
        } else {
            let _ = write!(out, " {sign} {} {}", num(c.abs()), model.variables[v].name);
        }
    }
}

fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", model.name);
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, &model.objective);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let op = match c.sense {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(c.rhs));
    }
    out.push_str("Bounds\n");
    for var in model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Continuous)
    {
        let (lo, up) = (var.lower, var.upper);
        match (lo == 0.0, up.is_finite()) {
            (true, false) => {}
            _ if lo == up => {
                let _ = writeln!(out, " {} = {}", var.name, num(lo));
            }
            (_, true) => {
                let lo = if lo == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    num(lo)
                };
                let _ = writeln!(out, " {} <= {} <= {}", lo, var.name, num(up));
            }
            (false, false) => {
                let lo = if lo == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    num(lo)
                };
                let _ = writeln!(out, " {} >= {}", var.name, lo);
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
