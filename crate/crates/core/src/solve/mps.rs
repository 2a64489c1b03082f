//! Free-format MPS writer and reader.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::model::{MilpModel, Sense, Tag, VarKind};
use crate::{Error, Result};

const OBJ_ROW: &str = "OBJ";

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn check_name(kind: &str, index: usize, name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Build(format!(
            "{kind} {index} has no usable MPS name ({name:?})"
        )));
    }
    Ok(())
}

/// Writes `model` as free MPS. Output depends only on the model contents.
pub fn write_mps(model: &MilpModel) -> Result<String> {
    for (j, v) in model.vars.iter().enumerate() {
        check_name("variable", j, &v.name)?;
    }
    for (i, r) in model.rows.iter().enumerate() {
        check_name("row", i, &r.name)?;
    }
    let mut out = String::new();
    let name = if model.meta.scenario.is_empty() {
        "model"
    } else {
        &model.meta.scenario
    };
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {OBJ_ROW}");
    for r in &model.rows {
        let s = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {s} {}", r.name);
    }

    // Column-major entries, merging duplicate coefficients within a row.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.vars.len()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            cols[j].push((i, a));
        }
    }
    let mut obj = vec![0.0; model.vars.len()];
    for &(j, c) in &model.objective {
        obj[j] += c;
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in model.vars.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_int {
            let kind = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " MARKER{marker} 'MARKER' '{kind}'");
            marker += 1;
            in_int = is_int;
        }
        let mut entries = std::mem::take(&mut cols[j]);
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, a) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        let mut wrote = false;
        if obj[j] != 0.0 {
            let _ = writeln!(out, " {} {OBJ_ROW} {}", v.name, num(obj[j]));
            wrote = true;
        }
        for (i, a) in merged {
            if a != 0.0 {
                let _ = writeln!(out, " {} {} {}", v.name, model.rows[i].name, num(a));
                wrote = true;
            }
        }
        if !wrote {
            let _ = writeln!(out, " {} {OBJ_ROW} 0.0", v.name);
        }
    }
    if in_int {
        let _ = writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for r in &model.rows {
        if r.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", r.name, num(r.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for v in &model.vars {
        let (lo, hi) = (v.lower, v.upper);
        let n = &v.name;
        if lo == hi {
            let _ = writeln!(out, " FX BND {n} {}", num(lo));
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND {n}");
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND {n}");
                let _ = writeln!(out, " UP BND {n} {}", num(hi));
            }
            (true, hi_finite) => {
                if lo != 0.0 || v.kind == VarKind::Binary {
                    let _ = writeln!(out, " LO BND {n} {}", num(lo));
                }
                if hi_finite {
                    let _ = writeln!(out, " UP BND {n} {}", num(hi));
                } else if v.kind == VarKind::Binary {
                    let _ = writeln!(out, " PL BND {n}");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        context: "mps".into(),
        line,
        message: message.into(),
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("bad number {tok:?}")))
}

/// Reads free MPS into a model. Rows come back with [`Tag::Unspecified`];
/// integer columns must be binary.
pub fn parse_mps(text: &str) -> Result<MilpModel> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Ranges,
        Done,
    }
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut obj_name: Option<String> = None;
    let mut in_int = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    model.meta.scenario = toks.get(1).copied().unwrap_or("").to_owned();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => Section::Ranges,
                "ENDATA" => Section::Done,
                "OBJSENSE" => return Err(perr(line, "OBJSENSE not supported")),
                other => return Err(perr(line, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(perr(line, "expected `<type> <name>`"));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(toks[1].to_owned());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(perr(line, format!("unknown row type {t}"))),
                };
                if row_index.insert(toks[1].to_owned(), model.rows.len()).is_some() {
                    return Err(perr(line, format!("duplicate row {}", toks[1])));
                }
                model.add_row(toks[1].to_owned(), Tag::Unspecified, Vec::new(), sense, 0.0);
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    in_int = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        t => return Err(perr(line, format!("unknown marker {t}"))),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(line, "expected `<col> <row> <value> [<row> <value>]`"));
                }
                let col = match model.var_id(toks[0]) {
                    Some(j) => j,
                    None => {
                        let kind = if in_int { VarKind::Binary } else { VarKind::Continuous };
                        let ub = if in_int { 1.0 } else { f64::INFINITY };
                        model.add_var(toks[0].to_owned(), kind, 0.0, ub, None)?
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], line)?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        if v != 0.0 {
                            model.objective.push((col, v));
                        }
                    } else {
                        let i = *row_index
                            .get(pair[0])
                            .ok_or_else(|| perr(line, format!("unknown row {}", pair[0])))?;
                        model.rows[i].coeffs.push((col, v));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(line, "expected `<set> <row> <value> [<row> <value>]`"));
                }
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], line)?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        return Err(perr(line, "objective constant not supported"));
                    }
                    let i = *row_index
                        .get(pair[0])
                        .ok_or_else(|| perr(line, format!("unknown row {}", pair[0])))?;
                    model.rows[i].rhs = v;
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(perr(line, "expected `<type> <set> <col> [<value>]`"));
                }
                let j = model
                    .var_id(toks[2])
                    .ok_or_else(|| perr(line, format!("unknown column {}", toks[2])))?;
                let value = || -> Result<f64> {
                    toks.get(3)
                        .ok_or_else(|| perr(line, "missing bound value"))
                        .and_then(|t| parse_num(t, line))
                };
                let v = &mut model.vars[j];
                match toks[0] {
                    "UP" => {
                        let x = value()?;
                        v.upper = x;
                        if x < 0.0 && v.lower == 0.0 {
                            v.lower = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => v.lower = value()?,
                    "FX" => {
                        let x = value()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    t => return Err(perr(line, format!("unsupported bound type {t}"))),
                }
            }
            Section::Ranges => return Err(perr(line, "RANGES not supported")),
            Section::None | Section::Done => return Err(perr(line, "data outside a section")),
        }
    }
    if section != Section::Done {
        return Err(perr(text.lines().count(), "missing ENDATA"));
    }
    for v in &model.vars {
        if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
            return Err(Error::Invalid(format!("integer column {} is not binary", v.name)));
        }
    }
    Ok(model)
}
