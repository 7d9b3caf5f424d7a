//! CPLEX LP text format, for inspecting instantiated models in other tools.
//!
//! [`write_lp`] emits one row per line and a `Bounds` entry for every column
//! in declaration order, so [`read_lp`] restores the exact column and row
//! order. The reader accepts that subset of the format (single-line rows,
//! `Minimize`, `Subject To`, `Bounds`, `Binaries`, `End`).

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Model, Sense, SolverError, VarId, VarKind};

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashMap::new();
    names
        .enumerate()
        .map(|(i, n)| {
            let mut s = sanitize(n);
            if seen.contains_key(&s) {
                s = format!("{s}_{i}");
            }
            seen.insert(s.clone(), ());
            s
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    let mut first = true;
    for (coef, name) in terms {
        let sign = if coef < 0.0 { '-' } else { '+' };
        if first && coef >= 0.0 {
            let _ = write!(out, " {} {name}", fmt_num(coef));
        } else {
            let _ = write!(out, " {sign} {} {name}", fmt_num(coef.abs()));
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn write_lp(model: &Model) -> String {
    let vnames = unique_names(model.vars().iter().map(|v| v.name.as_str()));
    let rnames = unique_names(model.rows().iter().map(|r| r.name.as_str()));
    let mut out = String::from("\\ written by heatuc\nMinimize\n obj:");
    write_terms(
        &mut out,
        model
            .vars()
            .iter()
            .zip(&vnames)
            .filter(|(v, _)| v.cost != 0.0)
            .map(|(v, n)| (v.cost, n.clone())),
    );
    if model.objective_offset() != 0.0 {
        let c = model.objective_offset();
        let _ = write!(
            out,
            " {} {}",
            if c < 0.0 { '-' } else { '+' },
            fmt_num(c.abs())
        );
    }
    out.push_str("\nSubject To\n");
    for (row, name) in model.rows().iter().zip(&rnames) {
        let _ = write!(out, " {name}:");
        write_terms(
            &mut out,
            row.terms.iter().map(|&(v, a)| (a, vnames[v.0].clone())),
        );
        let _ = writeln!(out, " {} {}", row.sense, fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (v, n) in model.vars().iter().zip(&vnames) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {n} free");
        } else {
            let _ = writeln!(out, " {} <= {n} <= {}", fmt_num(v.lower), fmt_num(v.upper));
        }
    }
    let bins: Vec<_> = model
        .vars()
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, SolverError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| SolverError::Parse {
            line,
            message: format!("expected a number, found `{tok}`"),
        }),
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok() || matches!(tok, "inf" | "-inf")
}

/// Parse `[+-] coef name ...` into terms plus a constant.
fn parse_expr(tokens: &[&str], line: usize) -> Result<(Vec<(String, f64)>, f64), SolverError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" | "-" => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                }
                sign = if tok == "-" { -1.0 } else { 1.0 };
            }
            t if is_number(t) => coef = Some(parse_num(t, line)?),
            name => {
                terms.push((name.to_string(), sign * coef.take().unwrap_or(1.0)));
                sign = 1.0;
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

/// Row as parsed: name, terms by column name, sense, right-hand side.
type RawRow = (String, Vec<(String, f64)>, Sense, f64);

pub fn read_lp(text: &str) -> Result<Model, SolverError> {
    let mut section = Section::Preamble;
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut offset = 0.0;
    let mut rows: Vec<RawRow> = Vec::new();
    let mut bounds: Vec<(String, f64, f64)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => {
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" | "binary" | "bin" => {
                section = Section::Binaries;
                continue;
            }
            "end" => {
                section = Section::End;
                continue;
            }
            _ => {}
        }
        let err = |message: String| SolverError::Parse {
            line: line_no,
            message,
        };
        match section {
            Section::Objective => {
                let body = line.split_once(':').map_or(line, |(_, b)| b);
                let toks: Vec<_> = body.split_whitespace().collect();
                let (terms, c) = parse_expr(&toks, line_no)?;
                objective.extend(terms);
                offset += c;
            }
            Section::Constraints => {
                let (name, body) = line
                    .split_once(':')
                    .ok_or_else(|| err("row without a name".into()))?;
                let toks: Vec<_> = body.split_whitespace().collect();
                let pos = toks
                    .iter()
                    .position(|t| matches!(*t, ">=" | "<=" | "=" | "=>" | "=<"))
                    .ok_or_else(|| err("row without a sense".into()))?;
                let sense = match toks[pos] {
                    ">=" | "=>" => Sense::Ge,
                    "<=" | "=<" => Sense::Le,
                    _ => Sense::Eq,
                };
                let (terms, c) = parse_expr(&toks[..pos], line_no)?;
                let rhs_toks = &toks[pos + 1..];
                let rhs = match rhs_toks {
                    [v] => parse_num(v, line_no)?,
                    ["-", v] => -parse_num(v, line_no)?,
                    _ => return Err(err("malformed right-hand side".into())),
                };
                rows.push((name.trim().to_string(), terms, sense, rhs - c));
            }
            Section::Bounds => {
                let toks: Vec<_> = line.split_whitespace().collect();
                match toks.as_slice() {
                    [n, f] if f.eq_ignore_ascii_case("free") => {
                        bounds.push((n.to_string(), f64::NEG_INFINITY, f64::INFINITY))
                    }
                    [lo, "<=", n, "<=", hi] => bounds.push((
                        n.to_string(),
                        parse_num(lo, line_no)?,
                        parse_num(hi, line_no)?,
                    )),
                    [n, ">=", lo] => {
                        bounds.push((n.to_string(), parse_num(lo, line_no)?, f64::INFINITY))
                    }
                    [n, "<=", hi] => bounds.push((n.to_string(), 0.0, parse_num(hi, line_no)?)),
                    _ => return Err(err(format!("unsupported bound `{line}`"))),
                }
            }
            Section::Binaries => binaries.extend(line.split_whitespace().map(str::to_string)),
            Section::Preamble | Section::End => {
                return Err(err(format!("unexpected content `{line}`")));
            }
        }
    }

    let mut model = Model::new();
    let mut ids: HashMap<String, VarId> = HashMap::new();
    let bins: std::collections::HashSet<_> = binaries.iter().cloned().collect();
    let mut declare = |model: &mut Model, name: &str, lo: f64, hi: f64| -> VarId {
        *ids.entry(name.to_string()).or_insert_with(|| {
            if bins.contains(name) {
                model.add_binary(name, 0.0)
            } else {
                model.add_var(name, lo, hi, 0.0)
            }
        })
    };
    for (n, lo, hi) in &bounds {
        declare(&mut model, n, *lo, *hi);
    }
    for (_, terms, _, _) in &rows {
        for (n, _) in terms {
            declare(&mut model, n, 0.0, f64::INFINITY);
        }
    }
    for (n, c) in &objective {
        let v = declare(&mut model, n, 0.0, f64::INFINITY);
        let cost = model.var(v).cost + c;
        model.set_cost(v, cost);
    }
    for n in &binaries {
        declare(&mut model, n, 0.0, 1.0);
    }
    for (name, terms, sense, rhs) in rows {
        let t = terms
            .iter()
            .map(|(n, a)| (declare(&mut model, n, 0.0, f64::INFINITY), *a))
            .collect();
        model.add_row(name, t, sense, rhs);
    }
    model.add_objective_offset(offset);
    Ok(model)
}
