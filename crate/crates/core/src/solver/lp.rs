//! CPLEX LP text format.
//!
//! Written grammar, one item per line (long expressions continue on lines
//! starting with a space):
//!
//! ```text
//! \ comment
//! Minimize
//!  obj: c1 x1 + c2 x2 ...
//! Subject To
//!  row_name: c x + c y <= rhs
//! Bounds
//!  lo <= x <= hi          (every variable, in declaration order)
//! Binaries
//!  x y ...
//! End
//! ```
//!
//! Tokens are whitespace separated. Numbers use the shortest decimal form
//! that reads back to the same `f64`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Comparator, IpModel, RowFamily, VarId, VarKind, VarRole};

const WRAP: usize = 100;

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@'`{}|~".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedModel(format!("name {name:?} is not valid in LP format")))
    }
}

fn push_wrapped(out: &mut String, head: &str, pieces: impl IntoIterator<Item = String>) {
    let mut line = format!(" {head}");
    for p in pieces {
        if line.len() + p.len() + 1 > WRAP && line.trim().len() > head.len() {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        } else {
            line.push(' ');
        }
        line.push_str(&p);
    }
    out.push_str(&line);
    out.push('\n');
}

fn linear_terms(model: &IpModel, terms: &[(VarId, f64)]) -> Vec<String> {
    terms
        .iter()
        .enumerate()
        .map(|(i, &(v, c))| {
            let name = &model.var(v).name;
            match (i, c.is_sign_negative()) {
                (0, false) => format!("{c} {name}"),
                (_, false) => format!("+ {c} {name}"),
                (_, true) => format!("- {} {name}", -c),
            }
        })
        .collect()
}

/// Writes the model as LP text. Output depends only on the model contents.
pub fn export_lp(model: &IpModel) -> Result<String> {
    model.validate()?;
    for v in model.vars() {
        check_name(&v.name)?;
    }
    for r in model.rows() {
        check_name(&r.name)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "\\ {} variables, {} rows", model.num_vars(), model.rows().len());
    out.push_str("Minimize\n");
    push_wrapped(&mut out, "obj:", linear_terms(model, model.objective()));
    out.push_str("Subject To\n");
    for row in model.rows() {
        let mut pieces = linear_terms(model, &row.terms);
        if pieces.is_empty() {
            return Err(Error::MalformedModel(format!("row {} has no terms", row.name)));
        }
        pieces.push(row.cmp.to_string());
        pieces.push(format!("{}", row.rhs));
        push_wrapped(&mut out, &format!("{}:", row.name), pieces);
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    let bins: Vec<String> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Boolean)
        .map(|v| v.name.clone())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        push_wrapped(&mut out, "", bins);
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match l.as_str() {
        "minimize" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "generals" | "general" | "gen" => Section::Generals,
        "end" => Section::End,
        _ => return None,
    })
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn parse_cmp(tok: &str) -> Option<Comparator> {
    match tok {
        "<=" | "=<" | "<" => Some(Comparator::Le),
        ">=" | "=>" | ">" => Some(Comparator::Ge),
        "=" => Some(Comparator::Eq),
        _ => None,
    }
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("LP line {line}: {msg}"))
}

/// Parses `c x + c y ...` into name/coefficient pairs.
fn parse_expr(tokens: &[&str], line: usize) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i];
        match t {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                if let Some(c) = parse_num(t) {
                    if coef.is_some() {
                        return Err(err(line, "two numbers in a row"));
                    }
                    coef = Some(c);
                } else {
                    check_name(t).map_err(|_| err(line, format!("bad token {t:?}")))?;
                    out.push((t.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
        i += 1;
    }
    if coef.is_some() {
        return Err(err(line, "dangling constant in expression"));
    }
    Ok(out)
}

struct Statement {
    line: usize,
    section: Section,
    text: String,
}

fn statements(text: &str) -> Result<Vec<Statement>> {
    let mut out: Vec<Statement> = Vec::new();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('\\').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(body) {
            section = s;
            continue;
        }
        if section == Section::None {
            if body.trim().eq_ignore_ascii_case("maximize") || body.trim().eq_ignore_ascii_case("max") {
                return Err(err(line, "maximization is not supported"));
            }
            return Err(err(line, "content before the objective section"));
        }
        if section == Section::End {
            return Err(err(line, "content after End"));
        }
        let same = out.last().is_some_and(|s| s.section == section);
        let append = match section {
            Section::Objective => same,
            Section::Constraints => same && !body.contains(':'),
            _ => false,
        };
        match out.last_mut() {
            Some(last) if append => {
                last.text.push(' ');
                last.text.push_str(body);
            }
            _ => out.push(Statement {
                line,
                section,
                text: body.to_string(),
            }),
        }
    }
    if section != Section::End {
        return Err(Error::Parse("LP text has no End".into()));
    }
    Ok(out)
}

/// Reads LP text back into a model. Variables keep the order of the Bounds
/// section, followed by any others in order of first use. Roles are `Free`
/// and every row is in the `Other` family.
pub fn parse_lp(text: &str) -> Result<IpModel> {
    let stmts = statements(text)?;
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    let mut binary: Vec<bool> = Vec::new();
    let mut touch = |name: &str, order: &mut Vec<String>, bounds: &mut Vec<(f64, f64)>, binary: &mut Vec<bool>| -> usize {
        if let Some(&i) = index.get(name) {
            return i;
        }
        index.insert(name.to_string(), order.len());
        order.push(name.to_string());
        bounds.push((0.0, f64::INFINITY));
        binary.push(false);
        order.len() - 1
    };

    // bounds first so their order defines the declaration order
    let mut explicit = Vec::new();
    for s in stmts.iter().filter(|s| s.section == Section::Bounds) {
        let toks: Vec<&str> = s.text.split_whitespace().collect();
        let (name, lo, hi) = match toks.as_slice() {
            [lo, c1, x, c2, hi] if parse_cmp(c1) == Some(Comparator::Le) && parse_cmp(c2) == Some(Comparator::Le) => {
                let lo = parse_num(lo).ok_or_else(|| err(s.line, "bad lower bound"))?;
                let hi = parse_num(hi).ok_or_else(|| err(s.line, "bad upper bound"))?;
                (*x, Some(lo), Some(hi))
            }
            [x, free] if free.eq_ignore_ascii_case("free") => (*x, Some(f64::NEG_INFINITY), Some(f64::INFINITY)),
            [x, c, v] => {
                let (x, c, v) = match parse_num(x) {
                    Some(_) => (*v, flip(parse_cmp(c)), *x),
                    None => (*x, parse_cmp(c), *v),
                };
                let v = parse_num(v).ok_or_else(|| err(s.line, "bad bound value"))?;
                match c {
                    Some(Comparator::Le) => (x, None, Some(v)),
                    Some(Comparator::Ge) => (x, Some(v), None),
                    Some(Comparator::Eq) => (x, Some(v), Some(v)),
                    None => return Err(err(s.line, "bad bound comparator")),
                }
            }
            _ => return Err(err(s.line, "unrecognised bound")),
        };
        check_name(name).map_err(|_| err(s.line, format!("bad name {name:?}")))?;
        let i = touch(name, &mut order, &mut bounds, &mut binary);
        explicit.push((i, lo, hi));
    }

    let mut objective = Vec::new();
    let mut rows = Vec::new();
    for s in &stmts {
        match s.section {
            Section::Objective => {
                let body = match s.text.split_once(':') {
                    Some((_, b)) => b,
                    None => &s.text,
                };
                let toks: Vec<&str> = body.split_whitespace().collect();
                for (n, c) in parse_expr(&toks, s.line)? {
                    objective.push((touch(&n, &mut order, &mut bounds, &mut binary), c));
                }
            }
            Section::Constraints => {
                let (name, body) = s
                    .text
                    .split_once(':')
                    .ok_or_else(|| err(s.line, "constraint without a name"))?;
                let name = name.trim();
                let toks: Vec<&str> = body.split_whitespace().collect();
                let k = toks
                    .iter()
                    .position(|t| parse_cmp(t).is_some())
                    .ok_or_else(|| err(s.line, "constraint without a comparator"))?;
                let cmp = parse_cmp(toks[k]).expect("comparator");
                let rhs = match &toks[k + 1..] {
                    [v] => parse_num(v),
                    ["-", v] => parse_num(v).map(|x| -x),
                    _ => None,
                }
                .ok_or_else(|| err(s.line, "bad right-hand side"))?;
                let mut terms = Vec::new();
                for (n, c) in parse_expr(&toks[..k], s.line)? {
                    terms.push((touch(&n, &mut order, &mut bounds, &mut binary), c));
                }
                rows.push((name.to_string(), terms, cmp, rhs));
            }
            Section::Binaries | Section::Generals => {
                for t in s.text.split_whitespace() {
                    check_name(t).map_err(|_| err(s.line, format!("bad name {t:?}")))?;
                    let i = touch(t, &mut order, &mut bounds, &mut binary);
                    binary[i] = true;
                    if s.section == Section::Binaries {
                        bounds[i] = (0.0, 1.0);
                    }
                }
            }
            _ => {}
        }
    }
    for (i, lo, hi) in explicit {
        if let Some(lo) = lo {
            bounds[i].0 = lo;
        }
        if let Some(hi) = hi {
            bounds[i].1 = hi;
        }
    }

    let mut model = IpModel::new();
    for (i, name) in order.iter().enumerate() {
        let (lo, hi) = bounds[i];
        let kind = if binary[i] {
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::Parse(format!("integer variable {name} is not 0/1")));
            }
            VarKind::Boolean
        } else {
            VarKind::Continuous
        };
        model.add_var(name.clone(), kind, lo, hi, VarRole::Free)?;
    }
    for (v, c) in objective {
        model.add_objective(v, c);
    }
    for (name, terms, cmp, rhs) in rows {
        model.add_row(name, terms, cmp, rhs, RowFamily::Other)?;
    }
    Ok(model)
}

fn flip(c: Option<Comparator>) -> Option<Comparator> {
    c.map(|c| match c {
        Comparator::Le => Comparator::Ge,
        Comparator::Ge => Comparator::Le,
        Comparator::Eq => Comparator::Eq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;
    use crate::model::{build_network_model, FunctionalSpec, Policy, SinkSelection};

    #[test]
    fn trivial_model_has_four_sections() {
        let mut m = IpModel::new();
        let x = m.add_bool("x", VarRole::Free).unwrap();
        m.add_objective(x, 1.0);
        m.add_row("c1", vec![(x, 1.0)], Comparator::Ge, 1.0, RowFamily::Other).unwrap();
        let text = export_lp(&m).unwrap();
        for s in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(text.contains(s), "{text}");
        }
        assert!(text.contains(" c1: 1 x >= 1\n"));
        assert!(parse_lp(&text).unwrap().same_program(&m));
    }

    #[test]
    fn network_round_trip() {
        let m = grid(2, 2);
        let spec = FunctionalSpec {
            sinks: SinkSelection::Vertices(vec![0]),
            exclude_boundary: Some(false),
            lambda_distance: 0.1,
            dead_ends: Policy::Penalized(2.5),
            ..Default::default()
        };
        let model = build_network_model(&m, &spec).unwrap();
        let a = export_lp(&model).unwrap();
        let back = parse_lp(&a).unwrap();
        assert!(back.same_program(&model));
        assert_eq!(export_lp(&back).unwrap(), a);
        assert!(a.lines().all(|l| l.len() <= WRAP + 40));
    }

    #[test]
    fn reads_loose_syntax() {
        let text = "\\ hand written\nMINIMIZE\n obj: 2 x - y\nst\n r: x + y >= 1\n q: - x <= 0\nBOUNDS\n y <= 3\n0 <= x\nBinary\n x\nend\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.rows().len(), 2);
        assert_eq!(m.objective()[1].1, -1.0);
        assert_eq!(m.var(m.var_by_name("y").unwrap()).upper, 3.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp("Minimize\n obj: x\nSubject To\n r: x ?? 1\nEnd\n").is_err());
        assert!(parse_lp("Maximize\n obj: x\nEnd\n").is_err());
        assert!(parse_lp("Minimize\n obj: x\n").is_err());
    }
}
