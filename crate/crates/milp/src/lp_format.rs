//! CPLEX LP text format: a writer for inspection in other tools and a reader
//! for the subset the writer produces.

use std::fmt::Write as _;

use crate::{MilpError, MilpProblem, ObjectiveSense, RowSense, VarKind};

const LINE_WIDTH: usize = 240;

fn push_term(out: &mut String, line_len: &mut usize, coef: f64, name: &str, first: bool) {
    let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
    let mag = coef.abs();
    let piece = if mag == 1.0 {
        format!("{sign} {name}")
    } else {
        format!("{sign} {mag} {name}")
    };
    let piece = piece.trim_start().to_string();
    if *line_len + piece.len() + 1 > LINE_WIDTH {
        out.push_str("\n   ");
        *line_len = 3;
    }
    out.push(' ');
    out.push_str(&piece);
    *line_len += piece.len() + 1;
}

fn write_expr(out: &mut String, label: &str, terms: &[(usize, f64)], problem: &MilpProblem) {
    let _ = write!(out, " {label}:");
    let mut line_len = label.len() + 2;
    let mut first = true;
    for &(j, c) in terms {
        if c == 0.0 {
            continue;
        }
        push_term(out, &mut line_len, c, &problem.variables[j].name, first);
        first = false;
    }
    if first {
        // An empty expression still needs a term.
        let name = problem.variables.first().map_or("x0", |v| v.name.as_str());
        let _ = write!(out, " 0 {name}");
    }
}

/// Renders the problem as LP text.
pub fn write_lp(problem: &MilpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.name);
    out.push_str(match problem.sense {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    write_expr(&mut out, "obj", &problem.objective, problem);
    out.push_str("\nSubject To\n");
    for c in &problem.constraints {
        write_expr(&mut out, &c.name, &c.terms, problem);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &problem.variables {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {} = {}", v.name, v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
            }
        }
    }
    let binaries: Vec<&str> = problem
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(16) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Done,
}

struct Reader {
    problem: MilpProblem,
    names: std::collections::HashMap<String, usize>,
}

impl Reader {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.names.get(name) {
            return j;
        }
        let j = self.problem.add_variable(name, VarKind::Continuous, 0.0, f64::INFINITY);
        self.names.insert(name.to_string(), j);
        j
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MilpError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| MilpError::Parse {
            line,
            message: format!("expected a number, found `{tok}`"),
        }),
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

/// Splits `label: expr` and parses `expr` into merged terms.
fn parse_expr(
    reader: &mut Reader,
    tokens: &[String],
    line: usize,
) -> Result<Vec<(usize, f64)>, MilpError> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in tokens {
        match tok.as_str() {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t if is_number(t) => coef = Some(parse_num(t, line)?),
            t => {
                let j = reader.var(t);
                let c = sign * coef.take().unwrap_or(1.0);
                match terms.iter_mut().find(|(k, _)| *k == j) {
                    Some(entry) => entry.1 += c,
                    None => terms.push((j, c)),
                }
                sign = 1.0;
            }
        }
    }
    if coef.is_some() {
        return Err(MilpError::Parse {
            line,
            message: "constant terms are not supported".into(),
        });
    }
    terms.retain(|t| t.1 != 0.0);
    Ok(terms)
}

/// Splits on whitespace and detaches operators so `3x+2y<=4` style input
/// with separating spaces still tokenizes predictably.
fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in s.split_whitespace() {
        let mut cur = String::new();
        let chars: Vec<char> = raw.chars().collect();
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k];
            let two: String = chars[k..(k + 2).min(chars.len())].iter().collect();
            if two == "<=" || two == ">=" || two == "=<" || two == "=>" {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(two);
                k += 2;
                continue;
            }
            let exponent_sign = (c == '+' || c == '-')
                && cur.ends_with(['e', 'E'])
                && cur[..cur.len() - 1].parse::<f64>().is_ok();
            if (c == '+' || c == '-') && !exponent_sign && !(cur.is_empty() && k + 1 < chars.len() && chars[k + 1].is_ascii_digit() && out.last().is_some_and(|t| t == "<=" || t == ">=" || t == "=" || t == "<" || t == ">")) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else if c == '<' || c == '>' || c == '=' {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
            k += 1;
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn sense_of(tok: &str) -> Option<RowSense> {
    match tok {
        "<=" | "=<" | "<" => Some(RowSense::Le),
        ">=" | "=>" | ">" => Some(RowSense::Ge),
        "=" => Some(RowSense::Eq),
        _ => None,
    }
}

fn header(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "max" | "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::Done),
        _ => None,
    }
}

/// Parses LP text. Supports objective, `Subject To`, `Bounds`, `Binaries`
/// and `End`; general integers and semi-continuous sections are rejected.
pub fn read_lp(text: &str) -> Result<MilpProblem, MilpError> {
    let mut reader = Reader {
        problem: MilpProblem::new("lp", ObjectiveSense::Minimize),
        names: Default::default(),
    };
    let mut section: Option<Section> = None;
    // Statements can span lines; buffer until the next label or section.
    let mut pending: Vec<(usize, String)> = Vec::new();

    let flush = |reader: &mut Reader,
                 section: Option<Section>,
                 pending: &mut Vec<(usize, String)>|
     -> Result<(), MilpError> {
        if pending.is_empty() {
            return Ok(());
        }
        let line = pending[0].0;
        let joined: String = pending.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join(" ");
        pending.clear();
        let (label, body) = match joined.split_once(':') {
            Some((l, b)) => (Some(l.trim().to_string()), b.to_string()),
            None => (None, joined),
        };
        let tokens = tokenize(&body);
        match section {
            Some(Section::Objective) => {
                reader.problem.objective = parse_expr(reader, &tokens, line)?;
            }
            Some(Section::Constraints) => {
                let pos = tokens.iter().position(|t| sense_of(t).is_some()).ok_or(MilpError::Parse {
                    line,
                    message: "constraint without a comparison operator".into(),
                })?;
                let sense = sense_of(&tokens[pos]).expect("found above");
                let rhs_tokens = &tokens[pos + 1..];
                let rhs = match rhs_tokens {
                    [v] => parse_num(v, line)?,
                    [s, v] if s == "-" || s == "+" => {
                        let v = parse_num(v, line)?;
                        if s == "-" { -v } else { v }
                    }
                    _ => {
                        return Err(MilpError::Parse {
                            line,
                            message: "right-hand side must be a single constant".into(),
                        })
                    }
                };
                let terms = parse_expr(reader, &tokens[..pos], line)?;
                let name = label.unwrap_or_else(|| format!("R{}", reader.problem.constraints.len() + 1));
                reader.problem.add_constraint(name, terms, sense, rhs);
            }
            _ => unreachable!("only objective and constraints are buffered"),
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(name) = raw.trim().strip_prefix("\\ Problem:") {
            reader.problem.name = name.trim().to_string();
            continue;
        }
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(next) = header(line) {
            flush(&mut reader, section, &mut pending)?;
            if next == Section::Objective {
                reader.problem.sense = if line.to_ascii_lowercase().starts_with("max") {
                    ObjectiveSense::Maximize
                } else {
                    ObjectiveSense::Minimize
                };
            }
            section = Some(next);
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if ["general", "generals", "gen", "integer", "integers", "semi-continuous", "semis", "sos"].contains(&lower.as_str()) {
            return Err(MilpError::Unsupported(format!("section `{line}` at line {line_no}")));
        }
        match section {
            None => {
                return Err(MilpError::Parse {
                    line: line_no,
                    message: "content before the objective section".into(),
                })
            }
            Some(Section::Done) => break,
            Some(Section::Objective) => pending.push((line_no, line.to_string())),
            Some(Section::Constraints) => {
                let starts_statement = line.contains(':');
                let complete_prev = pending
                    .iter()
                    .any(|(_, s)| tokenize(s.split_once(':').map_or(s, |(_, b)| b)).iter().any(|t| sense_of(t).is_some()));
                if starts_statement || complete_prev {
                    flush(&mut reader, section, &mut pending)?;
                }
                pending.push((line_no, line.to_string()));
            }
            Some(Section::Bounds) => parse_bound(&mut reader, line, line_no)?,
            Some(Section::Binaries) => {
                for name in line.split_whitespace() {
                    let j = reader.var(name);
                    let v = &mut reader.problem.variables[j];
                    v.kind = VarKind::Binary;
                    v.lower = v.lower.max(0.0);
                    v.upper = v.upper.min(1.0);
                }
            }
        }
    }
    flush(&mut reader, section, &mut pending)?;
    reader.problem.check()?;
    Ok(reader.problem)
}

fn parse_bound(reader: &mut Reader, line: &str, line_no: usize) -> Result<(), MilpError> {
    let tokens = tokenize(line);
    let err = || MilpError::Parse {
        line: line_no,
        message: format!("unrecognized bound `{line}`"),
    };
    // Re-attach unary signs to numbers.
    let mut toks: Vec<String> = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        if (tokens[k] == "-" || tokens[k] == "+") && k + 1 < tokens.len() {
            let next = &tokens[k + 1];
            if is_number(next) || next.eq_ignore_ascii_case("inf") || next.eq_ignore_ascii_case("infinity") {
                toks.push(format!("{}{}", tokens[k], next));
                k += 2;
                continue;
            }
        }
        toks.push(tokens[k].clone());
        k += 1;
    }
    let numeric = |t: &str| parse_num(t, line_no).is_ok();
    match toks.as_slice() {
        [name, free] if free.eq_ignore_ascii_case("free") => {
            let j = reader.var(name);
            reader.problem.variables[j].lower = f64::NEG_INFINITY;
            reader.problem.variables[j].upper = f64::INFINITY;
        }
        [lo, op1, name, op2, hi] if !numeric(name) => {
            let (s1, s2) = (sense_of(op1).ok_or_else(err)?, sense_of(op2).ok_or_else(err)?);
            if s1 != RowSense::Le || s2 != RowSense::Le {
                return Err(err());
            }
            let (lo, hi) = (parse_num(lo, line_no)?, parse_num(hi, line_no)?);
            let j = reader.var(name);
            reader.problem.variables[j].lower = lo;
            reader.problem.variables[j].upper = hi;
        }
        [a, op, b] => {
            let sense = sense_of(op).ok_or_else(err)?;
            let (name, value, sense) = if numeric(a) {
                let flipped = match sense {
                    RowSense::Le => RowSense::Ge,
                    RowSense::Ge => RowSense::Le,
                    RowSense::Eq => RowSense::Eq,
                };
                (b, parse_num(a, line_no)?, flipped)
            } else {
                (a, parse_num(b, line_no)?, sense)
            };
            let j = reader.var(name);
            let v = &mut reader.problem.variables[j];
            match sense {
                RowSense::Le => v.upper = value,
                RowSense::Ge => v.lower = value,
                RowSense::Eq => {
                    v.lower = value;
                    v.upper = value;
                }
            }
        }
        _ => return Err(err()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_handwritten_model() {
        let text = "\\ comment\nMaximize\n obj: 3 x + 2 y - z\nSubject To\n c1: x + y <= 4\n c2: x + 3 y\n   >= -2\n c3: z - x = 0.5\nBounds\n 0 <= x <= 3\n y >= 1\n z free\nBinaries\n b\nEnd\n";
        let p = read_lp(text).unwrap();
        assert_eq!(p.sense, ObjectiveSense::Maximize);
        assert_eq!(p.num_constraints(), 3);
        assert_eq!(p.constraints[1].rhs, -2.0);
        assert_eq!(p.constraints[1].sense, RowSense::Ge);
        let x = p.variable_index("x").unwrap();
        assert_eq!(p.variables[x].upper, 3.0);
        let z = p.variable_index("z").unwrap();
        assert_eq!(p.variables[z].lower, f64::NEG_INFINITY);
        let b = p.variable_index("b").unwrap();
        assert_eq!(p.variables[b].kind, VarKind::Binary);
        assert_eq!(p.objective, vec![(x, 3.0), (p.variable_index("y").unwrap(), 2.0), (z, -1.0)]);
    }

    #[test]
    fn rejects_general_integers() {
        let text = "Minimize\n obj: x\nSubject To\n c: x >= 1\nGenerals\n x\nEnd\n";
        assert!(matches!(read_lp(text), Err(MilpError::Unsupported(_))));
    }

    #[test]
    fn long_rows_wrap() {
        let mut p = MilpProblem::new("wide", ObjectiveSense::Maximize);
        let vars: Vec<usize> = (0..200).map(|k| p.add_binary(format!("player_{k:03}_keep"))).collect();
        p.objective = vars.iter().map(|&j| (j, 1.5)).collect();
        p.add_constraint("all", vars.iter().map(|&j| (j, 1.0)).collect(), RowSense::Le, 25.0);
        let text = write_lp(&p);
        assert!(text.lines().all(|l| l.len() <= LINE_WIDTH + 40));
        assert_eq!(read_lp(&text).unwrap(), p);
    }
}
