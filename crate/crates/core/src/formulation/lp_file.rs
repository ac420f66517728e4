//! CPLEX-style LP text format: write, read, and a plain solution file.
//!
//! Output is deterministic: variables and rows appear in instance order,
//! numbers use the shortest representation that round-trips exactly, and
//! every variable gets an explicit entry in `Bounds` (binaries included) so
//! a reader can recover the original variable order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::instance::{Constraint, MilpInstance, RowTag, Sense, Variable};
use crate::error::LpFileError;

const TERMS_PER_LINE: usize = 8;

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    let mut n = 0;
    for (a, name) in terms {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", num(a.abs()));
        n += 1;
    }
}

/// Renders `inst` as LP text.
pub fn write_lp(inst: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ seasonal-dispatch model\n");
    let _ = writeln!(out, "\\ {} variables, {} rows", inst.n_vars(), inst.n_rows());
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        inst.variables
            .iter()
            .filter(|v| v.cost != 0.0)
            .map(|v| (v.cost, v.name.clone())),
    );
    out.push_str("\nSubject To\n");
    for c in &inst.constraints {
        let _ = write!(out, " {}:", c.name);
        if c.coeffs.is_empty() {
            let first = inst.variables.first().map_or("x", |v| v.name.as_str());
            let _ = write!(out, " 0 {first}");
        } else {
            write_terms(
                &mut out,
                c.coeffs.iter().map(|&(j, a)| (a, inst.variables[j].name.clone())),
            );
        }
        let _ = writeln!(out, " {} {}", c.sense.as_str(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &inst.variables {
        let (l, u) = (v.lower, v.upper);
        let _ = if l == u {
            writeln!(out, " {} = {}", v.name, num(l))
        } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
            writeln!(out, " {} free", v.name)
        } else if u == f64::INFINITY {
            writeln!(out, " {} >= {}", v.name, num(l))
        } else if l == f64::NEG_INFINITY {
            writeln!(out, " -inf <= {} <= {}", v.name, num(u))
        } else {
            writeln!(out, " {} <= {} <= {}", num(l), v.name, num(u))
        };
    }
    if inst.variables.iter().any(|v| v.binary) {
        out.push_str("Binaries\n");
        for v in inst.variables.iter().filter(|v| v.binary) {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp_file(inst: &MilpInstance, path: &Path) -> Result<(), LpFileError> {
    std::fs::write(path, write_lp(inst))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, bool)> {
    let lower = line.trim().to_ascii_lowercase();
    let s = match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, false),
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, true),
        "subject to" | "such that" | "st" | "s.t." => (Section::Constraints, false),
        "bounds" | "bound" => (Section::Bounds, false),
        "binaries" | "binary" | "bin" => (Section::Binaries, false),
        "generals" | "general" | "gen" => (Section::Generals, false),
        "end" => (Section::End, false),
        _ => return None,
    };
    Some(s)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sign(f64),
    Colon,
    Cmp(Sense),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c)
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Tok>, LpFileError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let err = |msg: String| LpFileError::Parse { line: lineno, msg };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '+' || c == '-' {
            toks.push(Tok::Sign(if c == '-' { -1.0 } else { 1.0 }));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j] == '=' || chars[j] == '<' || chars[j] == '>') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(err(format!("unknown operator {op}"))),
            };
            toks.push(Tok::Cmp(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_digit()
                    || chars[j] == '.'
                    || ((chars[j] == 'e' || chars[j] == 'E')
                        && j + 1 < chars.len()
                        && (chars[j + 1].is_ascii_digit() || chars[j + 1] == '-' || chars[j + 1] == '+')))
            {
                if chars[j] == 'e' || chars[j] == 'E' {
                    j += 2;
                } else {
                    j += 1;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<f64>().map_err(|_| err(format!("bad number {s}")))?;
            toks.push(Tok::Num(v));
            i = j;
        } else if is_name_char(c) {
            let mut j = i;
            while j < chars.len() && (is_name_char(chars[j]) || chars[j] == '[' || chars[j] == ']') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let low = s.to_ascii_lowercase();
            if low == "inf" || low == "infinity" {
                toks.push(Tok::Num(f64::INFINITY));
            } else {
                toks.push(Tok::Name(s));
            }
            i = j;
        } else {
            return Err(err(format!("unexpected character {c:?}")));
        }
    }
    Ok(toks)
}

struct Builder {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), j);
        j
    }
}

/// Parses a linear expression `[+-] [coef] name ...` from `toks`, stopping
/// at a comparison operator. Returns the terms and the position reached.
fn parse_expr(
    toks: &[Tok],
    mut pos: usize,
    b: &mut Builder,
    lineno: usize,
) -> Result<(Vec<(usize, f64)>, usize), LpFileError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while pos < toks.len() {
        match &toks[pos] {
            Tok::Sign(s) => {
                sign *= s;
            }
            Tok::Num(v) => {
                coef = Some(coef.unwrap_or(1.0) * v);
            }
            Tok::Name(n) => {
                let j = b.var(n);
                terms.push((j, sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
            Tok::Cmp(_) => break,
            Tok::Colon => {
                return Err(LpFileError::Parse {
                    line: lineno,
                    msg: "unexpected ':'".into(),
                })
            }
        }
        pos += 1;
    }
    if coef.is_some() {
        return Err(LpFileError::Parse {
            line: lineno,
            msg: "constant terms in expressions are not supported".into(),
        });
    }
    Ok((terms, pos))
}

fn merge_terms(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut terms = terms;
    terms.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, a) in terms {
        match out.last_mut() {
            Some((k, b)) if *k == j => *b += a,
            _ => out.push((j, a)),
        }
    }
    out
}

/// Parses LP text into an instance. Maximization objectives are negated.
/// Row tags are `Imported`; the window layout is absent.
pub fn parse_lp(text: &str) -> Result<MilpInstance, LpFileError> {
    let mut b = Builder {
        index: HashMap::new(),
        names: Vec::new(),
    };
    let mut section = Section::Preamble;
    let mut maximize = false;
    let mut obj_toks: Vec<Tok> = Vec::new();
    let mut obj_line = 0;
    // Constraint tokens accumulate across lines until the rhs is read.
    let mut pending: Vec<Tok> = Vec::new();
    let mut pending_line = 0;
    let mut rows: Vec<(Option<String>, Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    let mut bounds: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    let mut bound_order: Vec<usize> = Vec::new();
    let mut binaries: Vec<usize> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some((s, max)) = section_keyword(line) {
            section = s;
            if s == Section::Objective {
                maximize = max;
                obj_line = lineno;
            }
            continue;
        }
        let toks = tokenize(line, lineno)?;
        match section {
            Section::Preamble => {
                return Err(LpFileError::Parse {
                    line: lineno,
                    msg: "content before objective section".into(),
                })
            }
            Section::Objective => obj_toks.extend(toks),
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = lineno;
                }
                pending.extend(toks);
                // A row is complete once an operator is followed by a number.
                if let Some(op) = pending.iter().position(|t| matches!(t, Tok::Cmp(_))) {
                    let rest = &pending[op + 1..];
                    let rhs = match rest {
                        [Tok::Num(v)] => Some(*v),
                        [Tok::Sign(s), Tok::Num(v)] => Some(s * v),
                        [] => None,
                        _ => {
                            return Err(LpFileError::Parse {
                                line: lineno,
                                msg: "malformed right-hand side".into(),
                            })
                        }
                    };
                    if let Some(rhs) = rhs {
                        let (name, start) = match pending.as_slice() {
                            [Tok::Name(n), Tok::Colon, ..] => (Some(n.clone()), 2),
                            _ => (None, 0),
                        };
                        let (terms, at) = parse_expr(&pending, start, &mut b, pending_line)?;
                        let Tok::Cmp(sense) = pending[at] else { unreachable!() };
                        rows.push((name, merge_terms(terms), sense, rhs));
                        pending.clear();
                    }
                }
            }
            Section::Bounds => {
                let bound = parse_bound(&toks, &mut b, lineno)?;
                if !bound_order.contains(&bound.0) {
                    bound_order.push(bound.0);
                }
                bounds.push(bound);
            }
            Section::Binaries => {
                for t in toks {
                    match t {
                        Tok::Name(n) => binaries.push(b.var(&n)),
                        _ => {
                            return Err(LpFileError::Parse {
                                line: lineno,
                                msg: "expected variable names".into(),
                            })
                        }
                    }
                }
            }
            Section::Generals => {
                return Err(LpFileError::Parse {
                    line: lineno,
                    msg: "general integer variables are not supported".into(),
                })
            }
            Section::End => {}
        }
    }
    if !pending.is_empty() {
        return Err(LpFileError::Parse {
            line: pending_line,
            msg: "unterminated constraint".into(),
        });
    }

    let obj_start = match obj_toks.as_slice() {
        [Tok::Name(_), Tok::Colon, ..] => 2,
        _ => 0,
    };
    let (obj_terms, at) = parse_expr(&obj_toks, obj_start, &mut b, obj_line)?;
    if at != obj_toks.len() {
        return Err(LpFileError::Parse {
            line: obj_line,
            msg: "comparison operator in objective".into(),
        });
    }

    // Variable order: as listed in Bounds, then by first appearance.
    let n = b.names.len();
    let mut order: Vec<usize> = bound_order.clone();
    let mut listed = vec![false; n];
    for &j in &order {
        listed[j] = true;
    }
    order.extend((0..n).filter(|&j| !listed[j]));
    let mut new_index = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }

    let mut variables: Vec<Variable> = order
        .iter()
        .map(|&old| Variable::continuous(b.names[old].clone(), 0.0, f64::INFINITY, 0.0))
        .collect();
    for &j in &binaries {
        let v = &mut variables[new_index[j]];
        v.binary = true;
        v.upper = 1.0;
    }
    for (j, lo, up) in bounds {
        let v = &mut variables[new_index[j]];
        if let Some(l) = lo {
            v.lower = l;
        }
        if let Some(u) = up {
            v.upper = u;
        }
    }
    let sign = if maximize { -1.0 } else { 1.0 };
    for (j, a) in merge_terms(obj_terms) {
        variables[new_index[j]].cost = sign * a;
    }

    let constraints = rows
        .into_iter()
        .enumerate()
        .map(|(i, (name, terms, sense, rhs))| {
            let mut coeffs: Vec<(usize, f64)> = terms.into_iter().map(|(j, a)| (new_index[j], a)).collect();
            coeffs.sort_by_key(|&(j, _)| j);
            // Zero-coefficient placeholders keep empty rows parseable.
            coeffs.retain(|&(_, a)| a != 0.0);
            Constraint {
                name: name.unwrap_or_else(|| format!("R{}", i + 1)),
                tag: RowTag::Imported,
                coeffs,
                sense,
                rhs,
            }
        })
        .collect();

    Ok(MilpInstance {
        variables,
        constraints,
        layout: None,
    })
}

fn signed_num(toks: &[Tok]) -> Option<(f64, usize)> {
    match toks {
        [Tok::Sign(s), Tok::Num(v), ..] => Some((s * v, 2)),
        [Tok::Num(v), ..] => Some((*v, 1)),
        _ => None,
    }
}

type BoundLine = (usize, Option<f64>, Option<f64>);

fn parse_bound(toks: &[Tok], b: &mut Builder, lineno: usize) -> Result<BoundLine, LpFileError> {
    let err = || LpFileError::Parse {
        line: lineno,
        msg: "malformed bound".into(),
    };
    // x free
    if let [Tok::Name(x), Tok::Name(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            return Ok((b.var(x), Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
        }
    }
    // l <= x [<= u]
    if let Some((l, used)) = signed_num(toks) {
        let rest = &toks[used..];
        let [Tok::Cmp(s1), Tok::Name(x), tail @ ..] = rest else { return Err(err()) };
        let j = b.var(x);
        let (lo, up) = match s1 {
            Sense::Le => (Some(l), None),
            Sense::Ge => (None, Some(l)),
            Sense::Eq => (Some(l), Some(l)),
        };
        if tail.is_empty() {
            return Ok((j, lo, up));
        }
        let [Tok::Cmp(s2), num @ ..] = tail else { return Err(err()) };
        let (u, used2) = signed_num(num).ok_or_else(err)?;
        if used2 != num.len() || *s2 != *s1 || *s1 == Sense::Eq {
            return Err(err());
        }
        return Ok(match s1 {
            Sense::Le => (j, lo, Some(u)),
            _ => (j, Some(u), up),
        });
    }
    // x op v
    let [Tok::Name(x), Tok::Cmp(s), num @ ..] = toks else { return Err(err()) };
    let (v, used) = signed_num(num).ok_or_else(err)?;
    if used != num.len() {
        return Err(err());
    }
    let j = b.var(x);
    Ok(match s {
        Sense::Le => (j, None, Some(v)),
        Sense::Ge => (j, Some(v), None),
        Sense::Eq => (j, Some(v), Some(v)),
    })
}

pub fn read_lp_file(path: &Path) -> Result<MilpInstance, LpFileError> {
    parse_lp(&std::fs::read_to_string(path)?)
}

/// `# objective <value>` followed by one `name value` line per variable.
pub fn write_solution(inst: &MilpInstance, objective: f64, x: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# objective {}", num(objective));
    for (v, xi) in inst.variables.iter().zip(x) {
        let _ = writeln!(out, "{} {}", v.name, num(*xi));
    }
    out
}

/// Reads a solution file against `inst`. Variables missing from the file
/// are zero. Returns the stated objective, if any, and the values.
pub fn parse_solution(inst: &MilpInstance, text: &str) -> Result<(Option<f64>, Vec<f64>), LpFileError> {
    let index: HashMap<&str, usize> = inst
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut x = vec![0.0; inst.n_vars()];
    let mut objective = None;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("objective") {
                objective = it.next().and_then(|v| v.parse().ok());
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(value), None) = (it.next(), it.next(), it.next()) else {
            return Err(LpFileError::Parse {
                line: k + 1,
                msg: "expected `name value`".into(),
            });
        };
        let j = *index
            .get(name)
            .ok_or_else(|| LpFileError::UnknownVariable(name.to_string()))?;
        x[j] = value.parse().map_err(|_| LpFileError::Parse {
            line: k + 1,
            msg: format!("bad value {value}"),
        })?;
    }
    Ok((objective, x))
}
