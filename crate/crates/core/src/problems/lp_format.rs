//! CPLEX-style LP text export for cross-checking with external solvers.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Knowledge, Problem, ProblemError, Sense, VarKind};

/// Variable names of a problem, in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpNames {
    pub vars: Vec<String>,
}

impl LpNames {
    pub fn new(problem: &Problem) -> Self {
        let map = &problem.map;
        let prefixed = map.case == Knowledge::Partial;
        let prefix = |w: usize| if prefixed { format!("w{w}_") } else { String::new() };
        let vars = (0..map.end)
            .map(|j| {
                let slot = |b: usize| map.first_slot + b;
                match map.describe(j) {
                    VarKind::Pi { b, k } => format!("pi_{}_{k}", slot(b)),
                    VarKind::Eps { w, b, l, i } => format!("{}eps_{}_{l}_{i}", prefix(w), slot(b)),
                    VarKind::Zeta { w, b, l, j, i } => format!("{}zeta_{}_{l}_{j}_{i}", prefix(w), slot(b)),
                    VarKind::Curtail { w, b, l } => format!("{}curt_{}_{l}", prefix(w), slot(b)),
                }
            })
            .collect();
        LpNames { vars }
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.vars.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect()
    }
}

fn push_term(out: &mut String, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Renders the problem in LP format. Coefficients use shortest round-trip decimals.
pub fn write_lp(problem: &Problem) -> String {
    let names = LpNames::new(problem);
    let p = &problem.bilp;
    let mut out = String::new();
    let _ = writeln!(out, "\\ {} knowledge, {} variables, {} rows", problem.map.case.name(), p.num_vars(), p.rows.len());
    out.push_str("Minimize\n obj:");
    for (j, &c) in p.cost.iter().enumerate() {
        if c != 0.0 {
            push_term(&mut out, c, &names.vars[j]);
        }
    }
    let _ = writeln!(out, " + {}", p.constant);
    out.push_str("Subject To\n");
    for f in &p.families {
        for r in f.start..f.start + f.len {
            let row = &p.rows[r];
            let _ = write!(out, " {}_{}:", f.name, r - f.start);
            if row.coefs.is_empty() {
                out.push_str(" 0 ");
                out.push_str(&names.vars[0]);
            }
            for &(j, a) in &row.coefs {
                push_term(&mut out, a, &names.vars[j]);
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
    }
    out.push_str("Bounds\n");
    for j in 0..p.num_vars() {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo == hi {
            let _ = writeln!(out, " {} = {lo}", names.vars[j]);
        } else if !p.binary[j] {
            let _ = writeln!(out, " {lo} <= {} <= {hi}", names.vars[j]);
        }
    }
    out.push_str("Binaries\n");
    for j in (0..p.num_vars()).filter(|&j| p.binary[j] && p.lower[j] != p.upper[j]) {
        let _ = writeln!(out, " {}", names.vars[j]);
    }
    out.push_str("End\n");
    out
}

/// Linear objective read back from LP text: `(constant, name -> coefficient)`.
pub fn read_lp_objective(text: &str) -> Result<(f64, HashMap<String, f64>), ProblemError> {
    let bad = |m: &str| ProblemError::Input(format!("LP objective: {m}"));
    let start = text.find("obj:").ok_or_else(|| bad("missing objective"))?;
    let line = text[start + 4..].lines().next().unwrap_or_default();
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let mut constant = 0.0;
    let mut coefs = HashMap::new();
    let mut t = 0;
    while t < tokens.len() {
        let sign = match tokens[t] {
            "+" => 1.0,
            "-" => -1.0,
            other => return Err(bad(&format!("unexpected token {other}"))),
        };
        let value: f64 = tokens.get(t + 1).ok_or_else(|| bad("dangling sign"))?.parse().map_err(|_| bad("bad number"))?;
        match tokens.get(t + 2) {
            Some(name) if !matches!(*name, "+" | "-") => {
                *coefs.entry(name.to_string()).or_insert(0.0) += sign * value;
                t += 3;
            }
            _ => {
                constant += sign * value;
                t += 2;
            }
        }
    }
    Ok((constant, coefs))
}

/// Reads `name value` lines into a full variable vector (missing names are 0).
pub fn read_solution(text: &str, names: &LpNames) -> Result<Vec<f64>, ProblemError> {
    let index = names.index();
    let mut x = vec![0.0; names.vars.len()];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ProblemError::Input(format!("solution line {}: expected `name value`", n + 1)));
        };
        let j = *index.get(name).ok_or_else(|| ProblemError::Input(format!("unknown variable {name}")))?;
        x[j] = value.parse().map_err(|_| ProblemError::Input(format!("solution line {}: bad value", n + 1)))?;
    }
    Ok(x)
}

/// Writes the nonzero entries of `x` as `name value` lines.
pub fn write_solution(x: &[f64], names: &LpNames) -> String {
    let mut out = String::new();
    for (j, &v) in x.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "{} {v}", names.vars[j]);
        }
    }
    out
}
