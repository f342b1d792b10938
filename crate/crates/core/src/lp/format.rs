use std::fmt::Write;

use super::{LinearProgram, Relation};

fn sanitize(label: &str, idx: usize) -> String {
    let mut s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s = format!("v{idx}_{s}");
    }
    s
}

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    let sign = if coef < 0.0 { "-" } else { "+" };
    let mag = coef.abs();
    if first {
        if coef < 0.0 {
            out.push_str("- ");
        }
    } else {
        let _ = write!(out, " {sign} ");
    }
    if mag != 1.0 {
        let _ = write!(out, "{mag} ");
    }
    out.push_str(name);
}

pub(super) fn write_lp(lp: &LinearProgram) -> String {
    let mut names: Vec<String> = lp.vars.iter().enumerate().map(|(i, v)| sanitize(&v.label, i)).collect();
    // Disambiguate collisions introduced by sanitizing.
    let mut seen = std::collections::HashSet::new();
    for (i, n) in names.iter_mut().enumerate() {
        if !seen.insert(n.clone()) {
            *n = format!("{n}_{i}");
            seen.insert(n.clone());
        }
    }

    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (i, v) in lp.vars.iter().enumerate() {
        if v.cost != 0.0 {
            out.push(' ');
            term(&mut out, first, v.cost, &names[i]);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (r, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " c{r}: ");
        if row.coeffs.is_empty() {
            out.push('0');
        }
        for (k, (v, c)) in row.coeffs.iter().enumerate() {
            term(&mut out, k == 0, *c, &names[v.0]);
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (i, v) in lp.vars.iter().enumerate() {
        let n = &names[i];
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {n} = {}", v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {n} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {n} >= {}", v.lower);
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {}", v.upper);
            }
        }
    }
    out.push_str("End\n");
    out
}
