//! Text formats: degree sequences, edge lists, trajectory CSV and rounded JSON.

use crate::degree::DegreeSequence;
use crate::error::{Error, Result};
use crate::graph::Multigraph;
use crate::peel::Trajectory;
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("expected a nonnegative integer, got {tok:?}")))
}

/// Either one degree per line, or a `counts` header followed by `r u_r` lines.
pub fn parse_degree_sequence(text: &str) -> Result<DegreeSequence> {
    let mut lines = content_lines(text).peekable();
    let counts_mode = matches!(lines.peek(), Some((_, l)) if l.eq_ignore_ascii_case("counts"));
    let seq = if counts_mode {
        lines.next();
        let mut counts: Vec<usize> = Vec::new();
        for (ln, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(ln, "expected \"r u_r\""));
            }
            let (r, u) = (parse_usize(ln, toks[0])?, parse_usize(ln, toks[1])?);
            if counts.len() <= r {
                counts.resize(r + 1, 0);
            }
            counts[r] += u;
        }
        DegreeSequence::from_counts(&counts)
    } else {
        let mut degrees = Vec::new();
        for (ln, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 1 {
                return Err(parse_err(ln, "expected one degree per line"));
            }
            degrees.push(parse_usize(ln, toks[0])?);
        }
        DegreeSequence::from_degrees(degrees)
    };
    seq.map_err(|e| match e {
        Error::Domain(msg) => parse_err(0, msg),
        other => other,
    })
}

/// `counts` format.
pub fn write_degree_sequence(seq: &DegreeSequence) -> String {
    let mut out = String::from("counts\n");
    for (r, &u) in seq.counts().iter().enumerate().filter(|(_, u)| **u > 0) {
        let _ = writeln!(out, "{r} {u}");
    }
    out
}

/// `n m` header, then one `u v` pair per line.
pub fn parse_edge_list(text: &str) -> Result<Multigraph> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing \"n m\" header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(parse_err(hl, "expected \"n m\" header"));
    }
    let (n, m) = (parse_usize(hl, toks[0])?, parse_usize(hl, toks[1])?);
    let mut edges = Vec::with_capacity(m);
    let mut last = hl;
    for (ln, l) in lines {
        last = ln;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(ln, "expected \"u v\""));
        }
        let (u, v) = (parse_usize(ln, toks[0])?, parse_usize(ln, toks[1])?);
        if u >= n || v >= n {
            return Err(parse_err(ln, format!("vertex out of range 0..{n}")));
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(parse_err(last, format!("header announces {m} edges, found {}", edges.len())));
    }
    Multigraph::new(n, edges)
}

pub fn write_edge_list(g: &Multigraph) -> String {
    let mut out = String::with_capacity(12 * (g.m() + 1));
    let _ = writeln!(out, "{} {}", g.n, g.m());
    for &(u, v) in &g.edges {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Columns t, L, H, B, then footer rows for τ and the final core.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,L,H,B\n");
    for i in 0..tr.grid.len() {
        let _ = writeln!(out, "{},{},{},{}", tr.grid[i], tr.l[i], tr.h[i], tr.b[i]);
    }
    let _ = writeln!(out, "tau,{}", tr.tau);
    let _ = writeln!(out, "v_core,{}", tr.final_core.v_core);
    let _ = writeln!(out, "e_core,{}", tr.final_core.e_core);
    out
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // Formatting in scientific notation does the decimal rounding exactly.
    format!("{:.*e}", digits - 1, x).parse().unwrap()
}

/// Recursively rounds every non-integer number in `v`.
pub fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = round_sig(num.as_f64().unwrap(), digits);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *num = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(o) => o.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 12 significant digits.
pub fn to_json_12<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    round_json(&mut v, 12);
    serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))
}

/// Console formatting with 6 significant digits.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{:.5e}", x)
    }
}
