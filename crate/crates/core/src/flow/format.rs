//! Text formats for flow instances.
//!
//! DIMACS minimum cost flow (`p min`, 1-based node ids):
//!
//! ```text
//! c three nodes
//! p min 3 3
//! n 1 2
//! n 3 -2
//! a 1 2 0 2 1
//! a 2 3 0 1 1
//! a 1 3 0 1 3
//! ```
//!
//! The single positive-supply node is the source and the single demand node
//! the sink; supply magnitudes are ignored since the solver computes a
//! maximum flow.
//!
//! Edge list (0-based): a header `nodes arcs source sink` followed by one
//! `from to capacity cost` line per arc. `#` starts a comment line.

use std::fmt::Write;

use super::{Arc, FlowInstance};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ParseError { line, msg: msg.into() }
}

fn fields<'a>(line: usize, rest: &'a str, want: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = rest.split_whitespace().collect();
    if f.len() != want {
        return Err(parse_err(line, format!("expected {want} fields, found {}", f.len())));
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("bad number {s:?}")))
}

/// Parses a DIMACS `p min` file.
pub fn parse_dimacs_min(text: &str) -> Result<FlowInstance> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut arcs = Vec::new();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('c') {
            continue;
        }
        let tag = l.chars().next().unwrap_or(' ');
        let rest = &l[tag.len_utf8()..];
        match tag {
            'p' => {
                if header.is_some() {
                    return Err(parse_err(line, "second problem line"));
                }
                let f = fields(line, rest, 3)?;
                if f[0] != "min" {
                    return Err(parse_err(line, format!("problem type {:?}, expected \"min\"", f[0])));
                }
                header = Some((num(line, f[1])?, num(line, f[2])?, line));
            }
            'n' => {
                let (nodes, _, _) = header.ok_or_else(|| parse_err(line, "node line before problem line"))?;
                let f = fields(line, rest, 2)?;
                let id: usize = num(line, f[0])?;
                let supply: i64 = num(line, f[1])?;
                if id == 0 || id > nodes {
                    return Err(parse_err(line, format!("node {id} outside 1..={nodes}")));
                }
                match supply.signum() {
                    1 => sources.push(id - 1),
                    -1 => sinks.push(id - 1),
                    _ => {}
                }
            }
            'a' => {
                let (nodes, _, _) = header.ok_or_else(|| parse_err(line, "arc line before problem line"))?;
                let f = fields(line, rest, 5)?;
                let from: usize = num(line, f[0])?;
                let to: usize = num(line, f[1])?;
                let low: u64 = num(line, f[2])?;
                let cap: u64 = num(line, f[3])?;
                let cost: u64 = num(line, f[4])?;
                for id in [from, to] {
                    if id == 0 || id > nodes {
                        return Err(parse_err(line, format!("node {id} outside 1..={nodes}")));
                    }
                }
                if low != 0 {
                    return Err(Error::UnsupportedFeature(format!("line {line}: nonzero lower bound {low}")));
                }
                arcs.push(Arc { from: from - 1, to: to - 1, cap, cost });
            }
            other => return Err(parse_err(line, format!("unknown line type {other:?}"))),
        }
    }
    let (nodes, count, hline) = header.ok_or_else(|| parse_err(text.lines().count().max(1), "missing problem line"))?;
    if arcs.len() != count {
        return Err(parse_err(hline, format!("problem line announces {count} arcs, found {}", arcs.len())));
    }
    if sources.len() > 1 || sinks.len() > 1 {
        return Err(Error::UnsupportedFeature(format!(
            "{} supply and {} demand nodes; exactly one of each is supported",
            sources.len(),
            sinks.len()
        )));
    }
    let (Some(&s), Some(&t)) = (sources.first(), sinks.first()) else {
        return Err(parse_err(hline, "need one supply node and one demand node"));
    };
    FlowInstance::new(nodes, arcs, s, t)
}

/// Writes `inst` as DIMACS `p min`; the source supplies its total outgoing
/// capacity.
pub fn write_dimacs_min(inst: &FlowInstance) -> String {
    let supply: u64 = inst.arcs.iter().filter(|a| a.from == inst.source).map(|a| a.cap).sum();
    let mut out = String::new();
    let _ = writeln!(out, "p min {} {}", inst.nodes, inst.arcs.len());
    let _ = writeln!(out, "n {} {}", inst.source + 1, supply.max(1));
    let _ = writeln!(out, "n {} -{}", inst.sink + 1, supply.max(1));
    for a in &inst.arcs {
        let _ = writeln!(out, "a {} {} 0 {} {}", a.from + 1, a.to + 1, a.cap, a.cost);
    }
    out
}

/// Parses the edge-list format.
pub fn parse_edge_list(text: &str) -> Result<FlowInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, h) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let f = fields(hline, h, 4)?;
    let (nodes, count, s, t): (usize, usize, usize, usize) =
        (num(hline, f[0])?, num(hline, f[1])?, num(hline, f[2])?, num(hline, f[3])?);
    let mut arcs = Vec::with_capacity(count);
    for (line, l) in lines {
        let f = fields(line, l, 4)?;
        arcs.push(Arc { from: num(line, f[0])?, to: num(line, f[1])?, cap: num(line, f[2])?, cost: num(line, f[3])? });
    }
    if arcs.len() != count {
        return Err(parse_err(hline, format!("header announces {count} arcs, found {}", arcs.len())));
    }
    FlowInstance::new(nodes, arcs, s, t)
}

pub fn write_edge_list(inst: &FlowInstance) -> String {
    let mut out = format!("{} {} {} {}\n", inst.nodes, inst.arcs.len(), inst.source, inst.sink);
    for a in &inst.arcs {
        let _ = writeln!(out, "{} {} {} {}", a.from, a.to, a.cap, a.cost);
    }
    out
}

/// DIMACS when the first meaningful line is a `p` or `c` line, edge list
/// otherwise.
pub fn parse_instance(text: &str) -> Result<FlowInstance> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.starts_with('p') || l.starts_with('c') => parse_dimacs_min(text),
        _ => parse_edge_list(text),
    }
}
