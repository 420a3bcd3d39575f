//! Text file formats.
//!
//! Graph files: optional `#` comment lines, a header `n m`, then `m` lines
//! `u v w` with 1-based vertex ids and positive integer weights. Degree
//! bound files: lines `v beta` (1-based vertex), `-1` meaning unbounded;
//! vertices not listed default to unbounded.

use ecaug_core::{Beta, Weight, WeightedGraph};

#[derive(Debug)]
pub struct FormatError(pub String);

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for FormatError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError(msg.into()))
}

/// Lines with comments stripped and blanks skipped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph, FormatError> {
    let mut lines = data_lines(text);
    let Some((lineno, header)) = lines.next() else {
        return fail("empty graph file");
    };
    let mut it = header.split_whitespace();
    let (n, m) = match (it.next(), it.next(), it.next()) {
        (Some(n), Some(m), None) => {
            let n: usize = n
                .parse()
                .map_err(|_| FormatError(format!("line {lineno}: bad vertex count")))?;
            let m: usize = m
                .parse()
                .map_err(|_| FormatError(format!("line {lineno}: bad edge count")))?;
            (n, m)
        }
        _ => return fail(format!("line {lineno}: header must be 'n m'")),
    };
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let Some((lineno, line)) = lines.next() else {
            return fail(format!("expected {m} edge lines"));
        };
        let mut it = line.split_whitespace();
        let (u, v, w) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(u), Some(v), Some(w), None) => (u, v, w),
            _ => return fail(format!("line {lineno}: edge lines are 'u v w'")),
        };
        let u: usize =
            u.parse().map_err(|_| FormatError(format!("line {lineno}: bad vertex id")))?;
        let v: usize =
            v.parse().map_err(|_| FormatError(format!("line {lineno}: bad vertex id")))?;
        let w: Weight =
            w.parse().map_err(|_| FormatError(format!("line {lineno}: bad weight")))?;
        if u == 0 || v == 0 || u > n || v > n {
            return fail(format!("line {lineno}: vertex ids are 1..={n}"));
        }
        if w == 0 {
            return fail(format!("line {lineno}: weights must be positive"));
        }
        if w > (1 << 20) {
            return fail(format!(
                "line {lineno}: weight {w} above the supported limit 2^20"
            ));
        }
        edges.push(((u - 1) as u32, (v - 1) as u32, w));
    }
    if let Some((lineno, _)) = lines.next() {
        return fail(format!("line {lineno}: trailing content after {m} edges"));
    }
    WeightedGraph::build(n, &edges).map_err(|e| FormatError(e.to_string()))
}

#[allow(dead_code)] // exercised by the round-trip tests
pub fn serialize_graph(g: &WeightedGraph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    for &(u, v, w) in g.edges() {
        out.push_str(&format!("{} {} {}\n", u + 1, v + 1, w));
    }
    out
}

pub fn parse_beta(text: &str, n: usize) -> Result<Vec<Beta>, FormatError> {
    let mut beta = vec![Beta::Unbounded; n];
    let mut seen = vec![false; n];
    for (lineno, line) in data_lines(text) {
        let mut it = line.split_whitespace();
        let (v, b) = match (it.next(), it.next(), it.next()) {
            (Some(v), Some(b), None) => (v, b),
            _ => return fail(format!("line {lineno}: bound lines are 'v beta'")),
        };
        let v: usize =
            v.parse().map_err(|_| FormatError(format!("line {lineno}: bad vertex id")))?;
        if v == 0 || v > n {
            return fail(format!("line {lineno}: vertex ids are 1..={n}"));
        }
        if seen[v - 1] {
            return fail(format!("line {lineno}: vertex {v} listed twice"));
        }
        seen[v - 1] = true;
        beta[v - 1] = if b == "-1" {
            Beta::Unbounded
        } else {
            let b: Weight =
                b.parse().map_err(|_| FormatError(format!("line {lineno}: bad bound")))?;
            Beta::Bounded(b)
        };
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_round_trip() {
        let text = "# fixture\n6 7\n1 2 1\n1 3 1\n2 3 1\n4 5 1\n4 6 1\n5 6 1\n3 4 1\n";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.n(), 6);
        assert_eq!(g.m(), 7);
        let once = serialize_graph(&g);
        let again = serialize_graph(&parse_graph(&once).unwrap());
        assert_eq!(once, again);
    }

    #[test]
    fn graph_rejects_malformed() {
        assert!(parse_graph("").is_err());
        assert!(parse_graph("2 1\n1 3 1\n").is_err()); // id out of range
        assert!(parse_graph("2 1\n1 2 0\n").is_err()); // zero weight
        assert!(parse_graph("2 2\n1 2 1\n").is_err()); // missing edge line
        assert!(parse_graph("2 1\n1 2 1\n1 2 1\n").is_err()); // trailing
    }

    #[test]
    fn beta_parsing() {
        let beta = parse_beta("1 0\n3 -1\n", 3).unwrap();
        assert_eq!(beta[0], Beta::Bounded(0));
        assert_eq!(beta[1], Beta::Unbounded);
        assert_eq!(beta[2], Beta::Unbounded);
        assert!(parse_beta("1 0\n1 2\n", 3).is_err());
        assert!(parse_beta("4 0\n", 3).is_err());
    }
}
