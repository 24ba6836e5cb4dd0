//! Reader and writer for the hMETIS / ISPD98 hypergraph text format.
//!
//! ```text
//! % comment
//! |E| |V| [fmt]
//! <one line per hyperedge: [weight] 1-based vertex ids...>
//! <|V| lines of vertex weights when fmt is 10 or 11>
//! ```
//!
//! `fmt` 1 and 11 prefix each hyperedge line with an integer weight, which
//! maps onto edge multiplicity. `fmt` 10 and 11 append vertex weights.
//! Vertex ids are converted to 0-based on read and back on write.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, Hypergraph, Weight};

/// Parses a benchmark hypergraph. Duplicate hyperedges are kept as separate
/// edges so that `|E|` matches the header.
pub fn parse_benchmark_hypergraph<R: BufRead>(reader: R) -> Result<Hypergraph> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| match l {
            Ok(s) => {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('%')
            }
            Err(_) => true,
        });

    let (hline, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(Error::parse(1, "missing header")),
    };
    let fields = parse_ints(hline, &header)?;
    let (num_edges, num_vertices, fmt) = match fields.as_slice() {
        [e, v] => (*e, *v, 0),
        [e, v, f] => (*e, *v, *f),
        _ => return Err(Error::parse(hline, "header must be `|E| |V| [fmt]`")),
    };
    let (edge_weights, vertex_weights) = match fmt {
        0 => (false, false),
        1 => (true, false),
        10 => (false, true),
        11 => (true, true),
        f => return Err(Error::parse(hline, format!("unsupported fmt {f}"))),
    };
    let num_edges = num_edges as usize;
    let num_vertices = num_vertices as usize;

    let mut edges = Vec::with_capacity(num_edges);
    for k in 0..num_edges {
        let (n, line) = match lines.next() {
            Some((n, l)) => (n, l?),
            None => {
                return Err(Error::parse(
                    hline,
                    format!("header declares {num_edges} hyperedges, found {k}"),
                ))
            }
        };
        let mut vals = parse_ints(n, &line)?.into_iter();
        let multiplicity = if edge_weights {
            match vals.next() {
                Some(0) | None => return Err(Error::parse(n, "hyperedge weight must be >= 1")),
                Some(w) => w,
            }
        } else {
            1
        };
        let mut items = Vec::new();
        for v in vals {
            if v == 0 || v as usize > num_vertices {
                return Err(Error::parse(
                    n,
                    format!("vertex {v} out of range 1..={num_vertices}"),
                ));
            }
            items.push(v as usize - 1);
        }
        if items.is_empty() {
            return Err(Error::parse(n, "hyperedge has no vertices"));
        }
        edges.push(Hyperedge::new(items, multiplicity)?);
    }

    let mut weights = vec![1; num_vertices];
    if vertex_weights {
        for (k, w) in weights.iter_mut().enumerate() {
            let (n, line) = match lines.next() {
                Some((n, l)) => (n, l?),
                None => {
                    return Err(Error::parse(
                        hline,
                        format!("header declares {num_vertices} vertex weights, found {k}"),
                    ))
                }
            };
            match parse_ints(n, &line)?.as_slice() {
                [x] if *x > 0 => *w = *x,
                _ => return Err(Error::parse(n, "expected one positive vertex weight")),
            }
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::parse(n, "trailing data after declared body"));
    }
    Hypergraph::from_edges(weights, edges)
}

/// Writes `h` in the benchmark format. Edge weights are emitted only when
/// some multiplicity exceeds one, vertex weights only when some weight does.
pub fn write_benchmark_hypergraph<W: Write>(h: &Hypergraph, mut w: W) -> Result<()> {
    let edge_weights = h.edges().iter().any(|e| e.multiplicity() > 1);
    let vertex_weights = !h.has_unit_weights();
    let fmt = match (edge_weights, vertex_weights) {
        (false, false) => None,
        (true, false) => Some(1),
        (false, true) => Some(10),
        (true, true) => Some(11),
    };
    match fmt {
        Some(f) => writeln!(w, "{} {} {f}", h.num_edges(), h.num_items())?,
        None => writeln!(w, "{} {}", h.num_edges(), h.num_items())?,
    }
    for e in h.edges() {
        let mut line = String::new();
        if edge_weights {
            line.push_str(&e.multiplicity().to_string());
        }
        for &v in e.items() {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&(v + 1).to_string());
        }
        writeln!(w, "{line}")?;
    }
    if vertex_weights {
        for &x in h.weights() {
            writeln!(w, "{x}")?;
        }
    }
    Ok(())
}

/// One positive integer weight per line; `%` comments allowed.
pub fn parse_weights<R: BufRead>(reader: R) -> Result<Vec<Weight>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        match t.parse::<Weight>() {
            Ok(x) if x > 0 => out.push(x),
            _ => return Err(Error::parse(i + 1, format!("bad weight `{t}`"))),
        }
    }
    Ok(out)
}

pub fn write_weights<W: Write>(weights: &[Weight], mut w: W) -> Result<()> {
    for x in weights {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

fn parse_ints(line_no: usize, line: &str) -> Result<Vec<u64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u64>()
                .map_err(|_| Error::parse(line_no, format!("non-numeric token `{tok}`")))
        })
        .collect()
}
