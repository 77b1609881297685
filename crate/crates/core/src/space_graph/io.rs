//! Line-oriented text format for graphs and subdomains.
//!
//! ```text
//! graph <n_vertices> <n_edges>
//! v <id> <mu>
//! e <id1> <id2> <length> <weight>
//! interior <id> ...
//! boundary <id> ...
//! ```
//!
//! Floats are written with 17 significant digits, so reading back a written
//! graph reproduces it bit for bit. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use super::{Edge, GraphSpace, Subdomain, VertexSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedGraph {
    pub graph: GraphSpace,
    pub interior: Option<VertexSet>,
    pub boundary: Option<VertexSet>,
}

impl ParsedGraph {
    /// Subdomain described by the file; the boundary defaults to the neighbors of the interior.
    pub fn subdomain(self) -> Result<Option<Subdomain>> {
        let graph = Arc::new(self.graph);
        match (self.interior, self.boundary) {
            (Some(i), Some(b)) => Subdomain::new(graph, i, b, false).map(Some),
            (Some(i), None) => Subdomain::from_interior(graph, i).map(Some),
            (None, Some(_)) => Err(Error::InvalidSubdomain(
                "boundary given without interior".into(),
            )),
            (None, None) => Ok(None),
        }
    }
}

pub fn write_graph(graph: &GraphSpace, domain: Option<&Subdomain>) -> String {
    let mut out = String::new();
    writeln!(out, "graph {} {}", graph.vertex_count(), graph.edge_count()).unwrap();
    for (v, m) in graph.measures().iter().enumerate() {
        writeln!(out, "v {v} {m:.16e}").unwrap();
    }
    for e in graph.edges() {
        writeln!(out, "e {} {} {:.16e} {:.16e}", e.a, e.b, e.length, e.weight).unwrap();
    }
    if let Some(d) = domain {
        for (tag, set) in [("interior", d.interior()), ("boundary", d.boundary())] {
            out.push_str(tag);
            for v in set.iter() {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_graph(text: &str) -> Result<ParsedGraph> {
    let mut header: Option<(usize, usize)> = None;
    let mut measure: Vec<Option<f64>> = Vec::new();
    let mut edges = Vec::new();
    let mut interior = None;
    let mut boundary = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if tag != "graph" && header.is_none() {
            return Err(perr("expected `graph` header first".into()));
        }
        match tag {
            "graph" => {
                if header.is_some() || rest.len() != 2 {
                    return Err(perr("malformed header".into()));
                }
                let n: usize = field(&rest, 0, line_no)?;
                let m: usize = field(&rest, 1, line_no)?;
                header = Some((n, m));
                measure = vec![None; n];
            }
            "v" => {
                if rest.len() != 2 {
                    return Err(perr("vertex line needs `v <id> <mu>`".into()));
                }
                let id: usize = field(&rest, 0, line_no)?;
                let mu: f64 = field(&rest, 1, line_no)?;
                let slot = measure
                    .get_mut(id)
                    .ok_or_else(|| perr(format!("vertex id {id} out of range")))?;
                if slot.replace(mu).is_some() {
                    return Err(perr(format!("vertex {id} defined twice")));
                }
            }
            "e" => {
                if rest.len() != 4 {
                    return Err(perr("edge line needs `e <a> <b> <length> <weight>`".into()));
                }
                edges.push(Edge::new(
                    field(&rest, 0, line_no)?,
                    field(&rest, 1, line_no)?,
                    field(&rest, 2, line_no)?,
                    field(&rest, 3, line_no)?,
                ));
            }
            "interior" | "boundary" => {
                let ids = rest
                    .iter()
                    .enumerate()
                    .map(|(k, _)| field::<usize>(&rest, k, line_no))
                    .collect::<Result<VertexSet>>()?;
                let slot = if tag == "interior" {
                    &mut interior
                } else {
                    &mut boundary
                };
                if slot.replace(ids).is_some() {
                    return Err(perr(format!("`{tag}` given twice")));
                }
            }
            other => return Err(perr(format!("unknown record `{other}`"))),
        }
    }

    let (n, m) = header.ok_or(Error::Parse {
        line: 0,
        message: "missing `graph` header".into(),
    })?;
    if edges.len() != m {
        return Err(Error::Parse {
            line: 0,
            message: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    let measure = measure
        .into_iter()
        .enumerate()
        .map(|(v, mu)| {
            mu.ok_or(Error::Parse {
                line: 0,
                message: format!("vertex {v} of {n} is missing"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ParsedGraph {
        graph: GraphSpace::new(measure, edges)?,
        interior,
        boundary,
    })
}

fn field<T: FromStr>(tokens: &[&str], k: usize, line: usize) -> Result<T> {
    tokens[k].parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{}`", tokens[k]),
    })
}
