//! Line-oriented graph text format.
//!
//! ```text
//! cfg <node-count> <edge-count> <entry-id> <exit-id>
//! node <id> <kind>
//! edge <from> <to> [back]
//! ```
//!
//! Nodes print in ascending id order and edges in (from, to) order, so
//! `parse(print(g)) == g` exactly.

use super::{ControlFlowGraph, NodeId, NodeKind};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate node {id}")]
    DuplicateNode { line: usize, id: NodeId },
    #[error("header declares {declared} {what}s, found {found}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("node {id} declared {declared} but header expects {expected}")]
    BoundaryKind {
        id: NodeId,
        declared: &'static str,
        expected: &'static str,
    },
    #[error("graph must have exactly one entry and one exit")]
    BoundaryCount,
    #[error("edge {from} -> {to}: {message}")]
    BadEdge {
        from: NodeId,
        to: NodeId,
        message: String,
    },
    #[error("edge {from} -> {to} back-tag disagrees with depth-first order")]
    BackTagMismatch { from: NodeId, to: NodeId },
}

/// Prints the canonical text form.
pub fn print_graph(graph: &ControlFlowGraph) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "cfg {} {} {} {}",
        graph.node_count(),
        graph.edge_count(),
        graph.entry(),
        graph.exit()
    )
    .expect("write to string");
    for (id, kind) in graph.nodes() {
        writeln!(out, "node {id} {kind}").expect("write to string");
    }
    for (from, to) in graph.edges() {
        if graph.is_back_edge(from, to) {
            writeln!(out, "edge {from} {to} back").expect("write to string");
        } else {
            writeln!(out, "edge {from} {to}").expect("write to string");
        }
    }
    out
}

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_id(token: &str, line: usize) -> Result<NodeId, ParseError> {
    token
        .parse::<u32>()
        .map(NodeId::from_raw)
        .map_err(|_| malformed(line, format!("bad node id `{token}`")))
}

/// Parses the text form. Back-edge tags are verified against the
/// recomputed depth-first classification.
pub fn parse_graph(text: &str) -> Result<ControlFlowGraph, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| malformed(0, "empty input"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "cfg" {
        return Err(malformed(header_line, "expected `cfg <nodes> <edges> <entry> <exit>`"));
    }
    let node_count: usize = tokens[1]
        .parse()
        .map_err(|_| malformed(header_line, "bad node count"))?;
    let edge_count: usize = tokens[2]
        .parse()
        .map_err(|_| malformed(header_line, "bad edge count"))?;
    let entry = parse_id(tokens[3], header_line)?;
    let exit = parse_id(tokens[4], header_line)?;

    let mut nodes: Vec<(NodeId, NodeKind)> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId, bool)> = Vec::new();
    for (lineno, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["node", id, kind] => {
                let id = parse_id(id, lineno)?;
                let kind = match *kind {
                    "entry" => NodeKind::Entry,
                    "exit" => NodeKind::Exit,
                    "statement" => NodeKind::Statement,
                    "branch" => NodeKind::Branch,
                    other => return Err(malformed(lineno, format!("unknown kind `{other}`"))),
                };
                if nodes.iter().any(|&(n, _)| n == id) {
                    return Err(ParseError::DuplicateNode { line: lineno, id });
                }
                nodes.push((id, kind));
            }
            ["edge", from, to] => {
                edges.push((parse_id(from, lineno)?, parse_id(to, lineno)?, false));
            }
            ["edge", from, to, "back"] => {
                edges.push((parse_id(from, lineno)?, parse_id(to, lineno)?, true));
            }
            _ => return Err(malformed(lineno, "expected node or edge line")),
        }
    }

    if nodes.len() != node_count {
        return Err(ParseError::CountMismatch {
            what: "node",
            declared: node_count,
            found: nodes.len(),
        });
    }
    if edges.len() != edge_count {
        return Err(ParseError::CountMismatch {
            what: "edge",
            declared: edge_count,
            found: edges.len(),
        });
    }

    let entries = nodes.iter().filter(|&&(_, k)| k == NodeKind::Entry).count();
    let exits = nodes.iter().filter(|&&(_, k)| k == NodeKind::Exit).count();
    if entries != 1 || exits != 1 {
        return Err(ParseError::BoundaryCount);
    }
    for &(id, kind) in &nodes {
        if (id == entry) != (kind == NodeKind::Entry) {
            return Err(ParseError::BoundaryKind {
                id,
                declared: kind.as_str(),
                expected: "entry",
            });
        }
        if (id == exit) != (kind == NodeKind::Exit) {
            return Err(ParseError::BoundaryKind {
                id,
                declared: kind.as_str(),
                expected: "exit",
            });
        }
    }

    let plain: Vec<(NodeId, NodeId)> = edges.iter().map(|&(f, t, _)| (f, t)).collect();
    let graph = ControlFlowGraph::from_parts(&nodes, &plain, entry, exit).map_err(|e| match e {
        super::GraphEditError::DuplicateEdge { from, to } => ParseError::BadEdge {
            from,
            to,
            message: "duplicate".to_string(),
        },
        super::GraphEditError::UnknownNode(id) => ParseError::BadEdge {
            from: id,
            to: id,
            message: "endpoint not declared".to_string(),
        },
        super::GraphEditError::NoSuchEdge { from, to } => ParseError::BadEdge {
            from,
            to,
            message: "missing".to_string(),
        },
    })?;

    for &(from, to, tagged_back) in &edges {
        if graph.is_back_edge(from, to) != tagged_back {
            return Err(ParseError::BackTagMismatch { from, to });
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn looped() -> ControlFlowGraph {
        let mut g = ControlFlowGraph::new();
        let b1 = g.add_branch();
        let s = g.add_statement();
        let b2 = g.add_branch();
        let alt = g.add_statement();
        g.add_edge(g.entry(), b1).unwrap();
        g.add_edge(b1, s).unwrap();
        g.add_edge(b1, alt).unwrap();
        g.add_edge(alt, g.exit()).unwrap();
        g.add_edge(s, b2).unwrap();
        g.add_edge(b2, g.exit()).unwrap();
        g.add_edge(b2, s).unwrap();
        g
    }

    #[test]
    fn print_then_parse_is_identity() {
        let g = looped();
        let text = print_graph(&g);
        let parsed = parse_graph(&text).unwrap();
        assert_eq!(parsed, g);
        assert_eq!(print_graph(&parsed), text);
    }

    #[test]
    fn header_mismatch_rejected() {
        let g = looped();
        let text = print_graph(&g).replacen("cfg 6", "cfg 7", 1);
        assert!(matches!(
            parse_graph(&text),
            Err(ParseError::CountMismatch { what: "node", .. })
        ));
    }

    #[test]
    fn wrong_back_tag_rejected() {
        let g = looped();
        let text = print_graph(&g).replace(" back", "");
        assert!(matches!(
            parse_graph(&text),
            Err(ParseError::BackTagMismatch { .. })
        ));
    }

    #[test]
    fn unknown_edge_endpoint_rejected() {
        let text = "cfg 2 1 0 1\nnode 0 entry\nnode 1 exit\nedge 0 9\n";
        assert!(matches!(parse_graph(text), Err(ParseError::BadEdge { .. })));
    }

    #[test]
    fn two_entries_rejected() {
        let text = "cfg 3 1 0 1\nnode 0 entry\nnode 1 exit\nnode 2 entry\nedge 0 1\n";
        assert_eq!(parse_graph(text), Err(ParseError::BoundaryCount));
    }
}
