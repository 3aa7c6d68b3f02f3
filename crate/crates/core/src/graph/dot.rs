//! Graphviz DOT rendering.
//!
//! Edge weights in `[0, 1]` map to a grey level and pen width, so heavier
//! posterior support draws a darker, thicker arrow.

use std::fmt::Write as _;

use super::{Dag, DirectedGraph, ExtendedGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn edge_attrs(weight: f64) -> String {
    let w = weight.clamp(0.0, 1.0);
    let grey = (100.0 * (1.0 - w)).round() as u32;
    format!(
        "label=\"{w:.3}\", weight={w:.3}, penwidth={:.2}, color=\"grey{}\"",
        0.5 + 2.5 * w,
        grey.min(100)
    )
}

/// Render phenotype nodes, QTL nodes and weighted arcs.
///
/// `qtls` are `(label, arcs to phenotypes)`; QTL labels typically carry the
/// chromosome and cM position.
pub fn render(
    phenotypes: &[String],
    qtls: &[(String, Vec<usize>)],
    arcs: &[(usize, usize, f64)],
) -> String {
    let mut out = String::from("digraph qtlnet {\n  rankdir=TB;\n  node [shape=ellipse];\n");
    for name in phenotypes {
        let _ = writeln!(out, "  {};", quote(name));
    }
    for (label, targets) in qtls {
        let _ = writeln!(
            out,
            "  {} [shape=box, style=filled, fillcolor=lightgrey];",
            quote(label)
        );
        for &t in targets {
            let _ = writeln!(out, "  {} -> {} [style=dashed];", quote(label), quote(&phenotypes[t]));
        }
    }
    for &(u, v, w) in arcs {
        let _ = writeln!(
            out,
            "  {} -> {} [{}];",
            quote(&phenotypes[u]),
            quote(&phenotypes[v]),
            edge_attrs(w)
        );
    }
    out.push_str("}\n");
    out
}

/// A plain DAG; every arc carries weight 1.
pub fn dag_to_dot(dag: &Dag, names: &[String]) -> String {
    let arcs: Vec<(usize, usize, f64)> = dag.edges().into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    render(names, &[], &arcs)
}

/// Extended graph with QTL nodes labeled by chromosome and position.
pub fn extended_to_dot(g: &ExtendedGraph, names: &[String]) -> String {
    let qtls: Vec<(String, Vec<usize>)> = g
        .qtls()
        .iter()
        .enumerate()
        .map(|(k, q)| (q.label.clone(), g.children_of(g.qtl_node(k))))
        .collect();
    let arcs: Vec<(usize, usize, f64)> = g
        .base()
        .edges()
        .into_iter()
        .map(|(u, v)| (u, v, 1.0))
        .collect();
    render(names, &qtls, &arcs)
}
