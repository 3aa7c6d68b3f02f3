use std::collections::BTreeSet;

use super::{Dag, DirectedGraph};
use crate::{Error, Result};

/// A v-structure `i -> m <- j` with `i < j` and `i`, `j` nonadjacent,
/// stored as `(i, m, j)`.
pub type VStructure = (usize, usize, usize);

/// Undirected edges as `(min, max)` pairs.
pub fn skeleton<G: DirectedGraph + ?Sized>(g: &G) -> BTreeSet<(usize, usize)> {
    g.arcs()
        .into_iter()
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect()
}

pub fn v_structures<G: DirectedGraph + ?Sized>(g: &G) -> BTreeSet<VStructure> {
    let mut out = BTreeSet::new();
    for m in 0..g.node_count() {
        let mut pa = g.parents_of(m);
        pa.sort_unstable();
        for (a, &i) in pa.iter().enumerate() {
            for &j in &pa[a + 1..] {
                if !g.adjacent(i, j) {
                    out.insert((i, m, j));
                }
            }
        }
    }
    out
}

/// Same skeleton and same v-structures.
pub fn markov_equivalent<A, B>(g1: &A, g2: &B) -> bool
where
    A: DirectedGraph + ?Sized,
    B: DirectedGraph + ?Sized,
{
    g1.node_count() == g2.node_count()
        && skeleton(g1) == skeleton(g2)
        && v_structures(g1) == v_structures(g2)
}

/// Largest graph for which [`equivalence_class`] enumerates.
pub const MAX_CLASS_NODES: usize = 6;

/// Every DAG Markov equivalent to `g`, by enumerating all orientations of its
/// skeleton. Sorted; includes `g` itself.
pub fn equivalence_class(g: &Dag) -> Result<Vec<Dag>> {
    let n = g.n_nodes();
    if n > MAX_CLASS_NODES {
        return Err(Error::Unsupported(format!(
            "equivalence class enumeration limited to {MAX_CLASS_NODES} nodes, got {n}"
        )));
    }
    let skel: Vec<(usize, usize)> = skeleton(g).into_iter().collect();
    let target = v_structures(g);
    let mut class = Vec::new();
    let mut edges = Vec::with_capacity(skel.len());
    for mask in 0u32..(1 << skel.len()) {
        edges.clear();
        edges.extend(skel.iter().enumerate().map(|(k, &(u, v))| {
            if mask >> k & 1 == 0 {
                (u, v)
            } else {
                (v, u)
            }
        }));
        if let Ok(d) = Dag::new(n, &edges) {
            if v_structures(&d) == target {
                class.push(d);
            }
        }
    }
    class.sort();
    Ok(class)
}
