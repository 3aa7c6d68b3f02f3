use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DirectedGraph;
use crate::{Error, Result};

/// Node sets are stored as `u64` bitmasks.
pub const MAX_NODES: usize = 64;

/// A directed acyclic graph over nodes `0..n`. Values are immutable; every
/// edit returns a new graph and is rejected if it would create a cycle.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    n: usize,
    // parents[v] has bit u set iff u -> v.
    parents: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;

    fn try_from(r: DagRepr) -> Result<Self> {
        let edges: Vec<(usize, usize)> = r.edges.iter().map(|e| (e[0], e[1])).collect();
        Dag::new(r.nodes, &edges)
    }
}

impl From<Dag> for DagRepr {
    fn from(d: Dag) -> Self {
        DagRepr {
            nodes: d.n,
            edges: d.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag({}; ", self.n)?;
        let edges: Vec<String> = self
            .edges()
            .iter()
            .map(|(u, v)| format!("{u}->{v}"))
            .collect();
        write!(f, "{})", edges.join(","))
    }
}

/// Kahn ordering of an arbitrary edge list; fails on cycles.
pub fn topological_order_of(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidInput(format!("edge {u}->{v} out of range")));
        }
        indegree[v] += 1;
        children[u].push(v);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &children[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    if order.len() != n {
        return Err(Error::InvalidStructure("graph contains a directed cycle".into()));
    }
    Ok(order)
}

impl Dag {
    pub fn empty(n: usize) -> Result<Self> {
        if n > MAX_NODES {
            return Err(Error::Unsupported(format!(
                "at most {MAX_NODES} nodes supported, got {n}"
            )));
        }
        Ok(Self {
            n,
            parents: vec![0; n],
        })
    }

    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = Self::empty(n)?;
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge {u}->{v} out of range")));
            }
            if u == v {
                return Err(Error::InvalidStructure(format!("self-loop on node {u}")));
            }
            if dag.has_edge(u, v) {
                return Err(Error::InvalidStructure(format!("duplicate edge {u}->{v}")));
            }
            dag.parents[v] |= 1 << u;
        }
        topological_order_of(n, edges)?;
        Ok(dag)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.parents[v] >> u & 1 == 1
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.has_edge(u, v) || self.has_edge(v, u)
    }

    pub fn parent_mask(&self, v: usize) -> u64 {
        self.parents[v]
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        bits(self.parents[v])
    }

    pub fn children(&self, u: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.has_edge(u, v)).collect()
    }

    /// Edges as (tail, head), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..self.n)
            .flat_map(|v| bits(self.parents[v]).into_iter().map(move |u| (u, v)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(|m| m.count_ones() as usize).sum()
    }

    /// Strict descendants of every node, as bitmasks.
    pub fn descendant_masks(&self) -> Vec<u64> {
        let order = self.topological_order();
        let mut desc = vec![0u64; self.n];
        for &u in order.iter().rev() {
            let mut m = 0;
            for v in self.children(u) {
                m |= 1 << v | desc[v];
            }
            desc[u] = m;
        }
        desc
    }

    /// Whether a directed path `from ⇝ to` of length ≥ 1 exists.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = 0u64;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for v in self.children(u) {
                if v == to {
                    return true;
                }
                if seen >> v & 1 == 0 {
                    seen |= 1 << v;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// A topological order; ties broken by node index.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut placed = 0u64;
        let mut order = Vec::with_capacity(self.n);
        while order.len() < self.n {
            let next = (0..self.n)
                .find(|&v| placed >> v & 1 == 0 && self.parents[v] & !placed == 0)
                .expect("Dag invariant: acyclic");
            placed |= 1 << next;
            order.push(next);
        }
        order
    }

    pub fn with_edge(&self, u: usize, v: usize) -> Result<Dag> {
        if u >= self.n || v >= self.n || u == v {
            return Err(Error::InvalidInput(format!("cannot add edge {u}->{v}")));
        }
        if self.is_adjacent(u, v) {
            return Err(Error::InvalidStructure(format!("{u} and {v} already adjacent")));
        }
        if self.reaches(v, u) {
            return Err(Error::InvalidStructure(format!("adding {u}->{v} creates a cycle")));
        }
        let mut d = self.clone();
        d.parents[v] |= 1 << u;
        Ok(d)
    }

    pub fn without_edge(&self, u: usize, v: usize) -> Result<Dag> {
        if u >= self.n || v >= self.n || !self.has_edge(u, v) {
            return Err(Error::InvalidInput(format!("no edge {u}->{v}")));
        }
        let mut d = self.clone();
        d.parents[v] &= !(1 << u);
        Ok(d)
    }

    /// Replace `u -> v` by `v -> u`.
    pub fn with_reversed(&self, u: usize, v: usize) -> Result<Dag> {
        self.without_edge(u, v)?.with_edge(v, u)
    }

    /// Random DAG: each pair of a uniformly random node order gets a forward
    /// edge with probability `edge_prob`.
    pub fn random(n: usize, edge_prob: f64, rng: &mut crate::SeededRng) -> Dag {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut d = Dag::empty(n).expect("node count within limit");
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(edge_prob) {
                    d.parents[order[j]] |= 1 << order[i];
                }
            }
        }
        d
    }

    /// Every DAG on `n` labelled nodes (n ≤ 5).
    pub fn enumerate_all(n: usize) -> Result<Vec<Dag>> {
        if n > 5 {
            return Err(Error::Unsupported(format!(
                "exhaustive DAG enumeration limited to 5 nodes, got {n}"
            )));
        }
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let total = 3usize.pow(pairs.len() as u32);
        let mut out = Vec::new();
        let mut edges = Vec::with_capacity(pairs.len());
        for code in 0..total {
            edges.clear();
            let mut c = code;
            for &(u, v) in &pairs {
                match c % 3 {
                    1 => edges.push((u, v)),
                    2 => edges.push((v, u)),
                    _ => {}
                }
                c /= 3;
            }
            if let Ok(d) = Dag::new(n, &edges) {
                out.push(d);
            }
        }
        Ok(out)
    }
}

impl DirectedGraph for Dag {
    fn node_count(&self) -> usize {
        self.n
    }

    fn parents_of(&self, v: usize) -> Vec<usize> {
        self.parents(v)
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        self.children(v)
    }

    fn has_arc(&self, u: usize, v: usize) -> bool {
        self.has_edge(u, v)
    }
}

pub(crate) fn bits(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        let b = mask.trailing_zeros() as usize;
        out.push(b);
        mask &= mask - 1;
    }
    out
}
