//! Directed acyclic graphs over phenotypes, their QTL-extended versions, and
//! the graph-theoretic queries the sampler and the tests rely on.

mod dag;
pub(crate) use dag::bits;
pub mod dot;
mod dsep;
mod equiv;
mod extended;
mod moves;

pub use dag::{topological_order_of, Dag, MAX_NODES};
pub use dsep::d_separated;
pub use equiv::{equivalence_class, markov_equivalent, skeleton, v_structures, VStructure};
pub use extended::{ExtendedGraph, QtlNode};
pub use moves::{neighborhood, valid_moves, Move};

/// Read access to a directed graph with nodes `0..node_count()`.
pub trait DirectedGraph {
    fn node_count(&self) -> usize;
    fn parents_of(&self, v: usize) -> Vec<usize>;
    fn children_of(&self, v: usize) -> Vec<usize>;

    fn has_arc(&self, u: usize, v: usize) -> bool {
        self.children_of(u).contains(&v)
    }

    fn adjacent(&self, u: usize, v: usize) -> bool {
        self.has_arc(u, v) || self.has_arc(v, u)
    }

    fn arcs(&self) -> Vec<(usize, usize)> {
        (0..self.node_count())
            .flat_map(|u| self.children_of(u).into_iter().map(move |v| (u, v)))
            .collect()
    }
}
