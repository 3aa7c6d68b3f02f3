use serde::{Deserialize, Serialize};

use super::Dag;
use crate::Result;

/// A single-edge edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    /// Turn the existing edge `u -> v` into `v -> u`.
    Reverse(usize, usize),
}

impl Move {
    pub fn apply(&self, g: &Dag) -> Result<Dag> {
        match *self {
            Move::Add(u, v) => g.with_edge(u, v),
            Move::Delete(u, v) => g.without_edge(u, v),
            Move::Reverse(u, v) => g.with_reversed(u, v),
        }
    }

    /// Nodes whose parent set differs after the move.
    pub fn changed_nodes(&self) -> Vec<usize> {
        match *self {
            Move::Add(_, v) | Move::Delete(_, v) => vec![v],
            Move::Reverse(u, v) => vec![u, v],
        }
    }
}

/// All acyclicity-preserving single-edge moves, in a fixed order: for each
/// edge (sorted) its deletion and, when valid, its reversal; then every
/// valid addition by (tail, head).
pub fn valid_moves(g: &Dag) -> Vec<Move> {
    let n = g.n_nodes();
    let desc = g.descendant_masks();
    let mut moves = Vec::new();
    for (u, v) in g.edges() {
        moves.push(Move::Delete(u, v));
        // v -> u is safe unless u reaches v through another child.
        let other_path = g
            .children(u)
            .into_iter()
            .any(|c| c != v && desc[c] >> v & 1 == 1);
        if !other_path {
            moves.push(Move::Reverse(u, v));
        }
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && !g.is_adjacent(u, v) && desc[v] >> u & 1 == 0 {
                moves.push(Move::Add(u, v));
            }
        }
    }
    moves
}

/// Every graph one valid move away from `g`.
pub fn neighborhood(g: &Dag) -> Vec<(Move, Dag)> {
    valid_moves(g)
        .into_iter()
        .map(|m| {
            let d = m.apply(g).expect("valid_moves yields applicable moves");
            (m, d)
        })
        .collect()
}
