use serde::{Deserialize, Serialize};

use super::{Dag, DirectedGraph};
use crate::genetics::Locus;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtlNode {
    pub label: String,
    pub locus: Option<Locus>,
}

impl QtlNode {
    pub fn named(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            locus: None,
        }
    }

    pub fn at(locus: Locus) -> Self {
        Self {
            label: format!("{}@{:.1}", locus.chromosome, locus.position),
            locus: Some(locus),
        }
    }
}

/// A phenotype DAG with QTL parent nodes attached.
///
/// Node ids: phenotypes are `0..T`, QTL `k` is node `T + k`. QTL nodes only
/// ever have outgoing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGraph {
    base: Dag,
    qtls: Vec<QtlNode>,
    // (qtl index, phenotype)
    qtl_edges: Vec<(usize, usize)>,
}

impl ExtendedGraph {
    pub fn new(base: Dag, qtls: Vec<QtlNode>, qtl_edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(q, t) in &qtl_edges {
            if q >= qtls.len() || t >= base.n_nodes() {
                return Err(Error::InvalidInput(format!(
                    "QTL edge ({q} -> {t}) out of range"
                )));
            }
        }
        let mut qtl_edges = qtl_edges;
        qtl_edges.sort_unstable();
        qtl_edges.dedup();
        Ok(Self {
            base,
            qtls,
            qtl_edges,
        })
    }

    pub fn base(&self) -> &Dag {
        &self.base
    }

    pub fn qtls(&self) -> &[QtlNode] {
        &self.qtls
    }

    pub fn qtl_edges(&self) -> &[(usize, usize)] {
        &self.qtl_edges
    }

    pub fn n_phenotypes(&self) -> usize {
        self.base.n_nodes()
    }

    /// Node id of QTL `k`.
    pub fn qtl_node(&self, k: usize) -> usize {
        self.base.n_nodes() + k
    }

    pub fn is_qtl(&self, node: usize) -> bool {
        node >= self.base.n_nodes()
    }

    /// Same QTL attachments over a different phenotype DAG.
    pub fn with_base(&self, base: Dag) -> Result<Self> {
        Self::new(base, self.qtls.clone(), self.qtl_edges.clone())
    }
}

impl DirectedGraph for ExtendedGraph {
    fn node_count(&self) -> usize {
        self.base.n_nodes() + self.qtls.len()
    }

    fn parents_of(&self, v: usize) -> Vec<usize> {
        if self.is_qtl(v) {
            return Vec::new();
        }
        let mut p = self.base.parents(v);
        p.extend(
            self.qtl_edges
                .iter()
                .filter(|e| e.1 == v)
                .map(|e| self.qtl_node(e.0)),
        );
        p
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        if self.is_qtl(v) {
            let k = v - self.base.n_nodes();
            return self
                .qtl_edges
                .iter()
                .filter(|e| e.0 == k)
                .map(|e| e.1)
                .collect();
        }
        self.base.children(v)
    }
}
