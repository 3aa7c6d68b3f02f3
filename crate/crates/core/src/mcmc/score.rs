use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::graph::{bits, Dag};
use crate::linalg::OrthoBasis;
use crate::mapping::{select_architecture, Architecture, Scanner};
use crate::{Error, Result};

/// Log prior over structures; only differences between structures matter.
pub trait StructurePrior: Sync {
    fn log_prior(&self, dag: &Dag) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl StructurePrior for UniformPrior {
    fn log_prior(&self, _: &Dag) -> f64 {
        0.0
    }
}

/// Architecture and BIC contribution of one node given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScore {
    pub trait_index: usize,
    pub parents: Vec<usize>,
    pub architecture: Architecture,
    pub log_likelihood: f64,
    /// Free parameters: estimable mean coefficients plus the variance.
    pub n_params: usize,
    /// `log_likelihood - n_params / 2 * ln n`.
    pub score: f64,
}

/// Map QTLs for `trait_index` conditional on `parents`, then fit intercept +
/// parents + (a, d) per QTL by least squares and return the node's
/// `-BIC / 2`. Collinear columns are dropped and not counted.
pub fn score_node(scanner: &Scanner, trait_index: usize, parents: &[usize], threshold: f64) -> Result<NodeScore> {
    let architecture = select_architecture(&scanner.scan(trait_index, parents)?, threshold)?;
    let cross = scanner.cross();
    let n = cross.n_individuals();
    let mut basis = OrthoBasis::with_intercept(n);
    for &p in parents {
        basis.push(cross.phenotype(p));
    }
    for q in &architecture.qtls {
        let [a, d] = scanner.design().columns(q.grid_index);
        basis.push(a);
        basis.push(d);
    }
    let rss = basis.rss(cross.phenotype(trait_index));
    if !(rss > 0.0) {
        return Err(Error::Degenerate(format!(
            "trait {trait_index} is fitted exactly by its parents and QTLs"
        )));
    }
    let nf = n as f64;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0);
    let n_params = basis.rank() + 1;
    Ok(NodeScore {
        trait_index,
        parents: parents.to_vec(),
        architecture,
        log_likelihood,
        n_params,
        score: log_likelihood - 0.5 * n_params as f64 * nf.ln(),
    })
}

/// Shared scoring state for one dataset: scanner, threshold and a memo of
/// node scores keyed by (trait, parent mask). Safe to share across chains.
#[derive(Debug)]
pub struct ScoreContext<'a> {
    scanner: Scanner<'a>,
    threshold: f64,
    cache: Mutex<HashMap<(usize, u64), Arc<NodeScore>>>,
}

impl<'a> ScoreContext<'a> {
    pub fn new(scanner: Scanner<'a>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidInput(format!("threshold must be positive, got {threshold}")));
        }
        if scanner.cross().n_traits() > crate::graph::MAX_NODES {
            return Err(Error::Unsupported(format!(
                "at most {} traits supported",
                crate::graph::MAX_NODES
            )));
        }
        Ok(Self {
            scanner,
            threshold,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn scanner(&self) -> &Scanner<'a> {
        &self.scanner
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_traits(&self) -> usize {
        self.scanner.cross().n_traits()
    }

    pub fn n_individuals(&self) -> usize {
        self.scanner.cross().n_individuals()
    }

    /// Score without consulting or filling the memo.
    pub fn compute_node(&self, trait_index: usize, parent_mask: u64) -> Result<NodeScore> {
        score_node(&self.scanner, trait_index, &bits(parent_mask), self.threshold)
    }

    /// Memoized node score. Concurrent misses on the same key may both
    /// compute; the first insert wins and the results are identical.
    pub fn node(&self, trait_index: usize, parent_mask: u64) -> Result<Arc<NodeScore>> {
        let key = (trait_index, parent_mask);
        if let Some(hit) = self.cache.lock().expect("score cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(self.compute_node(trait_index, parent_mask)?);
        let mut cache = self.cache.lock().expect("score cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(fresh)))
    }

    pub fn cached_nodes(&self) -> usize {
        self.cache.lock().expect("score cache poisoned").len()
    }

    /// Node scores of every trait under `dag`.
    pub fn nodes(&self, dag: &Dag) -> Result<Vec<Arc<NodeScore>>> {
        self.check(dag)?;
        (0..dag.n_nodes()).map(|t| self.node(t, dag.parent_mask(t))).collect()
    }

    pub fn dag_score(&self, dag: &Dag) -> Result<f64> {
        Ok(self.nodes(dag)?.iter().map(|s| s.score).sum())
    }

    pub(crate) fn check(&self, dag: &Dag) -> Result<()> {
        if dag.n_nodes() != self.n_traits() {
            return Err(Error::InvalidInput(format!(
                "network has {} nodes, data has {} traits",
                dag.n_nodes(),
                self.n_traits()
            )));
        }
        Ok(())
    }
}
