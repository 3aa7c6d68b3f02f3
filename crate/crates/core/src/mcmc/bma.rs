use log::warn;
use serde::{Deserialize, Serialize};

use super::chain::PosteriorSample;
use crate::graph::{dot, topological_order_of, Dag};
use crate::{Error, Result};

/// Posterior of the three relations between traits `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPosterior {
    pub u: usize,
    pub v: usize,
    /// u → v
    pub p_uv: f64,
    /// v → u
    pub p_vu: f64,
    pub p_none: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Forward,
    Backward,
    None,
}

impl PairPosterior {
    pub fn probability(&self, r: Relation) -> f64 {
        match r {
            Relation::Forward => self.p_uv,
            Relation::Backward => self.p_vu,
            Relation::None => self.p_none,
        }
    }

    /// Most probable relation; ties resolve in the order →, ←, none.
    pub fn argmax(&self) -> Relation {
        let mut best = Relation::Forward;
        for r in [Relation::Backward, Relation::None] {
            if self.probability(r) > self.probability(best) {
                best = r;
            }
        }
        best
    }

    pub fn total_variation(&self, other: &PairPosterior) -> f64 {
        0.5 * ((self.p_uv - other.p_uv).abs() + (self.p_vu - other.p_vu).abs() + (self.p_none - other.p_none).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePosterior {
    pub n_nodes: usize,
    /// Every pair `u < v`, in lexicographic order.
    pub pairs: Vec<PairPosterior>,
}

impl EdgePosterior {
    /// Average the edge indicators of `dags` with the given weights.
    pub fn from_weighted<'d>(n_nodes: usize, dags: impl IntoIterator<Item = (&'d Dag, f64)>) -> Result<Self> {
        let mut pairs: Vec<PairPosterior> = (0..n_nodes)
            .flat_map(|u| (u + 1..n_nodes).map(move |v| (u, v)))
            .map(|(u, v)| PairPosterior {
                u,
                v,
                p_uv: 0.0,
                p_vu: 0.0,
                p_none: 0.0,
            })
            .collect();
        let mut total = 0.0;
        for (dag, w) in dags {
            if dag.n_nodes() != n_nodes {
                return Err(Error::InvalidInput("samples disagree on the number of traits".into()));
            }
            total += w;
            for p in pairs.iter_mut() {
                if dag.has_edge(p.u, p.v) {
                    p.p_uv += w;
                } else if dag.has_edge(p.v, p.u) {
                    p.p_vu += w;
                } else {
                    p.p_none += w;
                }
            }
        }
        if !(total > 0.0) {
            return Err(Error::InvalidInput("no samples to average".into()));
        }
        for p in pairs.iter_mut() {
            p.p_uv /= total;
            p.p_vu /= total;
            p.p_none /= total;
        }
        Ok(Self { n_nodes, pairs })
    }

    /// Posterior oriented as `u` versus `v` (either order).
    pub fn pair(&self, u: usize, v: usize) -> Option<PairPosterior> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let p = *self.pairs.iter().find(|p| p.u == a && p.v == b)?;
        Some(if u < v {
            p
        } else {
            PairPosterior {
                u,
                v,
                p_uv: p.p_vu,
                p_vu: p.p_uv,
                p_none: p.p_none,
            }
        })
    }

    /// Largest per-pair total variation distance.
    pub fn max_total_variation(&self, other: &EdgePosterior) -> f64 {
        self.pairs
            .iter()
            .zip(&other.pairs)
            .map(|(a, b)| a.total_variation(b))
            .fold(0.0, f64::max)
    }
}

/// Relation frequencies pooled over all chains' retained samples.
pub fn model_average(chains: &[PosteriorSample]) -> Result<EdgePosterior> {
    let n = chains
        .iter()
        .flat_map(|c| c.samples.first())
        .map(|s| s.dag.n_nodes())
        .next()
        .ok_or_else(|| Error::InvalidInput("empty posterior sample".into()))?;
    EdgePosterior::from_weighted(n, chains.iter().flat_map(|c| &c.samples).map(|s| (&s.dag, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum SummaryRule {
    Max,
    Threshold { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedArc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedNetwork {
    pub n_nodes: usize,
    pub arcs: Vec<WeightedArc>,
    /// Pairs where no relation reached the threshold.
    pub unresolved: Vec<(usize, usize)>,
    pub cyclic: bool,
}

impl AveragedNetwork {
    /// The arcs as a DAG, unless they form a cycle.
    pub fn to_dag(&self) -> Option<Dag> {
        let edges: Vec<(usize, usize)> = self.arcs.iter().map(|a| (a.from, a.to)).collect();
        Dag::new(self.n_nodes, &edges).ok()
    }

    /// DOT output; arrow darkness follows the posterior probability.
    pub fn to_dot(&self, names: &[String]) -> String {
        let arcs: Vec<(usize, usize, f64)> = self.arcs.iter().map(|a| (a.from, a.to, a.weight)).collect();
        dot::render(names, &[], &arcs)
    }
}

/// Pick one relation per pair. The result may be cyclic; that is flagged and
/// logged, not an error.
pub fn averaged_network(ep: &EdgePosterior, rule: SummaryRule) -> Result<AveragedNetwork> {
    if let SummaryRule::Threshold { tau } = rule {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidInput(format!("tau must lie in (0, 1], got {tau}")));
        }
    }
    let mut arcs = Vec::new();
    let mut unresolved = Vec::new();
    for p in &ep.pairs {
        let best = p.argmax();
        let chosen = match rule {
            SummaryRule::Max => Some(best),
            SummaryRule::Threshold { tau } => (p.probability(best) >= tau).then_some(best),
        };
        match chosen {
            Some(Relation::Forward) => arcs.push(WeightedArc {
                from: p.u,
                to: p.v,
                weight: p.p_uv,
            }),
            Some(Relation::Backward) => arcs.push(WeightedArc {
                from: p.v,
                to: p.u,
                weight: p.p_vu,
            }),
            Some(Relation::None) => {}
            None => unresolved.push((p.u, p.v)),
        }
    }
    arcs.sort_by_key(|a| (a.from, a.to));
    let edges: Vec<(usize, usize)> = arcs.iter().map(|a| (a.from, a.to)).collect();
    let cyclic = topological_order_of(ep.n_nodes, &edges).is_err();
    if cyclic {
        warn!("averaged network contains a directed cycle");
    }
    if !unresolved.is_empty() {
        warn!("{} pairs left unresolved by the threshold rule", unresolved.len());
    }
    Ok(AveragedNetwork {
        n_nodes: ep.n_nodes,
        arcs,
        unresolved,
        cyclic,
    })
}
