use super::bma::EdgePosterior;
use super::score::{ScoreContext, StructurePrior};
use crate::graph::Dag;
use crate::{Error, Result};

pub const MAX_EXACT_NODES: usize = 4;

/// Posterior over every DAG on the traits, by enumeration.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub dags: Vec<Dag>,
    pub log_scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ExactPosterior {
    pub fn probability_of(&self, dag: &Dag) -> f64 {
        self.dags
            .iter()
            .position(|d| d == dag)
            .map_or(0.0, |k| self.probabilities[k])
    }

    pub fn edge_posterior(&self) -> Result<EdgePosterior> {
        let n = self.dags[0].n_nodes();
        EdgePosterior::from_weighted(n, self.dags.iter().zip(self.probabilities.iter().copied()))
    }

    /// Index of the most probable DAG (first on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = k;
            }
        }
        best
    }
}

/// Normalize `exp(score + log prior)` over all DAGs; at most
/// [`MAX_EXACT_NODES`] traits.
pub fn exhaustive_posterior<P: StructurePrior + ?Sized>(ctx: &ScoreContext, prior: &P) -> Result<ExactPosterior> {
    let n = ctx.n_traits();
    if n > MAX_EXACT_NODES {
        return Err(Error::Unsupported(format!(
            "exhaustive enumeration supports at most {MAX_EXACT_NODES} traits, got {n}"
        )));
    }
    let dags = Dag::enumerate_all(n)?;
    let log_scores = dags
        .iter()
        .map(|d| Ok(ctx.dag_score(d)? + prior.log_prior(d)))
        .collect::<Result<Vec<f64>>>()?;
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(ExactPosterior {
        dags,
        log_scores,
        probabilities: weights.iter().map(|w| w / z).collect(),
    })
}
