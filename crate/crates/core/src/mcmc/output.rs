use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bma::{EdgePosterior, PairPosterior};
use super::chain::{ChainSettings, PosteriorSample};
use crate::graph::Dag;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFrequency {
    pub dag: Dag,
    pub frequency: f64,
}

/// Serialized posterior summary of one or more chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub traits: Vec<String>,
    pub pairs: Vec<PairPosterior>,
    /// Total retained samples across chains.
    pub samples: usize,
    pub settings: ChainSettings,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub acceptance_rates: Vec<f64>,
    /// Visited structures, most frequent first.
    pub structures: Vec<StructureFrequency>,
}

impl PosteriorDocument {
    pub fn new(traits: Vec<String>, chains: &[PosteriorSample], threshold: f64) -> Result<Self> {
        let ep = super::model_average(chains)?;
        let settings = chains[0].settings;
        Ok(Self {
            generated_at: None,
            traits,
            pairs: ep.pairs,
            samples: chains.iter().map(|c| c.samples.len()).sum(),
            settings,
            seeds: chains.iter().map(|c| c.settings.seed).collect(),
            threshold,
            acceptance_rates: chains.iter().map(|c| c.acceptance_rate).collect(),
            structures: super::structure_frequencies(chains)
                .into_iter()
                .map(|(dag, frequency)| StructureFrequency { dag, frequency })
                .collect(),
        })
    }

    pub fn edge_posterior(&self) -> Result<EdgePosterior> {
        let n = self.traits.len();
        if self.pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidInput(format!(
                "{} pairs listed for {n} traits",
                self.pairs.len()
            )));
        }
        for p in &self.pairs {
            let sum = p.p_uv + p.p_vu + p.p_none;
            if p.u >= p.v || p.v >= n || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!("malformed pair entry ({}, {})", p.u, p.v)));
            }
        }
        Ok(EdgePosterior {
            n_nodes: n,
            pairs: self.pairs.clone(),
        })
    }
}

/// Per-iteration trace: chain, iteration, score, accepted.
pub fn write_trace_csv<W: Write>(chains: &[PosteriorSample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "iteration", "score", "accepted"])?;
    for (k, c) in chains.iter().enumerate() {
        for row in &c.trace {
            w.write_record([
                k.to_string(),
                row.iteration.to_string(),
                row.score.to_string(),
                (row.accepted as u8).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
