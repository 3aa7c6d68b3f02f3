use std::collections::HashMap;
use std::sync::Arc;

use log::info;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::score::{NodeScore, ScoreContext, StructurePrior, UniformPrior};
use crate::graph::{valid_moves, Dag, Move};
use crate::{par, seeded_rng, Error, Result, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub iterations: usize,
    /// Record the state every `thin` iterations.
    pub thin: usize,
    /// Number of recorded states discarded from the start.
    pub burnin: usize,
    pub seed: u64,
}

impl ChainSettings {
    pub fn new(iterations: usize, thin: usize, burnin: usize, seed: u64) -> Result<Self> {
        let s = Self {
            iterations,
            thin,
            burnin,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.iterations < self.thin {
            return Err(Error::InvalidInput(format!(
                "need iterations >= thin >= 1 (iterations {}, thin {})",
                self.iterations, self.thin
            )));
        }
        if self.burnin >= self.iterations / self.thin {
            return Err(Error::InvalidInput(format!(
                "burn-in of {} records leaves no samples out of {}",
                self.burnin,
                self.iterations / self.thin
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.iterations / self.thin - self.burnin
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Current DAG with the memoized score of every node.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub dag: Dag,
    pub nodes: Vec<Arc<NodeScore>>,
    pub total: f64,
}

impl NetworkState {
    pub fn new(ctx: &ScoreContext, dag: Dag) -> Result<Self> {
        let nodes = ctx.nodes(&dag)?;
        let total = nodes.iter().map(|s| s.score).sum();
        Ok(Self { dag, nodes, total })
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: NetworkState,
    pub proposal: Option<Move>,
    pub accepted: bool,
}

/// Log Metropolis–Hastings ratio for a uniform draw from the valid moves.
pub fn log_acceptance(delta_score: f64, delta_log_prior: f64, n_moves_from: usize, n_moves_to: usize) -> f64 {
    delta_score + delta_log_prior + (n_moves_from as f64).ln() - (n_moves_to as f64).ln()
}

/// One Metropolis–Hastings step. Only the nodes whose parent sets change
/// are rescored.
pub fn mh_step<P: StructurePrior + ?Sized>(
    ctx: &ScoreContext,
    prior: &P,
    state: NetworkState,
    rng: &mut SeededRng,
) -> Result<StepOutcome> {
    let moves = valid_moves(&state.dag);
    if moves.is_empty() {
        return Ok(StepOutcome {
            state,
            proposal: None,
            accepted: false,
        });
    }
    let m = moves[rng.random_range(0..moves.len())];
    let proposed = m.apply(&state.dag)?;
    let mut nodes = state.nodes.clone();
    for t in m.changed_nodes() {
        nodes[t] = ctx.node(t, proposed.parent_mask(t))?;
    }
    let total: f64 = nodes.iter().map(|s| s.score).sum();
    let log_alpha = log_acceptance(
        total - state.total,
        prior.log_prior(&proposed) - prior.log_prior(&state.dag),
        moves.len(),
        valid_moves(&proposed).len(),
    );
    let u: f64 = rng.random();
    if u.ln() < log_alpha {
        Ok(StepOutcome {
            state: NetworkState {
                dag: proposed,
                nodes,
                total,
            },
            proposal: Some(m),
            accepted: true,
        })
    } else {
        Ok(StepOutcome {
            state,
            proposal: Some(m),
            accepted: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledNetwork {
    pub dag: Dag,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub score: f64,
    pub accepted: bool,
}

/// Output of one chain: retained samples plus diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub settings: ChainSettings,
    pub samples: Vec<SampledNetwork>,
    pub acceptance_rate: f64,
    pub trace: Vec<TraceRow>,
}

pub fn run_chain(ctx: &ScoreContext, settings: ChainSettings, initial: &Dag) -> Result<PosteriorSample> {
    run_chain_with_prior(ctx, &UniformPrior, settings, initial)
}

pub fn run_chain_with_prior<P: StructurePrior + ?Sized>(
    ctx: &ScoreContext,
    prior: &P,
    settings: ChainSettings,
    initial: &Dag,
) -> Result<PosteriorSample> {
    settings.validate()?;
    let mut rng = seeded_rng(settings.seed);
    let mut state = NetworkState::new(ctx, initial.clone())?;
    let mut samples = Vec::with_capacity(settings.iterations / settings.thin);
    let mut trace = Vec::with_capacity(settings.iterations);
    let mut accepted = 0usize;
    for iteration in 1..=settings.iterations {
        let step = mh_step(ctx, prior, state, &mut rng)?;
        state = step.state;
        accepted += step.accepted as usize;
        trace.push(TraceRow {
            iteration,
            score: state.total,
            accepted: step.accepted,
        });
        if iteration % settings.thin == 0 {
            samples.push(SampledNetwork {
                dag: state.dag.clone(),
                score: state.total,
            });
        }
    }
    samples.drain(..settings.burnin);
    let acceptance_rate = accepted as f64 / settings.iterations as f64;
    info!(
        "chain seed {}: {} samples, acceptance rate {:.3}",
        settings.seed,
        samples.len(),
        acceptance_rate
    );
    Ok(PosteriorSample {
        settings,
        samples,
        acceptance_rate,
        trace,
    })
}

/// Independent chains, one per seed, run concurrently over a shared score
/// memo. Output order follows `seeds`.
pub fn run_chains(
    ctx: &ScoreContext,
    settings: ChainSettings,
    seeds: &[u64],
    initial: &Dag,
) -> Result<Vec<PosteriorSample>> {
    par::map_slice(seeds, |&seed| run_chain(ctx, settings.with_seed(seed), initial))
        .into_iter()
        .collect()
}

/// Visited structures with their pooled sample frequencies, most frequent
/// first (ties in DAG order).
pub fn structure_frequencies(chains: &[PosteriorSample]) -> Vec<(Dag, f64)> {
    let mut counts: HashMap<&Dag, usize> = HashMap::new();
    let mut total = 0usize;
    for s in chains.iter().flat_map(|c| &c.samples) {
        *counts.entry(&s.dag).or_default() += 1;
        total += 1;
    }
    let mut out: Vec<(Dag, f64)> = counts
        .into_iter()
        .map(|(d, c)| (d.clone(), c as f64 / total as f64))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}
