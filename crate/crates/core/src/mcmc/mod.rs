//! Metropolis–Hastings sampling over phenotype networks with per-node QTL
//! remapping, plus Bayesian model averaging of pairwise relations.
//!
//! A node's QTL architecture is a deterministic function of its parent set,
//! so the chain's state is a DAG alone and each node score can be memoized
//! on (trait, parent set).

mod bma;
mod chain;
mod exact;
mod output;
mod score;

pub use bma::{averaged_network, model_average, AveragedNetwork, EdgePosterior, PairPosterior, Relation, SummaryRule};
pub use chain::{
    log_acceptance, mh_step, run_chain, run_chain_with_prior, run_chains, structure_frequencies, ChainSettings,
    NetworkState, PosteriorSample, SampledNetwork, StepOutcome, TraceRow,
};
pub use exact::{exhaustive_posterior, ExactPosterior, MAX_EXACT_NODES};
pub use output::{write_trace_csv, PosteriorDocument};
pub use score::{score_node, NodeScore, ScoreContext, StructurePrior, UniformPrior};
