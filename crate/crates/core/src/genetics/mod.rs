//! Genetic maps, F2 intercross data and the recombination model p(q | m).

mod cross;
mod genoprob;
pub mod io;
mod map;

pub use cross::{
    simulate_f2_genotypes, simulate_f2_haplotypes, Diplotype, F2Cross, Genotype, GenotypeMatrix,
    GenotypeSource, KnownGenotypes,
};
pub use genoprob::{calc_genoprob, GenoProbTable, GridChromosome};
pub use map::{haldane, Chromosome, GeneticMap, Locus};

/// Default pseudomarker spacing in cM.
pub const DEFAULT_STEP: f64 = 2.0;

/// Prior genotype distribution of an F2 intercross over (AA, AB, BB).
pub const F2_PRIOR: [f64; 3] = [0.25, 0.5, 0.25];
