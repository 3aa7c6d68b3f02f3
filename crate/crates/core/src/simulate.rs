//! The five-trait benchmark design: a fixed phenotype network with QTLs on
//! four of its nodes, and random effect sizes under two signal presets.
//!
//! Traits (0-based) have arcs 0→1, 0→2, 0→3, 2→3, 1→4, 2→4, 3→4. Traits 0, 1,
//! 3 and 4 each carry one QTL on their own chromosome (chromosome `t + 1`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::genetics::{simulate_f2_genotypes, F2Cross, GeneticMap, Locus};
use crate::graph::Dag;
use crate::hcgr::{HcgrModel, TraitEquation};
use crate::{seeded_rng, Result, SeededRng};

pub const N_TRAITS: usize = 5;
pub const EDGES: [(usize, usize); 7] = [(0, 1), (0, 2), (0, 3), (2, 3), (1, 4), (2, 4), (3, 4)];
/// Traits with a QTL of their own.
pub const QTL_TRAITS: [usize; 4] = [0, 1, 3, 4];
/// Marker index of each QTL within its chromosome.
pub const QTL_MARKER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalStrength {
    Strong,
    Weak,
}

impl SignalStrength {
    fn additive(self, rng: &mut SeededRng) -> f64 {
        match self {
            Self::Strong => rng.random_range(0.5..1.0),
            Self::Weak => rng.random_range(0.0..0.5),
        }
    }

    fn dominance(self, rng: &mut SeededRng) -> f64 {
        match self {
            Self::Strong => rng.random_range(0.0..0.5),
            Self::Weak => rng.random_range(0.0..0.25),
        }
    }

    fn coefficient(self, rng: &mut SeededRng) -> f64 {
        match self {
            Self::Strong => {
                let magnitude = rng.random_range(0.5..1.5);
                if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            }
            Self::Weak => rng.random_range(-0.5..0.5),
        }
    }
}

impl std::str::FromStr for SignalStrength {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strong" => Ok(Self::Strong),
            "weak" => Ok(Self::Weak),
            other => Err(crate::Error::InvalidInput(format!("unknown signal preset {other:?}"))),
        }
    }
}

pub fn trait_names() -> Vec<String> {
    (1..=N_TRAITS).map(|t| format!("Y{t}")).collect()
}

pub fn dag() -> Dag {
    Dag::new(N_TRAITS, &EDGES).expect("benchmark network is acyclic")
}

/// Five chromosomes of 100 cM with ten equally spaced markers each.
pub fn map() -> GeneticMap {
    GeneticMap::uniform(5, 100.0, 10).expect("valid uniform map")
}

/// Locus of trait `t`'s QTL, if it has one.
pub fn qtl_locus(map: &GeneticMap, t: usize) -> Option<Locus> {
    if !QTL_TRAITS.contains(&t) {
        return None;
    }
    map.locus_of(map.offsets()[t] + QTL_MARKER)
}

fn build(map: &GeneticMap, mut effects: impl FnMut(usize) -> (f64, f64), mut beta: impl FnMut() -> f64) -> HcgrModel {
    let g = dag();
    let names = trait_names();
    let traits = (0..N_TRAITS)
        .map(|t| {
            let mut eq = TraitEquation::new(names[t].clone(), 0.0, 1.0);
            if let Some(locus) = qtl_locus(map, t) {
                let (a, d) = effects(t);
                eq = eq.with_qtl(locus, a, d);
            }
            for p in g.parents(t) {
                eq = eq.with_parent(p, beta());
            }
            eq
        })
        .collect();
    HcgrModel::new(traits).expect("benchmark model is valid")
}

/// Random effect sizes drawn from the preset's distributions.
pub fn sample_model(map: &GeneticMap, strength: SignalStrength, rng: &mut SeededRng) -> HcgrModel {
    // Draw QTL effects first, then coefficients, so the stream order is fixed.
    let effects: Vec<(f64, f64)> = (0..N_TRAITS)
        .map(|_| (strength.additive(rng), strength.dominance(rng)))
        .collect();
    build(map, |t| effects[t], || strength.coefficient(rng))
}

/// Strong-preset midpoint: every coefficient 1, additive 0.75, dominance 0.25.
pub fn midpoint_model(map: &GeneticMap) -> HcgrModel {
    build(map, |_| (0.75, 0.25), || 1.0)
}

/// Genotypes and phenotypes for `n` individuals under `model`.
pub fn simulate_cross(model: &HcgrModel, map: &GeneticMap, n: usize, seed: u64) -> Result<F2Cross> {
    let mut rng = seeded_rng(seed);
    let geno_seed: u64 = rng.random();
    let pheno_seed: u64 = rng.random();
    let genotypes = simulate_f2_genotypes(map, n, geno_seed)?;
    let source = crate::genetics::KnownGenotypes {
        map,
        genotypes: &genotypes,
    };
    let phenotypes = model.simulate_phenotypes(&source, &[], pheno_seed)?;
    F2Cross::new(map.clone(), genotypes, phenotypes, model.trait_names())
}

/// One benchmark replicate: sampled parameters plus simulated data.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub model: HcgrModel,
    pub cross: F2Cross,
}

pub fn replicate(strength: SignalStrength, n: usize, seed: u64) -> Result<Replicate> {
    let mut rng = seeded_rng(seed);
    let map = map();
    let model = sample_model(&map, strength, &mut rng);
    let cross = simulate_cross(&model, &map, n, rng.random())?;
    Ok(Replicate { model, cross })
}

/// Random acyclic model on `n_traits` traits: arcs with probability
/// `edge_prob`, signed coefficients of magnitude U[0.3, 1.2], and with
/// probability one half a QTL for trait `t` at marker [`QTL_MARKER`] of
/// chromosome `t mod n_chromosomes` (additive U[0.3, 1], dominance U[0, 0.3]).
pub fn random_model(map: &GeneticMap, n_traits: usize, edge_prob: f64, rng: &mut SeededRng) -> HcgrModel {
    let g = Dag::random(n_traits, edge_prob, rng);
    let n_chr = map.chromosomes().len();
    let traits = (0..n_traits)
        .map(|t| {
            let mut eq = TraitEquation::new(format!("Y{}", t + 1), rng.random_range(-1.0..1.0), 1.0);
            if rng.random_bool(0.5) {
                let c = t % n_chr;
                let marker = QTL_MARKER.min(map.chromosomes()[c].len() - 1);
                let locus = map.locus_of(map.offsets()[c] + marker).expect("marker exists");
                eq = eq.with_qtl(locus, rng.random_range(0.3..1.0), rng.random_range(0.0..0.3));
            }
            for p in g.parents(t) {
                let b = rng.random_range(0.3..1.2);
                eq = eq.with_parent(p, if rng.random_bool(0.5) { b } else { -b });
            }
            eq
        })
        .collect();
    HcgrModel::new(traits).expect("random model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_layout() {
        let m = map();
        assert_eq!(m.n_markers(), 50);
        assert_eq!(dag().n_edges(), 7);
        let l = qtl_locus(&m, 4).unwrap();
        assert_eq!(l.chromosome, "5");
        assert!((l.position - 400.0 / 9.0).abs() < 1e-9);
        assert!(qtl_locus(&m, 2).is_none());
    }

    #[test]
    fn presets_respect_ranges() {
        let m = map();
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let strong = sample_model(&m, SignalStrength::Strong, &mut rng);
            let weak = sample_model(&m, SignalStrength::Weak, &mut rng);
            for eq in strong.traits() {
                for p in &eq.parents {
                    assert!((0.5..1.5).contains(&p.coefficient.abs()));
                }
                for q in &eq.qtls {
                    assert!((0.5..1.0).contains(&q.additive) && (0.0..0.5).contains(&q.dominance));
                }
            }
            for eq in weak.traits() {
                assert!(eq.parents.iter().all(|p| p.coefficient.abs() <= 0.5));
                for q in &eq.qtls {
                    assert!((0.0..0.5).contains(&q.additive) && (0.0..0.25).contains(&q.dominance));
                }
            }
        }
    }

    #[test]
    fn replicates_are_deterministic() {
        let a = replicate(SignalStrength::Strong, 50, 11).unwrap();
        let b = replicate(SignalStrength::Strong, 50, 11).unwrap();
        let c = replicate(SignalStrength::Strong, 50, 12).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.cross.phenotypes(), b.cross.phenotypes());
        assert_ne!(a.cross.phenotypes(), c.cross.phenotypes());
        assert_eq!(a.cross.n_traits(), 5);
    }

    #[test]
    fn midpoint_parameters() {
        let m = midpoint_model(&map());
        assert_eq!(m.coefficient(4, 1), 1.0);
        assert_eq!(m.traits()[0].qtls[0].additive, 0.75);
        assert!(m.traits()[2].qtls.is_empty());
    }
}
