use rand::Rng;
use serde::{Deserialize, Serialize};

use super::map::{haldane, GeneticMap, Locus};
use crate::{seeded_rng, Error, Result, SeededRng};

/// F2 genotype at a biallelic locus, coded by the number of B alleles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Genotype {
    AA = 0,
    AB = 1,
    BB = 2,
}

impl Genotype {
    pub fn from_b_count(count: u8) -> Self {
        match count {
            0 => Genotype::AA,
            1 => Genotype::AB,
            _ => Genotype::BB,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Additive code in {0, 1, 2}.
    pub fn additive(self) -> f64 {
        self as u8 as f64
    }

    /// Dominance indicator 1{AB}.
    pub fn dominance(self) -> f64 {
        if self == Genotype::AB {
            1.0
        } else {
            0.0
        }
    }

    /// Single-letter code used by the cross file format.
    pub fn code(self) -> char {
        match self {
            Genotype::AA => 'A',
            Genotype::AB => 'H',
            Genotype::BB => 'B',
        }
    }

    pub fn from_code(code: &str) -> Option<Option<Genotype>> {
        match code.trim() {
            "A" | "AA" => Some(Some(Genotype::AA)),
            "H" | "AB" => Some(Some(Genotype::AB)),
            "B" | "BB" => Some(Some(Genotype::BB)),
            "-" | "NA" | "" => Some(None),
            _ => None,
        }
    }
}

/// Row-major n × M genotype matrix; `None` marks a missing call.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    n: usize,
    m: usize,
    data: Vec<Option<Genotype>>,
}

impl GenotypeMatrix {
    pub fn new(n: usize, m: usize, data: Vec<Option<Genotype>>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::InvalidInput(format!(
                "genotype matrix has {} entries, expected {}",
                data.len(),
                n * m
            )));
        }
        Ok(Self { n, m, data })
    }

    pub fn from_rows(rows: Vec<Vec<Option<Genotype>>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged genotype rows".into()));
        }
        Self::new(n, m, rows.into_iter().flatten().collect())
    }

    pub fn n_individuals(&self) -> usize {
        self.n
    }

    pub fn n_markers(&self) -> usize {
        self.m
    }

    pub fn get(&self, individual: usize, marker: usize) -> Option<Genotype> {
        self.data[individual * self.m + marker]
    }

    pub fn set(&mut self, individual: usize, marker: usize, g: Option<Genotype>) {
        self.data[individual * self.m + marker] = g;
    }

    pub fn row(&self, individual: usize) -> &[Option<Genotype>] {
        &self.data[individual * self.m..(individual + 1) * self.m]
    }

    pub fn column(&self, marker: usize) -> Vec<Option<Genotype>> {
        (0..self.n).map(|i| self.get(i, marker)).collect()
    }

    /// Keep only the listed individuals, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = rows
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        Self {
            n: rows.len(),
            m: self.m,
            data,
        }
    }
}

/// Both gametes of one F2 individual, genome-wide, as B-allele indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Diplotype {
    pub maternal: Vec<u8>,
    pub paternal: Vec<u8>,
}

fn simulate_gamete(map: &GeneticMap, rng: &mut SeededRng, out: &mut Vec<u8>) {
    for chr in map.chromosomes() {
        let mut allele: u8 = rng.random_range(0..2);
        out.push(allele);
        for w in chr.positions.windows(2) {
            if rng.random_bool(haldane(w[1] - w[0])) {
                allele ^= 1;
            }
            out.push(allele);
        }
    }
}

/// Simulate `n` F2 individuals as pairs of independent gametes.
pub fn simulate_f2_haplotypes(map: &GeneticMap, n: usize, seed: u64) -> Result<Vec<Diplotype>> {
    if map.is_empty() || map.n_markers() == 0 {
        return Err(Error::InvalidInput("empty genetic map".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("need at least one individual".into()));
    }
    let mut rng = seeded_rng(seed);
    let m = map.n_markers();
    Ok((0..n)
        .map(|_| {
            let mut maternal = Vec::with_capacity(m);
            let mut paternal = Vec::with_capacity(m);
            simulate_gamete(map, &mut rng, &mut maternal);
            simulate_gamete(map, &mut rng, &mut paternal);
            Diplotype { maternal, paternal }
        })
        .collect())
}

/// Simulate complete F2 marker genotypes under the Haldane model.
pub fn simulate_f2_genotypes(map: &GeneticMap, n: usize, seed: u64) -> Result<GenotypeMatrix> {
    let haps = simulate_f2_haplotypes(map, n, seed)?;
    let m = map.n_markers();
    let data = haps
        .iter()
        .flat_map(|h| {
            h.maternal
                .iter()
                .zip(&h.paternal)
                .map(|(a, b)| Some(Genotype::from_b_count(a + b)))
        })
        .collect();
    GenotypeMatrix::new(n, m, data)
}

/// Observed data of an F2 intercross.
#[derive(Debug, Clone)]
pub struct F2Cross {
    map: GeneticMap,
    genotypes: GenotypeMatrix,
    // Column-major: phenotypes[t][i].
    phenotypes: Vec<Vec<f64>>,
    trait_names: Vec<String>,
}

impl F2Cross {
    /// `phenotypes` is column-major: one vector of length n per trait.
    pub fn new(
        map: GeneticMap,
        genotypes: GenotypeMatrix,
        phenotypes: Vec<Vec<f64>>,
        trait_names: Vec<String>,
    ) -> Result<Self> {
        if genotypes.n_markers() != map.n_markers() {
            return Err(Error::InvalidInput(format!(
                "genotype matrix has {} markers, map has {}",
                genotypes.n_markers(),
                map.n_markers()
            )));
        }
        if phenotypes.len() != trait_names.len() {
            return Err(Error::InvalidInput(
                "trait name count does not match phenotype columns".into(),
            ));
        }
        let n = genotypes.n_individuals();
        for (name, col) in trait_names.iter().zip(&phenotypes) {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "trait {name} has {} values, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "trait {name} has non-finite values"
                )));
            }
        }
        let cross = Self {
            map,
            genotypes,
            phenotypes,
            trait_names,
        };
        let uncovered = cross.rows_missing_a_chromosome();
        if !uncovered.is_empty() {
            log::warn!(
                "{} individuals lack genotypes on at least one chromosome; their genotype probabilities there fall back to the F2 prior",
                uncovered.len()
            );
        }
        Ok(cross)
    }

    pub fn map(&self) -> &GeneticMap {
        &self.map
    }

    pub fn genotypes(&self) -> &GenotypeMatrix {
        &self.genotypes
    }

    pub fn n_individuals(&self) -> usize {
        self.genotypes.n_individuals()
    }

    pub fn n_traits(&self) -> usize {
        self.phenotypes.len()
    }

    pub fn phenotype(&self, t: usize) -> &[f64] {
        &self.phenotypes[t]
    }

    pub fn phenotypes(&self) -> &[Vec<f64>] {
        &self.phenotypes
    }

    pub fn trait_names(&self) -> &[String] {
        &self.trait_names
    }

    pub fn trait_index(&self, name: &str) -> Option<usize> {
        self.trait_names.iter().position(|n| n == name)
    }

    pub fn known_genotypes(&self) -> KnownGenotypes<'_> {
        KnownGenotypes {
            map: &self.map,
            genotypes: &self.genotypes,
        }
    }

    /// Individuals with no genotype call on some chromosome.
    pub fn rows_missing_a_chromosome(&self) -> Vec<usize> {
        let offsets = self.map.offsets();
        (0..self.n_individuals())
            .filter(|&i| {
                let row = self.genotypes.row(i);
                self.map
                    .chromosomes()
                    .iter()
                    .zip(&offsets)
                    .any(|(c, &o)| row[o..o + c.len()].iter().all(Option::is_none))
            })
            .collect()
    }

    /// Same cross with phenotype columns replaced.
    pub fn with_phenotypes(&self, phenotypes: Vec<Vec<f64>>, trait_names: Vec<String>) -> Result<Self> {
        Self::new(
            self.map.clone(),
            self.genotypes.clone(),
            phenotypes,
            trait_names,
        )
    }
}

/// Per-individual genotype design codes (additive, dominance) at a locus.
pub trait GenotypeSource: Sync {
    fn n_individuals(&self) -> usize;

    /// Expected (a, d) codes; exact when genotypes are observed.
    fn expected_codes(&self, locus: &Locus) -> Result<Vec<[f64; 2]>>;

    /// Codes of genotypes drawn from the source's distribution at `locus`.
    fn draw_codes(&self, locus: &Locus, rng: &mut SeededRng) -> Result<Vec<[f64; 2]>> {
        let _ = rng;
        self.expected_codes(locus)
    }
}

/// Observed marker genotypes; loci must coincide with markers.
#[derive(Debug, Clone, Copy)]
pub struct KnownGenotypes<'a> {
    pub map: &'a GeneticMap,
    pub genotypes: &'a GenotypeMatrix,
}

impl GenotypeSource for KnownGenotypes<'_> {
    fn n_individuals(&self) -> usize {
        self.genotypes.n_individuals()
    }

    fn expected_codes(&self, locus: &Locus) -> Result<Vec<[f64; 2]>> {
        let m = self.map.marker_at(locus).ok_or_else(|| {
            Error::InvalidModel(format!(
                "no marker at chromosome {} position {}",
                locus.chromosome, locus.position
            ))
        })?;
        Ok((0..self.genotypes.n_individuals())
            .map(|i| match self.genotypes.get(i, m) {
                Some(g) => [g.additive(), g.dominance()],
                // F2 prior expectation
                None => [1.0, 0.5],
            })
            .collect())
    }
}
