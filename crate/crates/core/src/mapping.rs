//! Haley–Knott genome scans, conditional LOD scores and per-trait QTL
//! architecture selection.
//!
//! A conditional scan of trait `y` given traits `X` compares, at every grid
//! position, the regression of `y` on intercept + `X` with the regression
//! that also includes the position's expected (a, d) codes:
//! `LOD = (n/2) log10(RSS0 / RSS1)`. That is the same quantity as
//! `LOD(y, {q, X}) - LOD(y, X)`.

use std::io::Write;

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::genetics::{F2Cross, GenoProbTable, Locus};
use crate::linalg::OrthoBasis;
use crate::{par, seeded_rng, Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 5.0;

/// Expected genotype columns at every grid position, built once per
/// dataset and shared by all scans.
#[derive(Debug, Clone)]
pub struct ScanDesign {
    columns: Vec<[Vec<f64>; 2]>,
}

impl ScanDesign {
    pub fn new(probs: &GenoProbTable) -> Self {
        Self {
            columns: par::map_indices(probs.n_positions(), |p| probs.expected_columns(p)),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self, pos: usize) -> &[Vec<f64>; 2] {
        &self.columns[pos]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromosomeScan {
    pub id: String,
    /// Flattened grid index of the first position.
    pub offset: usize,
    pub positions: Vec<f64>,
    pub lod: Vec<f64>,
    /// Positions where the genotype columns added nothing to the null design.
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub trait_index: usize,
    pub conditioning: Vec<usize>,
    pub chromosomes: Vec<ChromosomeScan>,
    /// Some conditioning column was collinear with the others and dropped.
    pub null_rank_deficient: bool,
}

impl ScanResult {
    pub fn max_lod(&self) -> f64 {
        self.chromosomes
            .iter()
            .flat_map(|c| c.lod.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Long-format CSV: chromosome, position_cM, lod.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["chromosome", "position_cM", "lod"])?;
        for c in &self.chromosomes {
            for (p, l) in c.positions.iter().zip(&c.lod) {
                w.write_record([c.id.as_str(), &p.to_string(), &l.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedQtl {
    pub chromosome: String,
    pub position: f64,
    pub grid_index: usize,
    pub lod: f64,
}

impl DetectedQtl {
    pub fn locus(&self) -> Locus {
        Locus::new(self.chromosome.clone(), self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub trait_index: usize,
    pub qtls: Vec<DetectedQtl>,
    pub threshold: f64,
}

impl Architecture {
    pub fn is_empty(&self) -> bool {
        self.qtls.is_empty()
    }

    pub fn has_chromosome(&self, id: &str) -> bool {
        self.qtls.iter().any(|q| q.chromosome == id)
    }
}

/// Null basis (intercept + conditioning columns) and whether any column was
/// dropped.
fn null_basis(n: usize, conditioning: &[&[f64]]) -> (OrthoBasis, bool) {
    let mut basis = OrthoBasis::with_intercept(n);
    let mut deficient = false;
    for c in conditioning {
        deficient |= !basis.push(c);
    }
    (basis, deficient)
}

fn lod_from_rss(n: usize, rss0: f64, rss1: f64) -> f64 {
    0.5 * n as f64 * (rss0 / rss1).log10()
}

/// LOD profile of `y` given `conditioning` over every design position.
fn profile(y: &[f64], conditioning: &[&[f64]], design: &ScanDesign) -> (Vec<f64>, Vec<bool>, bool) {
    let n = y.len();
    let (basis, deficient) = null_basis(n, conditioning);
    let r0 = basis.residual(y);
    let rss0 = crate::linalg::dot(&r0, &r0);
    let out = par::map_indices(design.len(), |p| {
        let [a, d] = design.columns(p);
        let (rss1, added) = basis.rss_with(&[a, d], &r0);
        if added == 0 || !(rss1 > 0.0) || !(rss0 > 0.0) {
            (0.0, true)
        } else {
            (lod_from_rss(n, rss0, rss1), false)
        }
    });
    let (lod, degenerate) = out.into_iter().unzip();
    (lod, degenerate, deficient)
}

fn max_profile(y: &[f64], conditioning: &[&[f64]], design: &ScanDesign) -> f64 {
    let n = y.len();
    let (basis, _) = null_basis(n, conditioning);
    let r0 = basis.residual(y);
    let rss0 = crate::linalg::dot(&r0, &r0);
    if !(rss0 > 0.0) {
        return 0.0;
    }
    (0..design.len())
        .map(|p| {
            let [a, d] = design.columns(p);
            let (rss1, added) = basis.rss_with(&[a, d], &r0);
            if added == 0 || !(rss1 > 0.0) {
                0.0
            } else {
                lod_from_rss(n, rss0, rss1)
            }
        })
        .fold(0.0, f64::max)
}

/// Conditional LOD of `y` at one genotype, optionally with covariate by
/// genotype interaction columns in the alternative model.
pub fn conditional_lod_columns(
    y: &[f64],
    conditioning: &[&[f64]],
    genotype: &[Vec<f64>; 2],
    interactions: bool,
) -> f64 {
    let n = y.len();
    let (basis, _) = null_basis(n, conditioning);
    let r0 = basis.residual(y);
    let rss0 = crate::linalg::dot(&r0, &r0);
    let mut extra: Vec<Vec<f64>> = vec![genotype[0].clone(), genotype[1].clone()];
    if interactions {
        for x in conditioning {
            let [xa, xd] = crate::hcgr::interaction_columns(x, genotype);
            extra.push(xa);
            extra.push(xd);
        }
    }
    let refs: Vec<&[f64]> = extra.iter().map(Vec::as_slice).collect();
    let (rss1, added) = basis.rss_with(&refs, &r0);
    if added == 0 || !(rss1 > 0.0) || !(rss0 > 0.0) {
        0.0
    } else {
        lod_from_rss(n, rss0, rss1)
    }
}

/// Scans for one cross and its genotype probability grid.
#[derive(Debug, Clone)]
pub struct Scanner<'a> {
    cross: &'a F2Cross,
    probs: &'a GenoProbTable,
    design: ScanDesign,
}

impl<'a> Scanner<'a> {
    pub fn new(cross: &'a F2Cross, probs: &'a GenoProbTable) -> Result<Self> {
        if probs.n_individuals() != cross.n_individuals() {
            return Err(Error::InvalidInput(format!(
                "genotype probabilities for {} individuals, cross has {}",
                probs.n_individuals(),
                cross.n_individuals()
            )));
        }
        Ok(Self {
            cross,
            probs,
            design: ScanDesign::new(probs),
        })
    }

    pub fn cross(&self) -> &'a F2Cross {
        self.cross
    }

    pub fn probs(&self) -> &'a GenoProbTable {
        self.probs
    }

    pub fn design(&self) -> &ScanDesign {
        &self.design
    }

    fn check(&self, trait_index: usize, conditioning: &[usize]) -> Result<()> {
        let t = self.cross.n_traits();
        if trait_index >= t || conditioning.iter().any(|&c| c >= t) {
            return Err(Error::InvalidInput(format!("trait index out of range (cross has {t} traits)")));
        }
        if conditioning.contains(&trait_index) {
            return Err(Error::InvalidInput(format!(
                "trait {trait_index} cannot condition on itself"
            )));
        }
        let mut sorted = conditioning.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != conditioning.len() {
            return Err(Error::InvalidInput("duplicate conditioning trait".into()));
        }
        Ok(())
    }

    fn conditioning_columns(&self, conditioning: &[usize]) -> Vec<&'a [f64]> {
        conditioning.iter().map(|&c| self.cross.phenotype(c)).collect()
    }

    pub fn scan(&self, trait_index: usize, conditioning: &[usize]) -> Result<ScanResult> {
        self.check(trait_index, conditioning)?;
        let cols = self.conditioning_columns(conditioning);
        let (lod, degenerate, deficient) = profile(self.cross.phenotype(trait_index), &cols, &self.design);
        let chromosomes = self
            .probs
            .grid()
            .iter()
            .map(|c| ChromosomeScan {
                id: c.id.clone(),
                offset: c.offset,
                positions: c.positions.clone(),
                lod: lod[c.offset..c.offset + c.len()].to_vec(),
                degenerate: degenerate[c.offset..c.offset + c.len()].to_vec(),
            })
            .collect();
        Ok(ScanResult {
            trait_index,
            conditioning: conditioning.to_vec(),
            chromosomes,
            null_rank_deficient: deficient,
        })
    }

    /// Conditional LOD at flattened grid index `pos`.
    pub fn conditional_lod(
        &self,
        trait_index: usize,
        pos: usize,
        conditioning: &[usize],
        interactions: bool,
    ) -> Result<f64> {
        self.check(trait_index, conditioning)?;
        if pos >= self.design.len() {
            return Err(Error::InvalidInput(format!("grid index {pos} out of range")));
        }
        Ok(conditional_lod_columns(
            self.cross.phenotype(trait_index),
            &self.conditioning_columns(conditioning),
            self.design.columns(pos),
            interactions,
        ))
    }

    /// Upper `alpha` quantile of the genome-wide maximum LOD over
    /// permutations of the individuals. Conditioning traits move with the
    /// scanned trait so their relation to it is preserved.
    pub fn permutation_threshold(
        &self,
        trait_index: usize,
        conditioning: &[usize],
        n_perm: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<f64> {
        self.check(trait_index, conditioning)?;
        if n_perm < 100 {
            return Err(Error::InvalidInput(format!("need at least 100 permutations, got {n_perm}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let n = self.cross.n_individuals();
        let mut rng = seeded_rng(seed);
        let perms: Vec<Vec<usize>> = (0..n_perm)
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                idx
            })
            .collect();
        let y = self.cross.phenotype(trait_index);
        let x = self.conditioning_columns(conditioning);
        let maxima = par::map_slice(&perms, |idx| {
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let xp: Vec<Vec<f64>> = x.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect();
            let xr: Vec<&[f64]> = xp.iter().map(Vec::as_slice).collect();
            max_profile(&yp, &xr, &self.design)
        });
        let threshold = upper_quantile(maxima, alpha);
        debug!("permutation threshold {threshold:.3} (alpha {alpha}, {n_perm} permutations)");
        Ok(threshold)
    }
}

/// Value at sorted index `ceil((1 - alpha) N) - 1`; alpha = 1 gives the minimum.
pub fn upper_quantile(mut values: Vec<f64>, alpha: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = ((1.0 - alpha) * n as f64).ceil() as usize;
    values[k.saturating_sub(1).min(n - 1)]
}

/// Highest position per chromosome with LOD at or above `threshold`; ties
/// go to the lowest cM position. Degenerate positions are ignored.
pub fn select_architecture(scan: &ScanResult, threshold: f64) -> Result<Architecture> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be positive, got {threshold}")));
    }
    let mut qtls = Vec::new();
    for c in &scan.chromosomes {
        let mut best: Option<usize> = None;
        for k in 0..c.lod.len() {
            if c.degenerate[k] || !c.lod[k].is_finite() {
                continue;
            }
            if best.is_none_or(|b| c.lod[k] > c.lod[b]) {
                best = Some(k);
            }
        }
        if let Some(k) = best.filter(|&k| c.lod[k] >= threshold) {
            qtls.push(DetectedQtl {
                chromosome: c.id.clone(),
                position: c.positions[k],
                grid_index: c.offset + k,
                lod: c.lod[k],
            });
        }
    }
    Ok(Architecture {
        trait_index: scan.trait_index,
        qtls,
        threshold,
    })
}

/// Convenience wrapper building a one-off [`Scanner`].
pub fn scan(
    cross: &F2Cross,
    probs: &GenoProbTable,
    trait_index: usize,
    conditioning: &[usize],
) -> Result<ScanResult> {
    Scanner::new(cross, probs)?.scan(trait_index, conditioning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetics::{calc_genoprob, GeneticMap};
    use crate::simulate::{self, SignalStrength};
    use nalgebra::DMatrix;

    /// LOD of `y` on intercept + columns against intercept only, via SVD.
    fn oracle_lod(y: &[f64], columns: &[&[f64]]) -> f64 {
        let n = y.len();
        let rss = |cols: &[&[f64]]| {
            let x = DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
            let yv = DMatrix::from_column_slice(n, 1, y);
            let beta = x.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
            (yv - x * beta).norm_squared()
        };
        0.5 * n as f64 * (rss(&[]) / rss(columns)).log10()
    }

    fn fig1(seed: u64, n: usize) -> (F2Cross, GenoProbTable) {
        let rep = simulate::replicate(SignalStrength::Strong, n, seed).unwrap();
        let probs = calc_genoprob(&rep.cross, 2.0, 1e-4).unwrap();
        (rep.cross, probs)
    }

    #[test]
    fn conditional_lod_is_difference_of_lods() {
        let (cross, probs) = fig1(1, 200);
        let s = Scanner::new(&cross, &probs).unwrap();
        let cond = [1, 2, 3];
        let res = s.scan(4, &cond).unwrap();
        let y = cross.phenotype(4);
        let x: Vec<&[f64]> = cond.iter().map(|&c| cross.phenotype(c)).collect();
        let base = oracle_lod(y, &x);
        for c in &res.chromosomes {
            for (k, lod) in c.lod.iter().enumerate() {
                let [a, d] = s.design().columns(c.offset + k);
                let mut full = x.clone();
                full.push(a);
                full.push(d);
                let want = oracle_lod(y, &full) - base;
                assert!((lod - want).abs() < 1e-9, "{lod} vs {want}");
            }
        }
    }

    #[test]
    fn lods_are_non_negative_and_grid_sized() {
        let (cross, probs) = fig1(2, 150);
        let s = Scanner::new(&cross, &probs).unwrap();
        for t in 0..5 {
            let r = s.scan(t, &[]).unwrap();
            assert_eq!(r.chromosomes.len(), 5);
            for c in &r.chromosomes {
                assert_eq!(c.positions.len(), c.lod.len());
                assert!(c.lod.iter().all(|&l| l >= -1e-9));
            }
        }
    }

    #[test]
    fn rejects_bad_conditioning() {
        let (cross, probs) = fig1(3, 50);
        let s = Scanner::new(&cross, &probs).unwrap();
        assert!(s.scan(1, &[1]).is_err());
        assert!(s.scan(1, &[0, 0]).is_err());
        assert!(s.scan(9, &[]).is_err());
    }

    #[test]
    fn constant_genotype_drops_interactions() {
        let n = 40;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        for constant in [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]] {
            let g = [vec![constant[0]; n], vec![constant[1]; n]];
            let with = conditional_lod_columns(&y, &[&x], &g, true);
            let without = conditional_lod_columns(&y, &[&x], &g, false);
            assert_eq!(with, without);
        }
    }

    #[test]
    fn interactions_never_lower_the_lod() {
        let (cross, probs) = fig1(4, 200);
        let s = Scanner::new(&cross, &probs).unwrap();
        for pos in [0, 30, 120] {
            let plain = s.conditional_lod(4, pos, &[2, 3], false).unwrap();
            let inter = s.conditional_lod(4, pos, &[2, 3], true).unwrap();
            assert!(inter >= plain - 1e-9);
        }
    }

    fn synthetic(lods: &[f64]) -> ScanResult {
        let positions: Vec<f64> = (0..lods.len()).map(|k| 20.0 * k as f64).collect();
        ScanResult {
            trait_index: 0,
            conditioning: vec![],
            chromosomes: vec![ChromosomeScan {
                id: "1".into(),
                offset: 0,
                positions,
                lod: lods.to_vec(),
                degenerate: vec![false; lods.len()],
            }],
            null_rank_deficient: false,
        }
    }

    #[test]
    fn architecture_selection_rules() {
        assert!(select_architecture(&synthetic(&[1.0, 4.9, 2.0]), 5.0).unwrap().is_empty());
        let tie = select_architecture(&synthetic(&[0.0, 0.0, 7.0, 1.0, 7.0]), 5.0).unwrap();
        assert_eq!(tie.qtls.len(), 1);
        assert_eq!(tie.qtls[0].position, 40.0);
        assert!(select_architecture(&synthetic(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn quantile_definition() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(upper_quantile(v.clone(), 1.0), 1.0);
        assert_eq!(upper_quantile(v.clone(), 0.05), 950.0);
        assert_eq!(upper_quantile(v, 1e-9), 1000.0);
    }

    #[test]
    fn permutation_threshold_preconditions() {
        let (cross, probs) = fig1(5, 60);
        let s = Scanner::new(&cross, &probs).unwrap();
        assert!(s.permutation_threshold(0, &[], 99, 0.05, 1).is_err());
        assert!(s.permutation_threshold(0, &[], 100, 0.0, 1).is_err());
        let a = s.permutation_threshold(0, &[], 100, 0.05, 7).unwrap();
        assert_eq!(a, s.permutation_threshold(0, &[], 100, 0.05, 7).unwrap());
        let min = s.permutation_threshold(0, &[], 100, 1.0, 7).unwrap();
        assert!(min <= a);
    }

    #[test]
    fn csv_export() {
        let mut out = Vec::new();
        synthetic(&[1.5, 2.0]).write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "chromosome,position_cM,lod\n1,0,1.5\n1,20,2\n");
    }

    #[test]
    fn scan_on_known_map_has_expected_grid() {
        let map = GeneticMap::uniform(2, 100.0, 10).unwrap();
        let g = crate::genetics::simulate_f2_genotypes(&map, 30, 1).unwrap();
        let y = vec![(0..30).map(|i| i as f64).collect()];
        let cross = F2Cross::new(map, g, y, vec!["y".into()]).unwrap();
        let probs = calc_genoprob(&cross, 2.0, 1e-4).unwrap();
        let r = scan(&cross, &probs, 0, &[]).unwrap();
        assert_eq!(r.chromosomes[1].offset, 59);
        assert_eq!(r.chromosomes[1].lod.len(), 59);
    }
}
