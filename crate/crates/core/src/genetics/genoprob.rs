use rand::Rng;

use super::cross::{F2Cross, GenotypeSource};
use super::map::{haldane, Locus, POSITION_TOLERANCE};
use super::F2_PRIOR;
use crate::{par, Error, Result, SeededRng};

/// Evaluation grid of one chromosome: markers plus pseudomarkers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridChromosome {
    pub id: String,
    pub positions: Vec<f64>,
    /// Global marker column at each grid point, `None` for pseudomarkers.
    pub markers: Vec<Option<usize>>,
    /// Index of this chromosome's first grid point in the flattened grid.
    pub offset: usize,
}

impl GridChromosome {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Posterior genotype probabilities P(q | m) on a position grid.
#[derive(Debug, Clone)]
pub struct GenoProbTable {
    grid: Vec<GridChromosome>,
    n: usize,
    // Position-major: probs[pos * n + i].
    probs: Vec<[f64; 3]>,
    error_rate: f64,
    step: f64,
}

impl GenoProbTable {
    pub fn grid(&self) -> &[GridChromosome] {
        &self.grid
    }

    pub fn n_individuals(&self) -> usize {
        self.n
    }

    pub fn n_positions(&self) -> usize {
        self.grid.iter().map(|c| c.len()).sum()
    }

    pub fn error_rate(&self) -> f64 {
        self.error_rate
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Probability triples of every individual at flattened grid index `pos`.
    pub fn probs_at(&self, pos: usize) -> &[[f64; 3]] {
        &self.probs[pos * self.n..(pos + 1) * self.n]
    }

    /// Chromosome index and cM position of flattened grid index `pos`.
    pub fn position(&self, pos: usize) -> (usize, f64) {
        for (ci, c) in self.grid.iter().enumerate() {
            if pos < c.offset + c.len() {
                return (ci, c.positions[pos - c.offset]);
            }
        }
        panic!("grid index {pos} out of range");
    }

    pub fn locus(&self, pos: usize) -> Locus {
        let (ci, p) = self.position(pos);
        Locus::new(self.grid[ci].id.clone(), p)
    }

    /// Flattened grid index of `locus`.
    pub fn find(&self, locus: &Locus) -> Option<usize> {
        let c = self.grid.iter().find(|c| c.id == locus.chromosome)?;
        c.positions
            .iter()
            .position(|p| (p - locus.position).abs() < POSITION_TOLERANCE)
            .map(|k| c.offset + k)
    }

    /// Haley–Knott design columns (expected additive code, P(AB)) at `pos`.
    pub fn expected_columns(&self, pos: usize) -> [Vec<f64>; 2] {
        let p = self.probs_at(pos);
        [
            p.iter().map(|t| t[1] + 2.0 * t[2]).collect(),
            p.iter().map(|t| t[1]).collect(),
        ]
    }
}

impl GenotypeSource for GenoProbTable {
    fn n_individuals(&self) -> usize {
        self.n
    }

    fn expected_codes(&self, locus: &Locus) -> Result<Vec<[f64; 2]>> {
        let pos = self.find(locus).ok_or_else(|| {
            Error::InvalidModel(format!(
                "locus {}@{} is not on the genotype probability grid",
                locus.chromosome, locus.position
            ))
        })?;
        Ok(self
            .probs_at(pos)
            .iter()
            .map(|t| [t[1] + 2.0 * t[2], t[1]])
            .collect())
    }

    fn draw_codes(&self, locus: &Locus, rng: &mut SeededRng) -> Result<Vec<[f64; 2]>> {
        let pos = self.find(locus).ok_or_else(|| {
            Error::InvalidModel(format!(
                "locus {}@{} is not on the genotype probability grid",
                locus.chromosome, locus.position
            ))
        })?;
        Ok(self
            .probs_at(pos)
            .iter()
            .map(|t| {
                let u: f64 = rng.random();
                if u < t[0] {
                    [0.0, 0.0]
                } else if u < t[0] + t[1] {
                    [1.0, 1.0]
                } else {
                    [2.0, 0.0]
                }
            })
            .collect())
    }
}

/// F2 genotype transition matrix over a recombination fraction `r`.
fn transition(r: f64) -> [[f64; 3]; 3] {
    let s = 1.0 - r;
    [
        [s * s, 2.0 * r * s, r * r],
        [r * s, s * s + r * r, r * s],
        [r * r, 2.0 * r * s, s * s],
    ]
}

fn build_grid(cross: &F2Cross, step: f64) -> Vec<GridChromosome> {
    let offsets = cross.map().offsets();
    let mut flat = 0;
    cross
        .map()
        .chromosomes()
        .iter()
        .zip(offsets)
        .map(|(chr, moff)| {
            let mut points: Vec<(f64, Option<usize>)> = chr
                .positions
                .iter()
                .enumerate()
                .map(|(k, &p)| (p, Some(moff + k)))
                .collect();
            if step > 0.0 {
                let first = chr.positions[0];
                let last = *chr.positions.last().unwrap();
                let mut k = 1;
                loop {
                    let p = first + step * k as f64;
                    if p >= last - POSITION_TOLERANCE {
                        break;
                    }
                    if chr
                        .positions
                        .iter()
                        .all(|m| (m - p).abs() >= POSITION_TOLERANCE)
                    {
                        points.push((p, None));
                    }
                    k += 1;
                }
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            let len = points.len();
            let grid = GridChromosome {
                id: chr.id.clone(),
                positions: points.iter().map(|p| p.0).collect(),
                markers: points.iter().map(|p| p.1).collect(),
                offset: flat,
            };
            flat += len;
            grid
        })
        .collect()
}

fn normalize(v: &mut [f64; 3]) -> f64 {
    let s = v[0] + v[1] + v[2];
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}

/// Forward–backward posteriors for one individual on one chromosome.
fn chromosome_posteriors(
    chr: &GridChromosome,
    row: &[Option<super::Genotype>],
    error_rate: f64,
) -> Option<Vec<[f64; 3]>> {
    let len = chr.len();
    let emission = |k: usize| -> [f64; 3] {
        match chr.markers[k].and_then(|m| row[m]) {
            None => [1.0; 3],
            Some(g) => {
                let mut e = [error_rate / 2.0; 3];
                e[g.index()] = 1.0 - error_rate;
                e
            }
        }
    };
    let transitions: Vec<[[f64; 3]; 3]> = chr
        .positions
        .windows(2)
        .map(|w| transition(haldane(w[1] - w[0])))
        .collect();

    let mut alpha = vec![[0.0; 3]; len];
    let e0 = emission(0);
    alpha[0] = [F2_PRIOR[0] * e0[0], F2_PRIOR[1] * e0[1], F2_PRIOR[2] * e0[2]];
    if normalize(&mut alpha[0]) == 0.0 {
        return None;
    }
    for k in 1..len {
        let p = &transitions[k - 1];
        let e = emission(k);
        let mut a = [0.0; 3];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = (0..3).map(|i| alpha[k - 1][i] * p[i][j]).sum::<f64>() * e[j];
        }
        if normalize(&mut a) == 0.0 {
            return None;
        }
        alpha[k] = a;
    }

    let mut beta = vec![[1.0; 3]; len];
    for k in (0..len.saturating_sub(1)).rev() {
        let p = &transitions[k];
        let e = emission(k + 1);
        let mut b = [0.0; 3];
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = (0..3).map(|j| p[i][j] * e[j] * beta[k + 1][j]).sum();
        }
        normalize(&mut b);
        beta[k] = b;
    }

    alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| {
            let mut post = [a[0] * b[0], a[1] * b[1], a[2] * b[2]];
            (normalize(&mut post) > 0.0).then_some(post)
        })
        .collect()
}

/// Genotype probabilities at markers and at pseudomarkers every `step` cM
/// (`step == 0` evaluates markers only), by an HMM along each chromosome.
pub fn calc_genoprob(cross: &F2Cross, step: f64, error_rate: f64) -> Result<GenoProbTable> {
    if !(step >= 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid step {step}")));
    }
    if !(0.0..0.5).contains(&error_rate) {
        return Err(Error::InvalidInput(format!(
            "error rate {error_rate} outside [0, 0.5)"
        )));
    }
    let grid = build_grid(cross, step);
    let n = cross.n_individuals();
    let n_pos: usize = grid.iter().map(|c| c.len()).sum();

    let per_individual = par::try_map_indices(n, |i| {
        let row = cross.genotypes().row(i);
        let mut out = Vec::with_capacity(n_pos);
        for chr in &grid {
            let post = chromosome_posteriors(chr, row, error_rate).ok_or_else(|| {
                Error::Degenerate(format!(
                    "individual {i}: genotypes on chromosome {} are impossible under error rate {error_rate}",
                    chr.id
                ))
            })?;
            out.extend(post);
        }
        Ok(out)
    })?;

    let mut probs = vec![[0.0; 3]; n * n_pos];
    for (i, row) in per_individual.into_iter().enumerate() {
        for (pos, p) in row.into_iter().enumerate() {
            probs[pos * n + i] = p;
        }
    }
    Ok(GenoProbTable {
        grid,
        n,
        probs,
        error_rate,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetics::{
        simulate_f2_genotypes, Chromosome, GeneticMap, Genotype, GenotypeMatrix,
    };

    fn cross_from(map: GeneticMap, rows: Vec<Vec<Option<Genotype>>>) -> F2Cross {
        let n = rows.len();
        F2Cross::new(
            map,
            GenotypeMatrix::from_rows(rows).unwrap(),
            vec![vec![0.0; n]],
            vec!["y".into()],
        )
        .unwrap()
    }

    fn two_marker_map() -> GeneticMap {
        GeneticMap::new(vec![Chromosome {
            id: "1".into(),
            markers: vec!["m1".into(), "m2".into()],
            positions: vec![0.0, 10.0],
        }])
        .unwrap()
    }

    #[test]
    fn grid_includes_markers_and_steps() {
        let map = GeneticMap::uniform(1, 100.0, 10).unwrap();
        let g = simulate_f2_genotypes(&map, 3, 0).unwrap();
        let cross = F2Cross::new(map, g, vec![vec![0.0; 3]], vec!["y".into()]).unwrap();
        let table = calc_genoprob(&cross, 2.0, 0.0).unwrap();
        // 0,2,...,100 plus the 8 interior markers not on the 2 cM lattice.
        assert_eq!(table.n_positions(), 59);
        let markers_only = calc_genoprob(&cross, 0.0, 0.0).unwrap();
        assert_eq!(markers_only.n_positions(), 10);
        let pos = &table.grid()[0].positions;
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn observed_markers_are_indicators() {
        let cross = cross_from(
            two_marker_map(),
            vec![
                vec![Some(Genotype::AA), Some(Genotype::AB)],
                vec![Some(Genotype::BB), Some(Genotype::BB)],
            ],
        );
        let t = calc_genoprob(&cross, 0.0, 0.0).unwrap();
        assert_eq!(t.probs_at(0)[0], [1.0, 0.0, 0.0]);
        assert_eq!(t.probs_at(1)[0], [0.0, 1.0, 0.0]);
        assert_eq!(t.probs_at(1)[1], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_row_is_prior() {
        let cross = cross_from(two_marker_map(), vec![vec![None, None]]);
        let t = calc_genoprob(&cross, 1.0, 0.01).unwrap();
        for pos in 0..t.n_positions() {
            let p = t.probs_at(pos)[0];
            for k in 0..3 {
                assert!((p[k] - F2_PRIOR[k]).abs() < 1e-12);
            }
        }
    }

    /// Enumerate both gametes across (marker 1, query, marker 2) and condition
    /// on the observed marker genotypes.
    fn two_locus_oracle(d1: f64, d2: f64, g1: usize, g2: usize) -> [f64; 3] {
        let r1 = haldane(d1);
        let r2 = haldane(d2);
        let gamete_prob = |h: [u8; 3]| {
            let t1 = if h[0] != h[1] { r1 } else { 1.0 - r1 };
            let t2 = if h[1] != h[2] { r2 } else { 1.0 - r2 };
            0.5 * t1 * t2
        };
        let mut post = [0.0; 3];
        for a in 0..8u8 {
            for b in 0..8u8 {
                let ha = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                let hb = [b & 1, (b >> 1) & 1, (b >> 2) & 1];
                if (ha[0] + hb[0]) as usize != g1 || (ha[2] + hb[2]) as usize != g2 {
                    continue;
                }
                post[(ha[1] + hb[1]) as usize] += gamete_prob(ha) * gamete_prob(hb);
            }
        }
        let s: f64 = post.iter().sum();
        post.map(|p| p / s)
    }

    #[test]
    fn midpoint_matches_enumeration() {
        let cross = cross_from(
            two_marker_map(),
            vec![vec![Some(Genotype::AA), Some(Genotype::BB)]],
        );
        let t = calc_genoprob(&cross, 5.0, 0.0).unwrap();
        let mid = t.find(&Locus::new("1", 5.0)).unwrap();
        let got = t.probs_at(mid)[0];
        let want = two_locus_oracle(5.0, 5.0, 0, 2);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
        // All three query genotypes are possible; AB dominates by symmetry.
        assert!((got[0] - got[2]).abs() < 1e-12);
    }

    #[test]
    fn off_center_matches_enumeration_for_all_genotype_pairs() {
        for g1 in 0..3 {
            for g2 in 0..3 {
                let gs = [Genotype::AA, Genotype::AB, Genotype::BB];
                let cross = cross_from(two_marker_map(), vec![vec![Some(gs[g1]), Some(gs[g2])]]);
                let t = calc_genoprob(&cross, 3.0, 0.0).unwrap();
                let q = t.find(&Locus::new("1", 3.0)).unwrap();
                let got = t.probs_at(q)[0];
                let want = two_locus_oracle(3.0, 7.0, g1, g2);
                for k in 0..3 {
                    assert!((got[k] - want[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn impossible_data_without_error_is_degenerate() {
        let map = GeneticMap::new(vec![Chromosome {
            id: "1".into(),
            markers: vec!["m1".into(), "m2".into()],
            positions: vec![0.0, 1e-300],
        }])
        .unwrap();
        let cross = cross_from(map, vec![vec![Some(Genotype::AA), Some(Genotype::BB)]]);
        assert!(matches!(
            calc_genoprob(&cross, 0.0, 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(calc_genoprob(&cross, 0.0, 0.01).is_ok());
    }

    #[test]
    fn rejects_bad_parameters() {
        let cross = cross_from(two_marker_map(), vec![vec![None, None]]);
        assert!(calc_genoprob(&cross, -1.0, 0.0).is_err());
        assert!(calc_genoprob(&cross, 1.0, 0.5).is_err());
    }
}
