//! Homogeneous conditional Gaussian regression model of phenotypes given QTL
//! genotypes.
//!
//! Each trait follows a structural equation
//!
//! ```text
//! y_t = mu_t + X_t theta_t + sum_{v in pa(t)} beta_tv y_v + e_t,   e_t ~ N(0, sigma2_t)
//! ```
//!
//! where `X_t` holds the (additive, dominance) codes of the trait's QTLs and
//! any covariates. Jointly the traits are multivariate normal with
//! concentration `Omega` and linear term `gamma_i`; `Omega` depends only on the
//! `beta`s and `sigma2`s, never on genotypes.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::genetics::{GenotypeSource, Locus};
use crate::graph::Dag;
use crate::linalg::OrthoBasis;
use crate::{seeded_rng, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtlEffect {
    pub locus: Locus,
    pub additive: f64,
    pub dominance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParentEffect {
    pub parent: usize,
    pub coefficient: f64,
}

/// Structural equation of one trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitEquation {
    pub name: String,
    pub mean: f64,
    #[serde(default)]
    pub qtls: Vec<QtlEffect>,
    #[serde(default)]
    pub covariate_effects: Vec<f64>,
    #[serde(default)]
    pub parents: Vec<ParentEffect>,
    pub variance: f64,
}

impl TraitEquation {
    pub fn new(name: impl Into<String>, mean: f64, variance: f64) -> Self {
        Self {
            name: name.into(),
            mean,
            qtls: Vec::new(),
            covariate_effects: Vec::new(),
            parents: Vec::new(),
            variance,
        }
    }

    pub fn with_qtl(mut self, locus: Locus, additive: f64, dominance: f64) -> Self {
        self.qtls.push(QtlEffect {
            locus,
            additive,
            dominance,
        });
        self
    }

    pub fn with_parent(mut self, parent: usize, coefficient: f64) -> Self {
        self.parents.push(ParentEffect {
            parent,
            coefficient,
        });
        self
    }
}

/// Genetic and covariate design of one individual: `codes[t][k]` are the
/// (a, d) codes of trait `t`'s `k`-th QTL.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualDesign {
    pub codes: Vec<Vec<[f64; 2]>>,
    pub covariates: Vec<f64>,
}

/// Multivariate normal in canonical form.
#[derive(Debug, Clone)]
pub struct JointGaussian {
    pub omega: DMatrix<f64>,
    pub gamma: Vec<DVector<f64>>,
}

impl JointGaussian {
    /// log N(y; Omega^-1 gamma_i, Omega^-1).
    pub fn log_density(&self, i: usize, y: &DVector<f64>) -> Result<f64> {
        let chol = self
            .omega
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("concentration matrix not positive definite".into()))?;
        let mean = chol.solve(&self.gamma[i]);
        let r = y - mean;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let t = y.len() as f64;
        Ok(-0.5 * (t * LN_2PI - log_det + (r.transpose() * &self.omega * &r)[(0, 0)]))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    edges: Vec<[usize; 2]>,
    traits: Vec<TraitEquation>,
}

/// A full phenotype model. The DAG is implied by the parent lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct HcgrModel {
    dag: Dag,
    traits: Vec<TraitEquation>,
}

impl TryFrom<ModelRepr> for HcgrModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let model = HcgrModel::new(r.traits)?;
        let mut edges: Vec<(usize, usize)> = r.edges.iter().map(|e| (e[0], e[1])).collect();
        edges.sort_unstable();
        if edges != model.dag.edges() {
            return Err(Error::InvalidModel(
                "edge list does not match the traits' parent lists".into(),
            ));
        }
        Ok(model)
    }
}

impl From<HcgrModel> for ModelRepr {
    fn from(m: HcgrModel) -> Self {
        ModelRepr {
            edges: m.dag.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            traits: m.traits,
        }
    }
}

impl HcgrModel {
    pub fn new(traits: Vec<TraitEquation>) -> Result<Self> {
        let n = traits.len();
        let mut edges = Vec::new();
        for (t, eq) in traits.iter().enumerate() {
            if !(eq.variance > 0.0 && eq.variance.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "trait {}: residual variance must be positive, got {}",
                    eq.name, eq.variance
                )));
            }
            let finite = eq.mean.is_finite()
                && eq.parents.iter().all(|p| p.coefficient.is_finite())
                && eq.qtls.iter().all(|q| q.additive.is_finite() && q.dominance.is_finite())
                && eq.covariate_effects.iter().all(|c| c.is_finite());
            if !finite {
                return Err(Error::InvalidModel(format!(
                    "trait {}: non-finite parameter",
                    eq.name
                )));
            }
            for p in &eq.parents {
                if p.parent >= n {
                    return Err(Error::InvalidModel(format!(
                        "trait {}: parent {} out of range",
                        eq.name, p.parent
                    )));
                }
                edges.push((p.parent, t));
            }
        }
        let dag = Dag::new(n, &edges)?;
        Ok(Self { dag, traits })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn traits(&self) -> &[TraitEquation] {
        &self.traits
    }

    pub fn n_traits(&self) -> usize {
        self.traits.len()
    }

    pub fn trait_names(&self) -> Vec<String> {
        self.traits.iter().map(|t| t.name.clone()).collect()
    }

    /// beta_tv: coefficient of `v` in the equation of `t` (0 when absent).
    pub fn coefficient(&self, t: usize, v: usize) -> f64 {
        self.traits[t]
            .parents
            .iter()
            .filter(|p| p.parent == v)
            .map(|p| p.coefficient)
            .sum()
    }

    /// mu*_t = mu_t + X_t theta_t for every trait.
    pub fn mean_star(&self, design: &IndividualDesign) -> Vec<f64> {
        self.traits
            .iter()
            .zip(&design.codes)
            .map(|(eq, codes)| {
                let genetic: f64 = eq
                    .qtls
                    .iter()
                    .zip(codes)
                    .map(|(q, c)| q.additive * c[0] + q.dominance * c[1])
                    .sum();
                let cov: f64 = eq
                    .covariate_effects
                    .iter()
                    .zip(&design.covariates)
                    .map(|(b, x)| b * x)
                    .sum();
                eq.mean + genetic + cov
            })
            .collect()
    }

    /// Concentration matrix, entrywise. Takes no genotype input: the model
    /// is homogeneous.
    pub fn concentration_matrix(&self) -> DMatrix<f64> {
        let n = self.n_traits();
        let s2: Vec<f64> = self.traits.iter().map(|t| t.variance).collect();
        let beta = |t: usize, v: usize| self.coefficient(t, v);
        let arc = |u: usize, v: usize| self.dag.has_edge(u, v);
        DMatrix::from_fn(n, n, |t, v| {
            if t == v {
                1.0 / s2[t]
                    + (0..n)
                        .filter(|&s| arc(t, s))
                        .map(|s| beta(s, t).powi(2) / s2[s])
                        .sum::<f64>()
            } else {
                let mut w = 0.0;
                if arc(t, v) {
                    w -= beta(v, t) / s2[v];
                }
                if arc(v, t) {
                    w -= beta(t, v) / s2[t];
                }
                w + (0..n)
                    .filter(|&s| arc(v, s) && arc(t, s))
                    .map(|s| beta(s, v) * beta(s, t) / s2[s])
                    .sum::<f64>()
            }
        })
    }

    /// gamma_i for one individual.
    pub fn linear_term(&self, design: &IndividualDesign) -> DVector<f64> {
        let mu = self.mean_star(design);
        let n = self.n_traits();
        DVector::from_fn(n, |t, _| {
            mu[t] / self.traits[t].variance
                - (0..n)
                    .filter(|&s| s != t && self.dag.has_edge(t, s))
                    .map(|s| self.coefficient(s, t) * mu[s] / self.traits[s].variance)
                    .sum::<f64>()
        })
    }

    fn check_covariates(&self, covariates: &[Vec<f64>], n: usize) -> Result<()> {
        for eq in &self.traits {
            if eq.covariate_effects.len() > covariates.len() {
                return Err(Error::InvalidInput(format!(
                    "trait {} needs {} covariates, {} supplied",
                    eq.name,
                    eq.covariate_effects.len(),
                    covariates.len()
                )));
            }
        }
        if covariates.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("covariate length mismatch".into()));
        }
        Ok(())
    }

    /// Per-individual designs using expected genotype codes from `source`.
    pub fn designs<S: GenotypeSource + ?Sized>(
        &self,
        source: &S,
        covariates: &[Vec<f64>],
    ) -> Result<Vec<IndividualDesign>> {
        let n = source.n_individuals();
        self.check_covariates(covariates, n)?;
        let codes: Vec<Vec<Vec<[f64; 2]>>> = self
            .traits
            .iter()
            .map(|eq| {
                eq.qtls
                    .iter()
                    .map(|q| source.expected_codes(&q.locus))
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        Ok(assemble_designs(&codes, covariates, n))
    }

    pub fn joint_gaussian<S: GenotypeSource + ?Sized>(
        &self,
        source: &S,
        covariates: &[Vec<f64>],
    ) -> Result<JointGaussian> {
        Ok(JointGaussian {
            omega: self.concentration_matrix(),
            gamma: self
                .designs(source, covariates)?
                .iter()
                .map(|d| self.linear_term(d))
                .collect(),
        })
    }

    /// Draw phenotypes (column-major, `[t][i]`) in topological order.
    /// Genotypes at each distinct locus are drawn once and shared by all
    /// traits that carry a QTL there.
    pub fn simulate_phenotypes<S: GenotypeSource + ?Sized>(
        &self,
        source: &S,
        covariates: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let n = source.n_individuals();
        self.check_covariates(covariates, n)?;
        let mut rng = seeded_rng(seed);
        let mut drawn: Vec<(Locus, Vec<[f64; 2]>)> = Vec::new();
        let mut codes = Vec::with_capacity(self.n_traits());
        for eq in &self.traits {
            let mut per_trait = Vec::with_capacity(eq.qtls.len());
            for q in &eq.qtls {
                let hit = drawn.iter().find(|(l, _)| {
                    l.chromosome == q.locus.chromosome && (l.position - q.locus.position).abs() < 1e-6
                });
                let c = match hit {
                    Some((_, c)) => c.clone(),
                    None => {
                        let c = source.draw_codes(&q.locus, &mut rng)?;
                        drawn.push((q.locus.clone(), c.clone()));
                        c
                    }
                };
                per_trait.push(c);
            }
            codes.push(per_trait);
        }
        let designs = assemble_designs(&codes, covariates, n);
        let mu: Vec<Vec<f64>> = designs.iter().map(|d| self.mean_star(d)).collect();

        let mut y = vec![vec![0.0; n]; self.n_traits()];
        for t in self.dag.topological_order() {
            let eq = &self.traits[t];
            let noise = Normal::new(0.0, eq.variance.sqrt())
                .map_err(|e| Error::InvalidModel(e.to_string()))?;
            for i in 0..n {
                let parents: f64 = eq
                    .parents
                    .iter()
                    .map(|p| p.coefficient * y[p.parent][i])
                    .sum();
                y[t][i] = mu[i][t] + parents + noise.sample(&mut rng);
            }
        }
        Ok(y)
    }

    /// Factorized log-likelihood: sum over individuals and traits of the
    /// structural-equation normal densities.
    pub fn log_likelihood<S: GenotypeSource + ?Sized>(
        &self,
        phenotypes: &[Vec<f64>],
        source: &S,
        covariates: &[Vec<f64>],
    ) -> Result<f64> {
        if phenotypes.len() != self.n_traits() {
            return Err(Error::InvalidInput(format!(
                "{} phenotype columns for a {}-trait model",
                phenotypes.len(),
                self.n_traits()
            )));
        }
        let n = source.n_individuals();
        if phenotypes.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("phenotype length mismatch".into()));
        }
        let designs = self.designs(source, covariates)?;
        let mut ll = 0.0;
        for (i, d) in designs.iter().enumerate() {
            let mu = self.mean_star(d);
            for (t, eq) in self.traits.iter().enumerate() {
                let parents: f64 = eq
                    .parents
                    .iter()
                    .map(|p| p.coefficient * phenotypes[p.parent][i])
                    .sum();
                let r = phenotypes[t][i] - mu[t] - parents;
                ll += -0.5 * (LN_2PI + eq.variance.ln() + r * r / eq.variance);
            }
        }
        Ok(ll)
    }
}

fn assemble_designs(
    codes: &[Vec<Vec<[f64; 2]>>],
    covariates: &[Vec<f64>],
    n: usize,
) -> Vec<IndividualDesign> {
    (0..n)
        .map(|i| IndividualDesign {
            codes: codes
                .iter()
                .map(|per_trait| per_trait.iter().map(|c| c[i]).collect())
                .collect(),
            covariates: covariates.iter().map(|c| c[i]).collect(),
        })
        .collect()
}

/// Additive and dominance design columns from per-individual codes.
pub fn genotype_columns(codes: &[[f64; 2]]) -> [Vec<f64>; 2] {
    [
        codes.iter().map(|c| c[0]).collect(),
        codes.iter().map(|c| c[1]).collect(),
    ]
}

/// Elementwise products `x * a` and `x * d` (interacting covariate).
pub fn interaction_columns(x: &[f64], genotype: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
    [
        x.iter().zip(&genotype[0]).map(|(a, b)| a * b).collect(),
        x.iter().zip(&genotype[1]).map(|(a, b)| a * b).collect(),
    ]
}

/// Least-squares estimates for one structural equation.
#[derive(Debug, Clone)]
pub struct FittedEquation {
    pub equation: TraitEquation,
    /// Standard errors in design order: intercept, parents, then (a, d) per
    /// QTL. `None` for columns dropped as collinear.
    pub standard_errors: Vec<Option<f64>>,
    pub rss: f64,
    pub n: usize,
    /// Number of mean parameters actually estimated.
    pub rank: usize,
}

impl FittedEquation {
    /// Maximized log-likelihood, with sigma2 = RSS / n.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        -0.5 * n * ((2.0 * std::f64::consts::PI * self.rss / n).ln() + 1.0)
    }
}

/// Ordinary least squares for trait `t` on an intercept, the given parents
/// and the (a, d) codes of each locus.
pub fn fit_equation<S: GenotypeSource + ?Sized>(
    name: &str,
    phenotypes: &[Vec<f64>],
    t: usize,
    parents: &[usize],
    loci: &[Locus],
    source: &S,
) -> Result<FittedEquation> {
    let n = phenotypes[t].len();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    columns.extend(parents.iter().map(|&p| phenotypes[p].clone()));
    for l in loci {
        let [a, d] = genotype_columns(&source.expected_codes(l)?);
        columns.push(a);
        columns.push(d);
    }
    let y = &phenotypes[t];
    let mut basis = OrthoBasis::new(n);
    let kept: Vec<bool> = columns.iter().map(|c| basis.push(c)).collect();
    let rank = basis.rank();
    if rank >= n {
        return Err(Error::Degenerate(format!(
            "trait {name}: {rank} parameters for {n} observations"
        )));
    }
    let coef = basis.coefficients(y);
    let rss = basis.rss(y);

    // Covariance of the estimates from the kept columns.
    let kept_cols: Vec<&Vec<f64>> = columns.iter().zip(&kept).filter(|(_, &k)| k).map(|(c, _)| c).collect();
    let x = DMatrix::from_fn(n, rank, |i, j| kept_cols[j][i]);
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate(format!("trait {name}: singular design")))?;
    let s2 = rss / (n - rank) as f64;

    let mut full = Vec::with_capacity(columns.len());
    let mut ses = Vec::with_capacity(columns.len());
    let mut k = 0;
    for &keep in &kept {
        if keep {
            full.push(coef[k]);
            ses.push(Some((s2 * xtx_inv[(k, k)]).sqrt()));
            k += 1;
        } else {
            full.push(0.0);
            ses.push(None);
        }
    }
    let mut eq = TraitEquation::new(name, full[0], rss / n as f64);
    for (j, &p) in parents.iter().enumerate() {
        eq = eq.with_parent(p, full[1 + j]);
    }
    for (j, l) in loci.iter().enumerate() {
        let base = 1 + parents.len() + 2 * j;
        eq = eq.with_qtl(l.clone(), full[base], full[base + 1]);
    }
    Ok(FittedEquation {
        equation: eq,
        standard_errors: ses,
        rss,
        n,
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetics::{simulate_f2_genotypes, GeneticMap, GenotypeMatrix, KnownGenotypes};
    use rand::Rng;

    /// (I - B)^T D^-1 (I - B), computed with plain matrix algebra.
    fn omega_oracle(m: &HcgrModel) -> DMatrix<f64> {
        let n = m.n_traits();
        let b = DMatrix::from_fn(n, n, |t, v| m.coefficient(t, v));
        let i_b = DMatrix::identity(n, n) - b;
        let d_inv = DMatrix::from_fn(n, n, |t, v| if t == v { 1.0 / m.traits()[t].variance } else { 0.0 });
        i_b.transpose() * d_inv * i_b
    }

    fn random_model(rng: &mut crate::SeededRng, n: usize) -> HcgrModel {
        let dag = Dag::random(n, 0.5, rng);
        let traits = (0..n)
            .map(|t| {
                let mut eq = TraitEquation::new(format!("y{t}"), rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0));
                for p in dag.parents(t) {
                    eq = eq.with_parent(p, rng.random_range(-2.0..2.0));
                }
                eq
            })
            .collect();
        HcgrModel::new(traits).unwrap()
    }

    fn no_genotypes(n: usize) -> (GeneticMap, GenotypeMatrix) {
        let map = GeneticMap::uniform(1, 10.0, 1).unwrap();
        (map, GenotypeMatrix::new(n, 1, vec![None; n]).unwrap())
    }

    #[test]
    fn single_trait_concentration() {
        let m = HcgrModel::new(vec![TraitEquation::new("y", 0.0, 2.5)]).unwrap();
        assert_eq!(m.concentration_matrix(), DMatrix::from_element(1, 1, 0.4));
    }

    #[test]
    fn two_trait_concentration_matches_hand_expansion() {
        let (b, s1, s2) = (0.7, 1.5, 0.5);
        let m = HcgrModel::new(vec![
            TraitEquation::new("y1", 0.0, s1),
            TraitEquation::new("y2", 0.0, s2).with_parent(0, b),
        ])
        .unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0 / s1 + b * b / s2, -b / s2, -b / s2, 1.0 / s2]);
        assert!((m.concentration_matrix() - want).abs().max() < 1e-15);
    }

    #[test]
    fn concentration_matches_matrix_identity_on_random_models() {
        let mut rng = crate::seeded_rng(2024);
        for _ in 0..1000 {
            let n = rng.random_range(1..=8);
            let m = random_model(&mut rng, n);
            let diff = (m.concentration_matrix() - omega_oracle(&m)).abs().max();
            assert!(diff < 1e-10, "{diff}");
        }
    }

    #[test]
    fn linear_term_without_edges() {
        let m = HcgrModel::new(vec![
            TraitEquation::new("a", 1.0, 2.0),
            TraitEquation::new("b", -3.0, 0.5),
        ])
        .unwrap();
        let d = IndividualDesign { codes: vec![vec![], vec![]], covariates: vec![] };
        let g = m.linear_term(&d);
        assert_eq!(g.as_slice(), &[0.5, -6.0]);
    }

    #[test]
    fn two_trait_linear_term() {
        let (b, s1, s2, m1, m2) = (0.7, 1.5, 0.5, 2.0, -1.0);
        let m = HcgrModel::new(vec![
            TraitEquation::new("y1", m1, s1),
            TraitEquation::new("y2", m2, s2).with_parent(0, b),
        ])
        .unwrap();
        let d = IndividualDesign { codes: vec![vec![], vec![]], covariates: vec![] };
        let g = m.linear_term(&d);
        assert!((g[0] - (m1 / s1 - b * m2 / s2)).abs() < 1e-15);
        assert!((g[1] - m2 / s2).abs() < 1e-15);
    }

    #[test]
    fn canonical_mean_equals_recursive_mean() {
        let mut rng = crate::seeded_rng(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=7);
            let m = random_model(&mut rng, n);
            let design = IndividualDesign { codes: vec![vec![]; n], covariates: vec![] };
            let mu = m.mean_star(&design);
            let mut recursive = vec![0.0; n];
            for t in m.dag().topological_order() {
                recursive[t] = mu[t] + m.traits()[t].parents.iter().map(|p| p.coefficient * recursive[p.parent]).sum::<f64>();
            }
            let canonical = m.concentration_matrix().cholesky().unwrap().solve(&m.linear_term(&design));
            for t in 0..n {
                assert!((canonical[t] - recursive[t]).abs() < 1e-8 * (1.0 + recursive[t].abs()));
            }
        }
    }

    #[test]
    fn standard_normal_log_likelihood() {
        let m = HcgrModel::new(vec![TraitEquation::new("y", 0.0, 1.0)]).unwrap();
        let (map, g) = no_genotypes(2);
        let src = KnownGenotypes { map: &map, genotypes: &g };
        let ll = m.log_likelihood(&[vec![0.0, 0.0]], &src, &[]).unwrap();
        assert!((ll + 1.837877).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_variance() {
        assert!(matches!(
            HcgrModel::new(vec![TraitEquation::new("y", 0.0, 0.0)]),
            Err(Error::InvalidModel(_))
        ));
        assert!(HcgrModel::new(vec![TraitEquation::new("y", 0.0, -1.0)]).is_err());
        let cyclic = vec![
            TraitEquation::new("a", 0.0, 1.0).with_parent(1, 0.5),
            TraitEquation::new("b", 0.0, 1.0).with_parent(0, 0.5),
        ];
        assert!(matches!(HcgrModel::new(cyclic), Err(Error::InvalidStructure(_))));
    }

    fn qtl_model(map: &GeneticMap) -> HcgrModel {
        let l = |c: usize| map.locus_of(map.offsets()[c] + 2).unwrap();
        HcgrModel::new(vec![
            TraitEquation::new("y1", 0.3, 1.0).with_qtl(l(0), 0.8, 0.3),
            TraitEquation::new("y2", -0.2, 0.7).with_parent(0, 0.9).with_qtl(l(1), 0.6, 0.1),
            TraitEquation::new("y3", 0.0, 1.3).with_parent(0, -0.5).with_parent(1, 1.1).with_qtl(l(0), 0.4, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn joint_density_equals_factorized_likelihood() {
        let map = GeneticMap::uniform(2, 50.0, 5).unwrap();
        let g = simulate_f2_genotypes(&map, 40, 9).unwrap();
        let src = KnownGenotypes { map: &map, genotypes: &g };
        let m = qtl_model(&map);
        let y = m.simulate_phenotypes(&src, &[], 10).unwrap();
        let joint = m.joint_gaussian(&src, &[]).unwrap();
        for i in 0..40 {
            let yi = DVector::from_fn(3, |t, _| y[t][i]);
            let one: Vec<Vec<f64>> = y.iter().map(|c| vec![c[i]]).collect();
            let gi = GenotypeMatrix::from_rows(vec![g.row(i).to_vec()]).unwrap();
            let si = KnownGenotypes { map: &map, genotypes: &gi };
            let fact = m.log_likelihood(&one, &si, &[]).unwrap();
            assert!((joint.log_density(i, &yi).unwrap() - fact).abs() < 1e-8);
        }
    }

    #[test]
    fn single_trait_simulation_moments() {
        let m = HcgrModel::new(vec![TraitEquation::new("y", 0.0, 1.0)]).unwrap();
        let (map, g) = no_genotypes(10_000);
        let y = m
            .simulate_phenotypes(&KnownGenotypes { map: &map, genotypes: &g }, &[], 1)
            .unwrap();
        let mean = crate::linalg::mean(&y[0]);
        let var = y[0].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9999.0;
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0).abs() < 0.1);
    }

    #[test]
    fn residual_covariance_matches_inverse_concentration() {
        let map = GeneticMap::uniform(2, 50.0, 5).unwrap();
        let n = 50_000;
        let g = simulate_f2_genotypes(&map, n, 3).unwrap();
        let src = KnownGenotypes { map: &map, genotypes: &g };
        let m = qtl_model(&map);
        let y = m.simulate_phenotypes(&src, &[], 4).unwrap();
        let joint = m.joint_gaussian(&src, &[]).unwrap();
        let sigma = joint.omega.clone().try_inverse().unwrap();
        let chol = joint.omega.clone().cholesky().unwrap();
        let resid: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_fn(3, |t, _| y[t][i]) - chol.solve(&joint.gamma[i]))
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                let emp = resid.iter().map(|r| r[a] * r[b]).sum::<f64>() / n as f64;
                let se = ((sigma[(a, a)] * sigma[(b, b)] + sigma[(a, b)].powi(2)) / n as f64).sqrt();
                assert!((emp - sigma[(a, b)]).abs() < 4.0 * se, "({a},{b}) {emp} vs {}", sigma[(a, b)]);
            }
        }
    }

    #[test]
    fn no_phenotype_edges_means_conditional_independence() {
        let map = GeneticMap::uniform(1, 50.0, 5).unwrap();
        let n = 20_000;
        let g = simulate_f2_genotypes(&map, n, 8).unwrap();
        let src = KnownGenotypes { map: &map, genotypes: &g };
        let l = map.locus_of(2).unwrap();
        // Pleiotropic QTL, no phenotype edges.
        let m = HcgrModel::new(vec![
            TraitEquation::new("a", 0.0, 1.0).with_qtl(l.clone(), 1.0, 0.5),
            TraitEquation::new("b", 0.0, 1.0).with_qtl(l.clone(), -1.0, 0.2),
        ])
        .unwrap();
        let y = m.simulate_phenotypes(&src, &[], 9).unwrap();
        let geno = src.expected_codes(&l).unwrap();
        let marginal = pearson(&y[0], &y[1]);
        assert!(marginal.abs() > 0.2, "{marginal}");
        for class in 0..3 {
            let idx: Vec<usize> = (0..n).filter(|&i| geno[i][0] as usize == class).collect();
            let a: Vec<f64> = idx.iter().map(|&i| y[0][i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| y[1][i]).collect();
            let r = pearson(&a, &b);
            assert!(r.abs() < 4.0 / (idx.len() as f64).sqrt(), "class {class}: {r}");
        }
    }

    pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (crate::linalg::mean(a), crate::linalg::mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn adding_a_parent_never_lowers_maximized_likelihood() {
        let map = GeneticMap::uniform(2, 50.0, 5).unwrap();
        let g = simulate_f2_genotypes(&map, 300, 1).unwrap();
        let src = KnownGenotypes { map: &map, genotypes: &g };
        let m = qtl_model(&map);
        for seed in 0..20 {
            let y = m.simulate_phenotypes(&src, &[], seed).unwrap();
            let without = fit_equation("y3", &y, 2, &[0], &[], &src).unwrap();
            let with = fit_equation("y3", &y, 2, &[0, 1], &[], &src).unwrap();
            assert!(with.log_likelihood() >= without.log_likelihood() - 1e-9);
        }
    }

    #[test]
    fn least_squares_recovers_truth() {
        let map = GeneticMap::uniform(2, 50.0, 5).unwrap();
        let m = qtl_model(&map);
        let mut within = 0;
        let mut total = 0;
        for rep in 0..100u64 {
            let g = simulate_f2_genotypes(&map, 2000, 1000 + rep).unwrap();
            let src = KnownGenotypes { map: &map, genotypes: &g };
            let y = m.simulate_phenotypes(&src, &[], rep).unwrap();
            for (t, eq) in m.traits().iter().enumerate() {
                let parents: Vec<usize> = eq.parents.iter().map(|p| p.parent).collect();
                let loci: Vec<Locus> = eq.qtls.iter().map(|q| q.locus.clone()).collect();
                let fit = fit_equation(&eq.name, &y, t, &parents, &loci, &src).unwrap();
                let mut truth = vec![eq.mean];
                truth.extend(eq.parents.iter().map(|p| p.coefficient));
                for q in &eq.qtls {
                    truth.extend([q.additive, q.dominance]);
                }
                let mut est = vec![fit.equation.mean];
                est.extend(fit.equation.parents.iter().map(|p| p.coefficient));
                for q in &fit.equation.qtls {
                    est.extend([q.additive, q.dominance]);
                }
                for k in 0..truth.len() {
                    total += 1;
                    if (est[k] - truth[k]).abs() <= 3.0 * fit.standard_errors[k].unwrap() {
                        within += 1;
                    }
                }
            }
        }
        let frac = within as f64 / total as f64;
        assert!(frac >= 0.99, "{frac}");
    }

    #[test]
    fn json_round_trip() {
        let map = GeneticMap::uniform(2, 50.0, 5).unwrap();
        let m = qtl_model(&map);
        let s = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(serde_json::from_str::<HcgrModel>(&s).unwrap(), m);
        let tampered = s.replacen("\"edges\": [", "\"edges\": [\n    [2, 0],", 1);
        assert!(serde_json::from_str::<HcgrModel>(&tampered).is_err());
    }

    #[test]
    fn covariates_enter_the_mean() {
        let m = HcgrModel::new(vec![{
            let mut eq = TraitEquation::new("y", 1.0, 1.0);
            eq.covariate_effects = vec![2.0];
            eq
        }])
        .unwrap();
        let d = IndividualDesign { codes: vec![vec![]], covariates: vec![3.0] };
        assert_eq!(m.mean_star(&d), vec![7.0]);
        let (map, g) = no_genotypes(3);
        let src = KnownGenotypes { map: &map, genotypes: &g };
        assert!(m.simulate_phenotypes(&src, &[], 0).is_err());
        assert!(m.simulate_phenotypes(&src, &[vec![0.0; 3]], 0).is_ok());
    }

    #[test]
    fn interaction_columns_are_products() {
        let geno = genotype_columns(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]);
        let [xa, xd] = interaction_columns(&[2.0, 3.0, 4.0], &geno);
        assert_eq!(xa, vec![0.0, 3.0, 8.0]);
        assert_eq!(xd, vec![0.0, 3.0, 0.0]);
    }
}
